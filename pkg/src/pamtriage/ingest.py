"""WAV ingest: load clips, cut fixed-length snippets.

Reads RIFF/WAVE containers holding PCM 16-bit integer or IEEE 32-bit float
samples. Everything else (compressed codecs, 8/24-bit) is rejected up front
so later stages only ever see float amplitudes in [-1, 1].
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ClippingError, CorruptHeader, EmptyFile, ParseError, UnsupportedFormat

log = logging.getLogger(__name__)

_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_IEEE_FLOAT = 0x0003
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE

# Reject a float file outright when more than this fraction of samples
# falls outside [-1, 1]; below that they are clamped with a logged warning.
MAX_CLIP_FRACTION = 0.01


@dataclass
class AudioClip:
    """Mono audio with a known rate. ``samples`` is float64 in [-1, 1]."""

    id: str
    samples: np.ndarray
    sample_rate: int
    source_path: str = ""
    start_timestamp: Optional[str] = None

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass
class Snippet:
    """Fixed-length window cut from a clip; always exactly rate * duration samples."""

    clip_id: str
    index: int
    samples: np.ndarray
    rate: int
    duration_s: float = 1.0

    @property
    def offset_s(self) -> float:
        return self.index * self.duration_s

    @property
    def ref(self) -> tuple[str, int]:
        return (self.clip_id, self.index)


def _read_fmt_chunk(body: bytes) -> tuple[int, int, int, int]:
    if len(body) < 16:
        raise CorruptHeader("fmt chunk shorter than 16 bytes")
    fmt_tag, channels, rate, _byte_rate, _block_align, bits = struct.unpack(
        "<HHIIHH", body[:16]
    )
    if fmt_tag == _WAVE_FORMAT_EXTENSIBLE:
        # Real format lives in the first two bytes of the SubFormat GUID.
        if len(body) < 40:
            raise CorruptHeader("extensible fmt chunk shorter than 40 bytes")
        fmt_tag = struct.unpack("<H", body[24:26])[0]
    if channels < 1:
        raise CorruptHeader("fmt chunk declares zero channels")
    if rate < 1:
        raise CorruptHeader("fmt chunk declares non-positive sample rate")
    return fmt_tag, channels, rate, bits


def _iter_chunks(buf: bytes):
    pos = 12
    while pos + 8 <= len(buf):
        cid = buf[pos : pos + 4]
        (size,) = struct.unpack("<I", buf[pos + 4 : pos + 8])
        body = buf[pos + 8 : pos + 8 + size]
        yield cid, body
        pos += 8 + size + (size & 1)  # chunks are word-aligned


def load_wav(path: str | Path, clip_id: Optional[str] = None, clamp: bool = True) -> AudioClip:
    """Load a WAV file as a mono AudioClip.

    Multichannel files keep channel 0 (hydrophone data is mono; an explicit
    rule beats silent averaging). 16-bit integers are scaled by 1/32768.
    Float samples outside [-1, 1] are clamped when ``clamp`` is set and the
    clipped fraction stays under ``MAX_CLIP_FRACTION``; otherwise the file
    is rejected with :class:`ClippingError`.
    """
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) == 0:
        raise EmptyFile(f"{path}: file has no bytes")
    if len(raw) < 12:
        raise CorruptHeader(f"{path}: shorter than a RIFF header")
    if raw[0:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise CorruptHeader(f"{path}: not a RIFF/WAVE container")

    fmt = None
    data = None
    for cid, body in _iter_chunks(raw):
        if cid == b"fmt " and fmt is None:
            fmt = _read_fmt_chunk(body)
        elif cid == b"data" and data is None:
            data = body
    if fmt is None:
        raise CorruptHeader(f"{path}: missing fmt chunk")
    if data is None:
        raise CorruptHeader(f"{path}: missing data chunk")

    fmt_tag, channels, rate, bits = fmt
    if fmt_tag == _WAVE_FORMAT_PCM and bits == 16:
        frames = np.frombuffer(data[: len(data) - len(data) % (2 * channels)], dtype="<i2")
        samples = frames.reshape(-1, channels)[:, 0].astype(np.float64) / 32768.0
    elif fmt_tag == _WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        frames = np.frombuffer(data[: len(data) - len(data) % (4 * channels)], dtype="<f4")
        samples = frames.reshape(-1, channels)[:, 0].astype(np.float64)
    else:
        raise UnsupportedFormat(
            f"{path}: format tag {fmt_tag:#06x} with {bits}-bit samples "
            "(only PCM16 and float32 are read)"
        )

    if not np.all(np.isfinite(samples)):
        raise ParseError(f"{path}: non-finite sample values in data chunk")

    n_out = int(np.sum(np.abs(samples) > 1.0))
    if n_out:
        frac = n_out / len(samples)
        if not clamp or frac > MAX_CLIP_FRACTION:
            raise ClippingError(
                f"{path}: {n_out} samples ({frac:.2%}) outside [-1, 1]"
            )
        log.warning("%s: clamped %d out-of-range samples (%.3f%%)", path, n_out, 100 * frac)
        samples = np.clip(samples, -1.0, 1.0)

    return AudioClip(
        id=clip_id if clip_id is not None else path.stem,
        samples=samples,
        sample_rate=rate,
        source_path=str(path),
    )


def segment(
    clip: AudioClip, duration_s: float = 1.0, overlap_s: float = 0.0
) -> list[Snippet]:
    """Cut a clip into fixed windows from offset 0; the trailing partial window is dropped.

    With the default overlap of 0 the snippets tile the clip exactly.
    """
    if duration_s <= 0:
        raise ValueError("duration_s must be positive")
    if not (0 <= overlap_s < duration_s):
        raise ValueError("overlap_s must satisfy 0 <= overlap_s < duration_s")
    win = clip.sample_rate * duration_s
    if abs(win - round(win)) > 1e-9:
        raise ValueError("rate * duration_s must be an integer number of samples")
    win = int(round(win))
    hop = clip.sample_rate * (duration_s - overlap_s)
    if abs(hop - round(hop)) > 1e-9 or round(hop) < 1:
        raise ValueError("rate * (duration_s - overlap_s) must be a positive integer")
    hop = int(round(hop))

    out: list[Snippet] = []
    idx = 0
    start = 0
    while start + win <= len(clip.samples):
        out.append(
            Snippet(
                clip_id=clip.id,
                index=idx,
                samples=clip.samples[start : start + win],
                rate=clip.sample_rate,
                duration_s=duration_s,
            )
        )
        idx += 1
        start += hop
    return out


def pcm16_wav_bytes(samples: np.ndarray, rate: int) -> bytes:
    """Encode mono float amplitudes as a minimal 44-byte-header PCM16 WAV."""
    pcm = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    ints = np.clip(np.round(pcm * 32768.0), -32768, 32767).astype("<i2")
    data = ints.tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(data),
        b"WAVE",
        b"fmt ",
        16,
        _WAVE_FORMAT_PCM,
        1,
        rate,
        rate * 2,
        2,
        16,
        b"data",
        len(data),
    )
    return header + data


def write_wav_pcm16(path: str | Path, samples: np.ndarray, rate: int) -> None:
    Path(path).write_bytes(pcm16_wav_bytes(samples, rate))


def write_wav_float32(path: str | Path, samples: np.ndarray, rate: int) -> None:
    """Write mono float32 WAV without clamping (used to build test fixtures)."""
    data = np.asarray(samples, dtype="<f4").tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(data),
        b"WAVE",
        b"fmt ",
        16,
        _WAVE_FORMAT_IEEE_FLOAT,
        1,
        rate,
        rate * 4,
        4,
        32,
        b"data",
        len(data),
    )
    Path(path).write_bytes(header + data)


@dataclass
class ManifestRow:
    """One snippet's bookkeeping entry: where it lives and how to refetch it."""

    clip_id: str
    index: int
    offset_s: float
    sample_count: int
    source_path: str = ""
    rate: int = 0

    @property
    def ref(self) -> tuple[str, int]:
        return (self.clip_id, self.index)


def manifest_rows(snippets: Sequence[Snippet], source_path: str = "") -> list[ManifestRow]:
    return [
        ManifestRow(
            clip_id=s.clip_id,
            index=s.index,
            offset_s=s.offset_s,
            sample_count=len(s.samples),
            source_path=source_path,
            rate=s.rate,
        )
        for s in snippets
    ]
