"""Snippet features: log-mel spectrograms and 1,280-d embedding vectors.

The embedding provider is a deterministic spectral summary: 20 fixed
statistics per mel band, 64 bands, so every downstream stage (projection,
triage thresholds, classifier) runs end to end without a neural model.
Externally computed embeddings can be imported through the ``ACTEMB01``
exchange format and flow through the same pipeline.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    BandCountMismatch,
    DimensionMismatch,
    DuplicateSnippetRef,
    ParseError,
    RateMismatch,
)
from .ingest import Snippet

EMBED_DIM = 1280
STATS_PER_BAND = 20

STAT_NAMES = (
    "mean", "std", "min", "max", "median",
    "q10", "q25", "q75", "q90", "range",
    "first", "last", "mean_abs_delta", "std_delta", "max_abs_delta",
    "lag1_autocorr", "energy_fraction", "flux_contribution",
    "above_mean_fraction", "trend_slope",
)


@dataclass(frozen=True)
class FeatureConfig:
    sample_rate: int = 22050
    n_fft: int = 1024
    hop: int = 512
    n_mels: int = 64
    fmin: float = 0.0
    fmax: float = 11025.0
    log_floor: float = 1e-10

    def __post_init__(self):
        if self.n_fft < self.hop:
            raise ValueError("n_fft must be >= hop")
        if self.fmax > self.sample_rate / 2:
            raise ValueError("fmax must not exceed Nyquist")

    @property
    def config_hash(self) -> str:
        # Window/scale choices are part of the identity so caches never mix.
        blob = json.dumps(
            {
                "sample_rate": self.sample_rate,
                "n_fft": self.n_fft,
                "hop": self.hop,
                "n_mels": self.n_mels,
                "fmin": self.fmin,
                "fmax": self.fmax,
                "log_floor": self.log_floor,
                "window": "hann-symmetric",
                "mel": "htk",
            },
            sort_keys=True,
        )
        return hashlib.sha1(blob.encode()).hexdigest()[:16]


@dataclass
class MelSpectrogram:
    values: np.ndarray  # [n_mels, n_frames], natural-log power, floored
    n_mels: int
    n_frames: int
    config_hash: str


@dataclass
class Embedding:
    snippet_ref: tuple[str, int]
    vector: np.ndarray
    provider: str = "reference"  # "reference" | "imported"


def hz_to_mel(f):
    """HTK mel scale."""
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(cfg: FeatureConfig) -> np.ndarray:
    """Triangular HTK-mel filterbank, peak 1, shape [n_mels, n_fft//2 + 1]."""
    n_bins = cfg.n_fft // 2 + 1
    freqs = np.arange(n_bins) * cfg.sample_rate / cfg.n_fft
    edges = mel_to_hz(np.linspace(hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax), cfg.n_mels + 2))
    fb = np.zeros((cfg.n_mels, n_bins))
    for b in range(cfg.n_mels):
        left, center, right = edges[b], edges[b + 1], edges[b + 2]
        up = (freqs - left) / max(center - left, 1e-12)
        down = (right - freqs) / max(right - center, 1e-12)
        fb[b] = np.maximum(0.0, np.minimum(up, down))
    return fb


def band_index_for_freq(cfg: FeatureConfig, freq_hz: float) -> int:
    """Mel band whose triangle peaks closest to a frequency (test oracle hook)."""
    edges = mel_to_hz(np.linspace(hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax), cfg.n_mels + 2))
    centers = edges[1:-1]
    return int(np.argmin(np.abs(centers - freq_hz)))


def frame_count(n_samples: int, cfg: FeatureConfig) -> int:
    if n_samples < cfg.n_fft:
        return 0
    return (n_samples - cfg.n_fft) // cfg.hop + 1


def mel_spectrogram(snippet: Snippet, cfg: FeatureConfig = FeatureConfig()) -> MelSpectrogram:
    """Log-power mel spectrogram: symmetric Hann window, magnitude-squared
    spectrum, triangular HTK filterbank, natural log floored at ``log_floor``.

    Frames start at multiples of ``hop`` with no centering pad, so
    n_frames = floor((n - n_fft)/hop) + 1.
    """
    if snippet.rate != cfg.sample_rate:
        raise RateMismatch(
            f"snippet rate {snippet.rate} != configured rate {cfg.sample_rate}"
        )
    x = np.asarray(snippet.samples, dtype=np.float64)
    n_frames = frame_count(len(x), cfg)
    window = np.hanning(cfg.n_fft)
    frames = np.lib.stride_tricks.sliding_window_view(x, cfg.n_fft)[:: cfg.hop][:n_frames]
    power = np.abs(np.fft.rfft(frames * window, axis=1)) ** 2
    mel_power = power @ mel_filterbank(cfg).T
    values = np.log(np.maximum(mel_power, cfg.log_floor)).T
    return MelSpectrogram(
        values=values, n_mels=cfg.n_mels, n_frames=n_frames, config_hash=cfg.config_hash
    )


def _band_stats(v: np.ndarray) -> np.ndarray:
    """The 18 per-band statistics that need no cross-band context."""
    out = np.empty(STATS_PER_BAND)
    n = len(v)
    out[0] = v.mean()
    out[1] = v.std()
    out[2] = v.min()
    out[3] = v.max()
    out[4] = np.median(v)
    out[5:9] = np.quantile(v, (0.10, 0.25, 0.75, 0.90))
    out[9] = out[3] - out[2]
    out[10] = v[0]
    out[11] = v[-1]
    if n >= 2:
        d = np.diff(v)
        out[12] = np.abs(d).mean()
        out[13] = d.std()
        out[14] = np.abs(d).max()
        a = v[:-1] - v[:-1].mean()
        b = v[1:] - v[1:].mean()
        denom = np.sqrt((a @ a) * (b @ b))
        out[15] = (a @ b) / denom if denom > 1e-30 else 0.0
    else:
        out[12:16] = 0.0
    out[16] = 0.0  # energy fraction, filled by caller
    out[17] = 0.0  # flux contribution, filled by caller
    out[18] = np.mean(v > out[0])
    if n >= 2:
        t = np.arange(n) - (n - 1) / 2.0
        out[19] = (t @ (v - out[0])) / (t @ t)
    else:
        out[19] = 0.0
    return out


def embed_reference(mel: MelSpectrogram) -> np.ndarray:
    """Deterministic 1,280-d summary: 64 bands x 20 statistics, band-major.

    Per band (order pinned, see STAT_NAMES): mean, std, min, max, median,
    q10, q25, q75, q90, range, first frame, last frame, mean |delta|,
    std of delta, max |delta|, lag-1 autocorrelation, linear-power energy
    fraction, squared-flux contribution, fraction of frames above the band
    mean, least-squares trend slope.
    """
    if mel.n_mels != EMBED_DIM // STATS_PER_BAND:
        raise BandCountMismatch(
            f"expected {EMBED_DIM // STATS_PER_BAND} mel bands, got {mel.n_mels}"
        )
    if mel.n_frames == 0:
        raise ValueError("mel spectrogram has no frames; snippet shorter than n_fft")
    v = mel.values
    vec = np.concatenate([_band_stats(v[b]) for b in range(mel.n_mels)])

    band_energy = np.exp(v).sum(axis=1)
    vec[16::STATS_PER_BAND] = band_energy / band_energy.sum()
    if v.shape[1] >= 2:
        flux = (np.diff(v, axis=1) ** 2).sum(axis=1)
        total = flux.sum()
        vec[17::STATS_PER_BAND] = flux / total if total > 0 else 0.0
    return vec


def embed_snippet(snippet: Snippet, cfg: FeatureConfig = FeatureConfig()) -> Embedding:
    vec = embed_reference(mel_spectrogram(snippet, cfg))
    return Embedding(snippet_ref=snippet.ref, vector=vec, provider="reference")


# --- embedding exchange format ---------------------------------------------
#
# Binary layout: 8-byte magic "ACTEMB01", little-endian u32 count, u32 dim,
# then per row: u32 clip_id_len, clip_id bytes (utf-8), u32 index,
# dim x float32.

MAGIC = b"ACTEMB01"


def write_embeddings(path: str | Path, embeddings: Sequence[Embedding]) -> None:
    dim = len(embeddings[0].vector) if embeddings else EMBED_DIM
    parts = [MAGIC, struct.pack("<II", len(embeddings), dim)]
    for e in embeddings:
        cid = e.snippet_ref[0].encode("utf-8")
        parts.append(struct.pack("<I", len(cid)))
        parts.append(cid)
        parts.append(struct.pack("<I", e.snippet_ref[1]))
        parts.append(np.asarray(e.vector, dtype="<f4").tobytes())
    tmp = Path(str(path) + ".tmp")
    tmp.write_bytes(b"".join(parts))
    tmp.replace(path)  # atomic publish: write-temp-then-rename


def import_embeddings(path: str | Path, expected_dim: int | None = EMBED_DIM) -> list[Embedding]:
    """Read an exchange file; rows keep their order and become provider "imported".

    Pass ``expected_dim=None`` to accept any dimensionality (the CLI --dim
    override); otherwise rows must carry exactly ``expected_dim`` values.
    """
    buf = Path(path).read_bytes()
    if len(buf) < 16 or buf[:8] != MAGIC:
        raise ParseError(f"{path}: missing {MAGIC.decode()} magic")
    count, dim = struct.unpack_from("<II", buf, 8)
    if expected_dim is not None and dim != expected_dim:
        raise DimensionMismatch(f"{path}: rows carry {dim} values, expected {expected_dim}")
    out: list[Embedding] = []
    seen: set[tuple[str, int]] = set()
    pos = 16
    for _ in range(count):
        if pos + 4 > len(buf):
            raise ParseError(f"{path}: truncated row header")
        (id_len,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        if pos + id_len + 4 + 4 * dim > len(buf):
            raise ParseError(f"{path}: truncated row payload")
        clip_id = buf[pos : pos + id_len].decode("utf-8")
        pos += id_len
        (index,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        vec = np.frombuffer(buf, dtype="<f4", count=dim, offset=pos).astype(np.float64)
        pos += 4 * dim
        ref = (clip_id, index)
        if ref in seen:
            raise DuplicateSnippetRef(f"{path}: duplicate row for {ref}")
        seen.add(ref)
        out.append(Embedding(snippet_ref=ref, vector=vec, provider="imported"))
    return out


def embeddings_matrix(embeddings: Sequence[Embedding]) -> np.ndarray:
    """Stack vectors into an [n, dim] float64 matrix, order preserved."""
    return np.stack([np.asarray(e.vector, dtype=np.float64) for e in embeddings])
