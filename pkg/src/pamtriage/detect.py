"""Matched-filter transient detection via zero-normalized cross-correlation.

Scores are computed at every lag with an FFT-accelerated sliding dot
product plus cumulative-sum window statistics; a direct O(n*m) reference
lives in the test suite. Window means are removed on both sides so DC
offsets in recordings cannot inflate scores.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.signal

from .errors import RateMismatch, TemplateTooLong, UnknownClip
from .ingest import AudioClip, ManifestRow

MIN_TEMPLATE_SAMPLES = 32

# Windows whose variance is below this fraction of their energy are treated
# as flat and score 0 (exact zeros survive cancellation; this guards float
# residue on constant-plus-offset stretches).
FLAT_WINDOW_REL_VAR = 1e-9


@dataclass
class Template:
    samples: np.ndarray
    rate: int
    name: str

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if len(self.samples) < MIN_TEMPLATE_SAMPLES:
            raise ValueError(f"template needs >= {MIN_TEMPLATE_SAMPLES} samples")
        if np.std(self.samples) == 0.0:
            raise ValueError("template has zero energy after mean removal")


@dataclass
class DetectionEvent:
    clip_id: str
    offset_s: float
    score: float
    template_name: str


def ncc(clip: AudioClip, tpl: Template) -> np.ndarray:
    """Normalized cross-correlation score for every lag 0..n-m.

    score(t) = sum(x~ * y~) / (||x~|| ||y~||) with the window mean removed
    from both the clip window x and the template y. Scores live in [-1, 1];
    zero-variance windows score 0.
    """
    if clip.sample_rate != tpl.rate:
        raise RateMismatch(f"clip rate {clip.sample_rate} != template rate {tpl.rate}")
    x = np.asarray(clip.samples, dtype=np.float64)
    y = tpl.samples
    n, m = len(x), len(y)
    if m > n:
        raise TemplateTooLong(f"template ({m}) longer than clip ({n})")

    # Removing the global mean leaves every score unchanged (the window
    # mean removal absorbs constants) but keeps the cumulative sums small.
    x = x - x.mean()
    yc = y - y.mean()
    ey = np.sqrt(yc @ yc)

    num = scipy.signal.fftconvolve(x, yc[::-1], mode="valid")

    cs = np.concatenate(([0.0], np.cumsum(x)))
    cs2 = np.concatenate(([0.0], np.cumsum(x * x)))
    s1 = cs[m:] - cs[:-m]
    s2 = cs2[m:] - cs2[:-m]
    var_term = s2 - s1 * s1 / m

    flat = var_term <= FLAT_WINDOW_REL_VAR * np.maximum(s2, 1e-300)
    ex = np.sqrt(np.maximum(var_term, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        scores = num / (ex * ey)
    scores[flat] = 0.0
    return np.clip(scores, -1.0, 1.0)


def pick_peaks(
    scores: np.ndarray,
    threshold: float,
    min_separation_s: float,
    rate: int,
    clip_id: str = "",
    template_name: str = "",
) -> list[DetectionEvent]:
    """Local maxima at or above threshold, kept greedily in descending score
    order while suppressing neighbors closer than min_separation.
    """
    if not (0 < threshold <= 1):
        raise ValueError("threshold must be in (0, 1]")
    s = np.asarray(scores, dtype=np.float64)
    if len(s) == 0:
        return []
    left_ok = np.ones(len(s), dtype=bool)
    right_ok = np.ones(len(s), dtype=bool)
    left_ok[1:] = s[1:] >= s[:-1]
    right_ok[:-1] = s[:-1] >= s[1:]
    candidates = np.flatnonzero(left_ok & right_ok & (s >= threshold))
    if len(candidates) == 0:
        return []

    min_sep = min_separation_s * rate
    order = candidates[np.lexsort((candidates, -s[candidates]))]
    kept: list[int] = []
    for lag in order:
        if all(abs(lag - k) >= min_sep for k in kept):
            kept.append(int(lag))
    kept.sort()
    return [
        DetectionEvent(
            clip_id=clip_id,
            offset_s=lag / rate,
            score=float(s[lag]),
            template_name=template_name,
        )
        for lag in kept
    ]


def detect_events(
    clip: AudioClip, tpl: Template, threshold: float, min_separation_s: float
) -> list[DetectionEvent]:
    return pick_peaks(
        ncc(clip, tpl),
        threshold=threshold,
        min_separation_s=min_separation_s,
        rate=clip.sample_rate,
        clip_id=clip.id,
        template_name=tpl.name,
    )


def propose_labels(
    events: Sequence[DetectionEvent],
    class_name: str,
    manifest: Sequence[ManifestRow],
    duration_s: float = 1.0,
):
    """Turn events into proposed labels on the snippet containing each offset.

    Events in a clip's dropped tail (no snippet covers them) are skipped.
    Raises UnknownClip when an event references a clip absent from the
    manifest entirely.
    """
    from .store import LabelRecord  # lazy: store also feeds widgets that import detect

    known = {row.ref for row in manifest}
    clips = {row.clip_id for row in manifest}
    out = []
    for ev in events:
        if ev.clip_id not in clips:
            raise UnknownClip(f"event references unknown clip {ev.clip_id!r}")
        index = int(ev.offset_s // duration_s)
        if (ev.clip_id, index) not in known:
            continue
        out.append(
            LabelRecord(
                clip_id=ev.clip_id,
                snippet_index=index,
                class_name=class_name,
                state="proposed",
                provenance="matched-filter",
                annotator="matched-filter",
            )
        )
    return out
