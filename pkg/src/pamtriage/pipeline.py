"""Workflow helpers shared by the CLI and the service's background jobs."""

from __future__ import annotations

from pathlib import Path
from typing import Callable, Iterable, Sequence

from .features import Embedding, FeatureConfig, embed_snippet
from .ingest import AudioClip, ManifestRow, load_wav, manifest_rows, segment
from .resample import resample

ProgressFn = Callable[[float], None]


def ingest_sources(
    paths: Iterable[str | Path],
    rate: int = 22050,
    duration_s: float = 1.0,
) -> tuple[list[AudioClip], list[ManifestRow]]:
    """Load, resample and segment every source; returns clips + manifest rows."""
    clips: list[AudioClip] = []
    rows: list[ManifestRow] = []
    for p in sorted(str(p) for p in paths):
        clip = resample(load_wav(p), rate)
        clips.append(clip)
        rows.extend(manifest_rows(segment(clip, duration_s), source_path=str(p)))
    return clips, rows


def embed_clips(
    clips: Sequence[AudioClip],
    duration_s: float = 1.0,
    cfg: FeatureConfig = FeatureConfig(),
    progress: ProgressFn | None = None,
) -> list[Embedding]:
    out: list[Embedding] = []
    for i, clip in enumerate(clips):
        for snip in segment(clip, duration_s):
            out.append(embed_snippet(snip, cfg))
        if progress is not None:
            progress((i + 1) / len(clips))
    return out


def embed_from_manifest(
    manifest: Sequence[ManifestRow],
    cfg: FeatureConfig = FeatureConfig(),
    progress: ProgressFn | None = None,
) -> list[Embedding]:
    """Re-derive snippets from manifest rows (via their source files) and embed them.

    Rows are grouped per clip so each source is loaded and resampled once.
    """
    by_clip: dict[str, list[ManifestRow]] = {}
    for row in manifest:
        by_clip.setdefault(row.clip_id, []).append(row)

    out: list[Embedding] = []
    for n_done, (clip_id, rows) in enumerate(sorted(by_clip.items())):
        rate = rows[0].rate
        duration_s = rows[0].sample_count / rate
        clip = resample(load_wav(rows[0].source_path, clip_id=clip_id), rate)
        snippets = {s.index: s for s in segment(clip, duration_s)}
        for row in sorted(rows, key=lambda r: r.index):
            out.append(embed_snippet(snippets[row.index], cfg))
        if progress is not None:
            progress((n_done + 1) / len(by_clip))
    return out
