"""Snippet manifests and the append-only label log.

Labels are events in a JSONL log; current state is the last record per
(snippet, class). Replaying the log always reconstructs the in-memory
state, which makes the store diff-able, crash-tolerant (a torn final line
is ignored) and trivially portable. Writes go through a single owner.
"""

from __future__ import annotations

import datetime as _dt
import json
import threading
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import IllegalTransition, NoClassSurvives, UnknownSnippet
from .ingest import ManifestRow

STATES = ("proposed", "accepted", "rejected")

# accept/reject are reviews of an existing candidate; proposing is always
# allowed (re-proposing a rejected label restarts its review).
_ALLOWED_PRIOR = {
    "proposed": (None, "proposed", "accepted", "rejected"),
    "accepted": ("proposed", "accepted"),
    "rejected": ("proposed", "accepted"),
}


@dataclass
class LabelRecord:
    clip_id: str
    snippet_index: int
    class_name: str
    state: str
    provenance: str  # matched-filter | human | import
    annotator: str = ""
    timestamp: str = ""

    def __post_init__(self):
        if self.state not in STATES:
            raise ValueError(f"state must be one of {STATES}")
        if not self.class_name or any(ch.isspace() for ch in self.class_name):
            raise ValueError("class must be a non-empty token without whitespace")
        if not self.timestamp:
            self.timestamp = _dt.datetime.now(_dt.timezone.utc).isoformat()

    @property
    def ref(self) -> tuple[str, int]:
        return (self.clip_id, self.snippet_index)

    def to_json(self) -> str:
        d = asdict(self)
        d["class"] = d.pop("class_name")
        return json.dumps(d)

    @classmethod
    def from_json(cls, line: str) -> "LabelRecord":
        d = json.loads(line)
        d["class_name"] = d.pop("class")
        return cls(**d)


def write_manifest(path: str | Path, rows: Sequence[ManifestRow]) -> None:
    with Path(path).open("w") as fh:
        for r in rows:
            fh.write(json.dumps(asdict(r)) + "\n")


def read_manifest(path: str | Path) -> list[ManifestRow]:
    rows = []
    seen = set()
    with Path(path).open() as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            row = ManifestRow(**d)
            if row.ref in seen:
                raise ValueError(f"duplicate manifest entry {row.ref}")
            seen.add(row.ref)
            rows.append(row)
    return rows


class LabelStore:
    """Review-state bookkeeping over an append-only JSONL log.

    Single-writer: every mutation funnels through :meth:`upsert_label`
    under a lock. Readers get snapshots (plain dicts/lists), never live
    internal state.
    """

    def __init__(self, manifest: Sequence[ManifestRow], log_path: str | Path | None = None):
        self._known = {row.ref for row in manifest}
        self._log_path = Path(log_path) if log_path is not None else None
        self._state: dict[tuple[str, int, str], LabelRecord] = {}
        self._lock = threading.Lock()
        if self._log_path is not None and self._log_path.exists():
            for line in self._log_path.read_text().splitlines():
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = LabelRecord.from_json(line)
                except (json.JSONDecodeError, KeyError):
                    continue  # torn tail write; everything before it is intact
                self._state[(rec.clip_id, rec.snippet_index, rec.class_name)] = rec

    def __len__(self) -> int:
        return len(self._state)

    def current(self, ref: tuple[str, int], class_name: str) -> Optional[LabelRecord]:
        return self._state.get((ref[0], ref[1], class_name))

    def upsert_label(self, rec: LabelRecord) -> LabelRecord:
        """Validate the transition, append to the log, update state."""
        with self._lock:
            if rec.ref not in self._known:
                raise UnknownSnippet(f"snippet {rec.ref} not in manifest")
            prior = self._state.get((rec.clip_id, rec.snippet_index, rec.class_name))
            prior_state = prior.state if prior is not None else None
            if prior_state not in _ALLOWED_PRIOR[rec.state]:
                raise IllegalTransition(
                    f"cannot mark {rec.ref}/{rec.class_name} {rec.state!r} "
                    f"from {prior_state!r}"
                )
            if self._log_path is not None:
                with self._log_path.open("a") as fh:
                    fh.write(rec.to_json() + "\n")
                    fh.flush()
            self._state[(rec.clip_id, rec.snippet_index, rec.class_name)] = rec
            return rec

    def accepted_labels(self) -> dict[tuple[str, int], str]:
        """Snapshot of accepted (snippet -> class). At most one accepted class
        per snippet is expected in triage practice; the latest accept wins."""
        out: dict[tuple[str, int], str] = {}
        for (cid, idx, cname), rec in self._state.items():
            if rec.state == "accepted":
                out[(cid, idx)] = cname
        return out

    def records(self, state: str | None = None) -> list[LabelRecord]:
        recs = list(self._state.values())
        if state is not None:
            recs = [r for r in recs if r.state == state]
        return sorted(recs, key=lambda r: (r.clip_id, r.snippet_index, r.class_name))

    def class_inventory(self) -> dict[str, int]:
        """Accepted-label counts per class."""
        counts: dict[str, int] = {}
        for rec in self._state.values():
            if rec.state == "accepted":
                counts[rec.class_name] = counts.get(rec.class_name, 0) + 1
        return counts

    def known_refs(self) -> set[tuple[str, int]]:
        return set(self._known)


def export_training_set(
    store: LabelStore,
    classes: Sequence[str],
    min_count: int,
    background_class: str = "background",
    background_ratio: float = 10.0,
    seed: int = 0,
) -> tuple[list[tuple[tuple[str, int], str]], dict[str, int]]:
    """Assemble (snippet_ref, class) pairs for training.

    Requested classes survive only with at least ``min_count`` accepted
    labels; snippets whose accepted class was filtered out are discarded
    entirely. Unlabeled snippets are sampled into ``background_class`` at
    ``background_ratio`` times the largest surviving class, capped at what
    the corpus has. Deterministic per (store state, seed).
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    inventory = store.class_inventory()
    kept = [c for c in classes if inventory.get(c, 0) >= min_count]
    if not kept:
        raise NoClassSurvives(
            f"no class in {list(classes)} reaches min_count={min_count} "
            f"(inventory: {inventory})"
        )

    accepted = store.accepted_labels()
    pairs: list[tuple[tuple[str, int], str]] = [
        (ref, cname) for ref, cname in sorted(accepted.items()) if cname in kept
    ]

    labeled_refs = set(accepted.keys())
    unlabeled = sorted(store.known_refs() - labeled_refs)
    largest = max(sum(1 for _, c in pairs if c == k) for k in kept)
    n_background = min(int(np.floor(background_ratio * largest + 0.5)), len(unlabeled))
    rng = np.random.default_rng(seed)
    chosen = sorted(rng.choice(len(unlabeled), size=n_background, replace=False))
    pairs.extend((unlabeled[i], background_class) for i in chosen)

    counts: dict[str, int] = {}
    for _, cname in pairs:
        counts[cname] = counts.get(cname, 0) + 1
    return pairs, counts
