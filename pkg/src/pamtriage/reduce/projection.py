"""Projection sets and the selection operations built on them."""

from __future__ import annotations

import json
import operator
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


@dataclass
class ProjectionPoint:
    snippet_ref: tuple[str, int]
    x: float
    y: float


@dataclass
class ProjectionSet:
    method: str  # "pca" | "umap"
    points: list[ProjectionPoint]
    fit_meta: dict = field(default_factory=dict)

    def coords(self) -> np.ndarray:
        return np.array([[p.x, p.y] for p in self.points])


_OPS = {">": operator.gt, "<": operator.lt, ">=": operator.ge, "<=": operator.le}


def filter_by_component(
    proj: ProjectionSet, component: int, op: str, threshold: float
) -> list[tuple[str, int]]:
    """Refs whose coordinate on component 1 (x) or 2 (y) satisfies the predicate.

    Input order is preserved. Thresholds are runtime parameters: the useful
    cut depends entirely on the embedding scale of the corpus at hand.
    """
    if component not in (1, 2):
        raise ValueError("component must be 1 or 2")
    if op not in _OPS:
        raise ValueError(f"op must be one of {sorted(_OPS)}")
    pred = _OPS[op]
    pick = (lambda p: p.x) if component == 1 else (lambda p: p.y)
    return [p.snippet_ref for p in proj.points if pred(pick(p), threshold)]


def sample_subset(refs: Sequence, fraction: float, seed: int) -> list:
    """Uniform sample without replacement, size round(n * fraction), input order kept."""
    if not (0 < fraction <= 1):
        raise ValueError("fraction must be in (0, 1]")
    n = len(refs)
    size = int(np.floor(n * fraction + 0.5))
    if size >= n:
        return list(refs)
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(n, size=size, replace=False))
    return [refs[i] for i in idx]


def write_projection(path: str | Path, proj: ProjectionSet) -> None:
    """JSONL: a meta line, then one {clip_id, index, x, y, method} row per point."""
    with Path(path).open("w") as fh:
        fh.write(json.dumps({"meta": {"method": proj.method, **proj.fit_meta}}) + "\n")
        for p in proj.points:
            fh.write(
                json.dumps(
                    {
                        "clip_id": p.snippet_ref[0],
                        "index": p.snippet_ref[1],
                        "x": p.x,
                        "y": p.y,
                        "method": proj.method,
                    }
                )
                + "\n"
            )


def read_projection(path: str | Path) -> ProjectionSet:
    points: list[ProjectionPoint] = []
    meta: dict = {}
    method = ""
    with Path(path).open() as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            if "meta" in d:
                meta = d["meta"]
                method = meta.get("method", method)
                continue
            method = d.get("method", method)
            points.append(
                ProjectionPoint(snippet_ref=(d["clip_id"], d["index"]), x=d["x"], y=d["y"])
            )
    return ProjectionSet(method=method, points=points, fit_meta=meta)


def farthest_point_indices(coords: np.ndarray, cap: int) -> np.ndarray:
    """Greedy farthest-point subset of size ``cap`` (payload decimation)."""
    n = len(coords)
    if cap >= n:
        return np.arange(n)
    keep = np.empty(cap, dtype=np.int64)
    keep[0] = 0
    d = np.linalg.norm(coords - coords[0], axis=1)
    for i in range(1, cap):
        keep[i] = int(np.argmax(d))
        d = np.minimum(d, np.linalg.norm(coords - coords[keep[i]], axis=1))
    return np.sort(keep)
