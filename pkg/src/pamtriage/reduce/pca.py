"""Principal component analysis via SVD of the centered data matrix."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import DimensionMismatch
from ..features import Embedding, embeddings_matrix
from .projection import ProjectionPoint, ProjectionSet


@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # [k, dim], rows orthonormal
    eigenvalues: np.ndarray  # k descending, >= 0 (sample covariance scale, n-1)
    k: int
    degenerate: bool = False  # all inputs identical: zero covariance


def pca_fit(embeddings: Sequence[Embedding] | np.ndarray, k: int = 2) -> PcaModel:
    """Top-k principal axes of the sample covariance (divide by n-1).

    Sign convention: the largest-magnitude element of each component is
    positive, so fitted axes are reproducible across runs and platforms.
    All-identical inputs yield a flagged model with zero eigenvalues
    instead of an error.
    """
    X = embeddings if isinstance(embeddings, np.ndarray) else embeddings_matrix(embeddings)
    X = np.asarray(X, dtype=np.float64)
    n, dim = X.shape
    if n < 2:
        raise ValueError("need at least 2 points")
    if not (1 <= k <= min(n - 1, dim)):
        raise ValueError(f"k must be in [1, min(n-1, dim)] = [1, {min(n - 1, dim)}]")

    mean = X.mean(axis=0)
    centered = X - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    eigenvalues = np.maximum(s**2 / (n - 1), 0.0)[:k]
    components = vt[:k].copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0

    degenerate = bool(s.size == 0 or s[0] <= 1e-12 * max(1.0, np.abs(X).max()))
    if degenerate:
        eigenvalues = np.zeros(k)
    return PcaModel(mean=mean, components=components, eigenvalues=eigenvalues, k=k,
                    degenerate=degenerate)


def pca_project(model: PcaModel, e: Embedding | np.ndarray) -> np.ndarray:
    vec = e.vector if isinstance(e, Embedding) else e
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape[-1] != model.mean.shape[0]:
        raise DimensionMismatch(
            f"vector has {vec.shape[-1]} dims, model expects {model.mean.shape[0]}"
        )
    return (vec - model.mean) @ model.components.T


def pca_projection_set(model: PcaModel, embeddings: Sequence[Embedding]) -> ProjectionSet:
    if model.k < 2:
        raise ValueError("projection set needs a model with k >= 2")
    coords = pca_project(model, embeddings_matrix(embeddings))
    points = [
        ProjectionPoint(snippet_ref=e.snippet_ref, x=float(c[0]), y=float(c[1]))
        for e, c in zip(embeddings, coords)
    ]
    return ProjectionSet(
        method="pca",
        points=points,
        fit_meta={"k": model.k, "eigenvalues": model.eigenvalues.tolist(),
                  "degenerate": model.degenerate},
    )
