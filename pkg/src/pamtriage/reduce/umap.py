"""UMAP, built from its standard stages so each is independently testable.

Pipeline: exact k-nearest-neighbor graph, per-point bandwidth calibration,
fuzzy-union symmetrization, low-dimensional curve fit, then edge-sampled
SGD layout. The layout kernel is sequential and seeded, so a fixed seed
and config reproduce the exact same coordinates bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
import scipy.optimize
import scipy.sparse
from numba import njit

from ..errors import TooFewPoints
from ..features import Embedding, embeddings_matrix
from .projection import ProjectionPoint, ProjectionSet

CALIBRATION_TOL = 1e-4
BRACKET_SPAN = 1e3  # sigma searched in [sigma0/span, sigma0*span]
GRAD_CLIP = 4.0


@dataclass(frozen=True)
class UmapConfig:
    n_neighbors: int = 10
    min_dist: float = 0.1
    n_epochs: int = 200
    negative_sample_rate: int = 5
    learning_rate: float = 1.0
    seed: int = 0
    metric: str = "euclidean"

    def __post_init__(self):
        if self.n_neighbors < 2:
            raise ValueError("n_neighbors must be >= 2")
        if self.min_dist <= 0:
            raise ValueError("min_dist must be positive")
        if self.metric != "euclidean":
            raise ValueError("only the euclidean metric is implemented")


def exact_knn(X: np.ndarray, k: int, block: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """Brute-force k nearest neighbors under Euclidean distance, self excluded.

    Rows come back sorted ascending by distance; equal distances break
    toward the lower index (stable sort over index-ordered columns), which
    keeps golden tests stable.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if not (1 <= k < n):
        raise TooFewPoints(f"need more than k={k} points, got {n}")
    sq = np.einsum("ij,ij->i", X, X)
    idx = np.empty((n, k), dtype=np.int64)
    dist = np.empty((n, k), dtype=np.float64)
    for start in range(0, n, block):
        stop = min(start + block, n)
        d2 = sq[start:stop, None] + sq[None, :] - 2.0 * (X[start:stop] @ X.T)
        np.maximum(d2, 0.0, out=d2)
        d2[np.arange(stop - start), np.arange(start, stop)] = np.inf
        order = np.argsort(d2, axis=1, kind="stable")[:, :k]
        idx[start:stop] = order
        dist[start:stop] = np.sqrt(np.take_along_axis(d2, order, axis=1))
    return idx, dist


def smooth_knn_calibration(
    dist: np.ndarray, n_iter: int = 64, tol: float = CALIBRATION_TOL
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per-point bandwidth search: find sigma_i so the neighbor weights
    sum to log2(k).

    rho_i is the distance to the nearest neighbor, so that neighbor always
    contributes weight exactly 1. Bisection runs ``n_iter`` rounds inside
    [sigma0/1e3, sigma0*1e3] where sigma0 is the mean offset distance; a
    point whose achieved sum misses the target by more than ``tol``
    (bracket exhausted, or unattainable because too many neighbors tie at
    rho) comes back flagged rather than silently wrong.

    Returns (sigma, rho, achieved_sums, flagged).
    """
    n, k = dist.shape
    target = math.log2(k)
    rho = dist[:, 0].copy()
    adj = np.maximum(dist - rho[:, None], 0.0)
    sigma0 = adj.mean(axis=1)
    degenerate = sigma0 <= 0.0
    safe0 = np.where(degenerate, 1.0, sigma0)

    lo = safe0 / BRACKET_SPAN
    hi = safe0 * BRACKET_SPAN
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        s = np.exp(-adj / mid[:, None]).sum(axis=1)
        above = s > target
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    sigma = 0.5 * (lo + hi)
    achieved = np.exp(-adj / sigma[:, None]).sum(axis=1)
    flagged = degenerate | (np.abs(achieved - target) > tol)
    return sigma, rho, achieved, flagged


def membership_strengths(
    idx: np.ndarray, dist: np.ndarray, sigma: np.ndarray, rho: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Directed edge weights exp(-max(0, d - rho_i) / sigma_i) in COO triplets."""
    n, k = idx.shape
    vals = np.exp(-np.maximum(dist - rho[:, None], 0.0) / sigma[:, None])
    rows = np.repeat(np.arange(n, dtype=np.int64), k)
    return rows, idx.ravel().copy(), vals.ravel()


def symmetrize(
    rows: np.ndarray, cols: np.ndarray, vals: np.ndarray, n: int
) -> scipy.sparse.coo_matrix:
    """Fuzzy union of the directed graph: w = a + b - a*b, symmetric, in [0, 1]."""
    P = scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    S = P + P.T - P.multiply(P.T)
    return S.tocoo()


def combine_strengths(a, b):
    """Probabilistic t-conorm used by :func:`symmetrize` (scalar form)."""
    return a + b - a * b


def fit_curve_params(min_dist: float, spread: float = 1.0) -> tuple[float, float]:
    """Least-squares (a, b) so 1/(1 + a d^(2b)) tracks the offset exponential
    exp(-max(0, d - min_dist)/spread), fitted on the grid d = 0.01..3.00.
    """
    d = np.arange(1, 301) / 100.0
    y = np.exp(-np.maximum(0.0, d - min_dist) / spread)
    (a, b), _ = scipy.optimize.curve_fit(
        lambda x, a_, b_: 1.0 / (1.0 + a_ * x ** (2.0 * b_)), d, y, p0=(1.0, 1.0),
        maxfev=10000,
    )
    return float(a), float(b)


def make_epochs_per_sample(weights: np.ndarray, n_epochs: int) -> np.ndarray:
    """Edges are sampled proportionally to weight: the heaviest edge every
    epoch, an edge of half its weight every other epoch, and so on."""
    return weights.max() / weights


@njit(cache=True)
def _xorshift(state):  # pragma: no cover
    state ^= state << np.uint64(13)
    state ^= state >> np.uint64(7)
    state ^= state << np.uint64(17)
    return state


@njit(cache=True)
def _optimize_layout(
    emb, head, tail, epochs_per_sample, n_epochs, a, b,
    negative_sample_rate, initial_alpha, rng_state,
):  # pragma: no cover
    n_vertices = emb.shape[0]
    n_edges = epochs_per_sample.shape[0]
    epoch_of_next_sample = epochs_per_sample.copy()
    epochs_per_negative = epochs_per_sample / negative_sample_rate
    epoch_of_next_negative = epochs_per_negative.copy()
    state = rng_state

    for epoch in range(n_epochs):
        alpha = initial_alpha * (1.0 - epoch / n_epochs)
        for i in range(n_edges):
            if epoch_of_next_sample[i] > epoch:
                continue
            j = head[i]
            k = tail[i]
            dx = emb[j, 0] - emb[k, 0]
            dy = emb[j, 1] - emb[k, 1]
            d2 = dx * dx + dy * dy
            if d2 > 0.0:
                coeff = (-2.0 * a * b * d2 ** (b - 1.0)) / (a * d2**b + 1.0)
                gx = min(max(coeff * dx, -GRAD_CLIP), GRAD_CLIP)
                gy = min(max(coeff * dy, -GRAD_CLIP), GRAD_CLIP)
            else:
                gx = 0.0
                gy = 0.0
            emb[j, 0] += alpha * gx
            emb[j, 1] += alpha * gy
            emb[k, 0] -= alpha * gx
            emb[k, 1] -= alpha * gy
            epoch_of_next_sample[i] += epochs_per_sample[i]

            n_neg = int((epoch - epoch_of_next_negative[i]) / epochs_per_negative[i])
            for _ in range(n_neg):
                state = _xorshift(state)
                m = np.int64(state % np.uint64(n_vertices))
                if m == j:
                    continue
                dx = emb[j, 0] - emb[m, 0]
                dy = emb[j, 1] - emb[m, 1]
                d2 = dx * dx + dy * dy
                if d2 > 0.0:
                    coeff = 2.0 * b / ((0.001 + d2) * (a * d2**b + 1.0))
                    gx = min(max(coeff * dx, -GRAD_CLIP), GRAD_CLIP)
                    gy = min(max(coeff * dy, -GRAD_CLIP), GRAD_CLIP)
                else:
                    gx = GRAD_CLIP
                    gy = GRAD_CLIP
                emb[j, 0] += alpha * gx
                emb[j, 1] += alpha * gy
            epoch_of_next_negative[i] += n_neg * epochs_per_negative[i]
    return emb


def umap_fit(
    embeddings: Sequence[Embedding] | np.ndarray, cfg: UmapConfig = UmapConfig()
) -> ProjectionSet:
    """Project embeddings to 2-D. Bit-deterministic for a fixed seed/config."""
    refs = None
    if isinstance(embeddings, np.ndarray):
        X = np.asarray(embeddings, dtype=np.float64)
    else:
        refs = [e.snippet_ref for e in embeddings]
        X = embeddings_matrix(embeddings)
    n = X.shape[0]
    if n <= cfg.n_neighbors:
        raise TooFewPoints(f"need more than n_neighbors={cfg.n_neighbors} points, got {n}")

    idx, dist = exact_knn(X, cfg.n_neighbors)
    sigma, rho, _, flagged = smooth_knn_calibration(dist)
    rows, cols, vals = membership_strengths(idx, dist, sigma, rho)
    graph = symmetrize(rows, cols, vals, n)

    # Edges too weak to be sampled even once in n_epochs are dropped,
    # then ordered canonically so runs are reproducible.
    w = graph.data
    keep = w >= w.max() / cfg.n_epochs
    head, tail, w = graph.row[keep], graph.col[keep], w[keep]
    order = np.lexsort((tail, head))
    head, tail, w = head[order], tail[order], w[order]
    epochs_per_sample = make_epochs_per_sample(w, cfg.n_epochs)

    a, b = fit_curve_params(cfg.min_dist)
    rng = np.random.default_rng(cfg.seed)
    emb = rng.uniform(-10.0, 10.0, size=(n, 2))
    rng_state = np.uint64((int(cfg.seed) * 0x9E3779B97F4A7C15 | 1) % (1 << 64))
    emb = _optimize_layout(
        emb, head.astype(np.int64), tail.astype(np.int64), epochs_per_sample,
        cfg.n_epochs, a, b, float(cfg.negative_sample_rate),
        float(cfg.learning_rate), rng_state,
    )

    if refs is None:
        refs = [("", i) for i in range(n)]
    points = [
        ProjectionPoint(snippet_ref=r, x=float(c[0]), y=float(c[1]))
        for r, c in zip(refs, emb)
    ]
    meta = asdict(cfg) | {"curve_a": a, "curve_b": b, "n_flagged": int(flagged.sum())}
    return ProjectionSet(method="umap", points=points, fit_meta=meta)
