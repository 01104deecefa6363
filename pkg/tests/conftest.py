import numpy as np
import pytest

from pamtriage.ingest import AudioClip, Snippet


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_tone(freq_hz: float, rate: int, seconds: float = 1.0, amp: float = 0.5) -> np.ndarray:
    t = np.arange(int(rate * seconds)) / rate
    return amp * np.sin(2 * np.pi * freq_hz * t)


def make_clip(samples: np.ndarray, rate: int, clip_id: str = "clip") -> AudioClip:
    return AudioClip(id=clip_id, samples=np.asarray(samples, dtype=np.float64), sample_rate=rate)


def make_snippet(samples: np.ndarray, rate: int, index: int = 0, clip_id: str = "clip") -> Snippet:
    return Snippet(clip_id=clip_id, index=index, samples=np.asarray(samples, dtype=np.float64),
                   rate=rate, duration_s=len(samples) / rate)


def kmeans_labels(X: np.ndarray, k: int, seed: int = 0, n_init: int = 10,
                  iters: int = 100) -> np.ndarray:
    """Plain Lloyd k-means with random restarts; returns cluster assignments."""
    rng = np.random.default_rng(seed)
    best_inertia, best_labels = np.inf, None
    for _ in range(n_init):
        centers = X[rng.choice(len(X), k, replace=False)]
        labels = np.zeros(len(X), dtype=int)
        for _ in range(iters):
            d = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(-1)
            labels = d.argmin(1)
            new = np.array([
                X[labels == j].mean(0) if np.any(labels == j) else centers[j]
                for j in range(k)
            ])
            if np.allclose(new, centers):
                break
            centers = new
        inertia = d.min(1).sum()
        if inertia < best_inertia:
            best_inertia, best_labels = inertia, labels.copy()
    return best_labels


def cluster_purity(assigned: np.ndarray, truth: np.ndarray) -> float:
    """Fraction of points whose cluster's majority true class matches them."""
    correct = 0
    for j in np.unique(assigned):
        members = truth[assigned == j]
        _, counts = np.unique(members, return_counts=True)
        correct += counts.max()
    return correct / len(truth)


def three_gaussians_50d(seed: int = 0, n_per: int = 100, sep: float = 15.0,
                        sigma: float = 0.1):
    """Three isotropic Gaussian clusters in 50-D with centers >= `sep` apart."""
    rng = np.random.default_rng(seed)
    centers = np.zeros((3, 50))
    centers[1, 0] = sep
    centers[2, 1] = sep
    X = np.vstack([c + sigma * rng.standard_normal((n_per, 50)) for c in centers])
    truth = np.repeat(np.arange(3), n_per)
    return X, truth
