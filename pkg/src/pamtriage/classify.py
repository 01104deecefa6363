"""Softmax classifier head over embeddings.

Multinomial logistic regression trained with plain mini-batch gradient
descent (the simplest bit-deterministic choice): cross-entropy plus an L2
penalty on the weights, snapshotting the epoch with the best validation
loss. Inference offers the argmax rule and a per-class threshold rule.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    ClassTooSmall,
    DimensionMismatch,
    NonFiniteLoss,
    SingleClassInput,
    UnknownClass,
)
from .features import Embedding


@dataclass
class LabeledSet:
    refs: list[tuple[str, int]]
    X: np.ndarray  # [n, dim]
    y: np.ndarray  # [n] int indices into classes
    classes: list[str]

    def __len__(self) -> int:
        return len(self.refs)

    def subset(self, idx: np.ndarray) -> "LabeledSet":
        return LabeledSet(
            refs=[self.refs[i] for i in idx],
            X=self.X[idx],
            y=self.y[idx],
            classes=self.classes,
        )


def make_labeled_set(
    embeddings: Sequence[Embedding],
    pairs: Sequence[tuple[tuple[str, int], str]],
    classes: Sequence[str] | None = None,
) -> LabeledSet:
    """Join (ref, class) pairs against embeddings; class order defaults to sorted."""
    by_ref = {e.snippet_ref: e for e in embeddings}
    if classes is None:
        classes = sorted({c for _, c in pairs})
    classes = list(classes)
    index = {c: i for i, c in enumerate(classes)}
    refs, rows, ys = [], [], []
    for ref, cname in pairs:
        ref = tuple(ref)
        if ref not in by_ref:
            raise KeyError(f"no embedding for snippet {ref}")
        refs.append(ref)
        rows.append(np.asarray(by_ref[ref].vector, dtype=np.float64))
        ys.append(index[cname])
    return LabeledSet(refs=refs, X=np.stack(rows), y=np.array(ys, dtype=np.int64),
                      classes=classes)


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float = 0.8
    val_frac: float = 0.1
    test_frac: float = 0.1
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if abs(self.train_frac + self.val_frac + self.test_frac - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")


def _largest_remainder(n: int, fracs: Sequence[float]) -> list[int]:
    quotas = [n * f for f in fracs]
    base = [int(np.floor(q)) for q in quotas]
    leftover = n - sum(base)
    order = sorted(range(len(fracs)), key=lambda i: (-(quotas[i] - base[i]), i))
    for i in order[:leftover]:
        base[i] += 1
    return base


def split(dataset: LabeledSet, spec: SplitSpec = SplitSpec()):
    """Disjoint train/val/test cover, stratified per class, deterministic per seed.

    Per-class sizes use largest-remainder rounding (1033 examples at
    80/10/10 become 827/103/103).
    """
    rng = np.random.default_rng(spec.seed)
    fracs = (spec.train_frac, spec.val_frac, spec.test_frac)
    parts: list[list[int]] = [[], [], []]
    if spec.stratified:
        for c in range(len(dataset.classes)):
            members = np.flatnonzero(dataset.y == c)
            if len(members) == 0:
                continue
            if len(members) < 3:
                raise ClassTooSmall(
                    f"class {dataset.classes[c]!r} has {len(members)} examples; need >= 3"
                )
            members = rng.permutation(members)
            n_tr, n_val, _ = _largest_remainder(len(members), fracs)
            parts[0].extend(members[:n_tr])
            parts[1].extend(members[n_tr : n_tr + n_val])
            parts[2].extend(members[n_tr + n_val :])
    else:
        perm = rng.permutation(len(dataset))
        n_tr, n_val, _ = _largest_remainder(len(perm), fracs)
        parts = [list(perm[:n_tr]), list(perm[n_tr : n_tr + n_val]),
                 list(perm[n_tr + n_val :])]
    return tuple(dataset.subset(np.sort(np.array(p, dtype=np.int64))) for p in parts)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch: int = 64
    lr: float = 0.05
    l2: float = 1e-4
    seed: int = 0


@dataclass
class ClassifierModel:
    classes: list[str]
    weights: np.ndarray  # [C, dim]
    bias: np.ndarray  # [C]
    train_meta: dict = field(default_factory=dict)


@dataclass
class Prediction:
    snippet_ref: tuple[str, int]
    probs: np.ndarray


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, stabilized by max-logit subtraction."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def loss_and_grad(
    W: np.ndarray, bias: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy + 0.5*l2*||W||^2 (bias unpenalized), with gradients."""
    n = X.shape[0]
    probs = softmax(X @ W.T + bias)
    ce = -np.mean(np.log(np.maximum(probs[np.arange(n), y], 1e-300)))
    loss = ce + 0.5 * l2 * float(np.sum(W * W))
    delta = probs
    delta[np.arange(n), y] -= 1.0
    gW = delta.T @ X / n + l2 * W
    gb = delta.mean(axis=0)
    return float(loss), gW, gb


def train(
    train_set: LabeledSet, val_set: LabeledSet, cfg: TrainConfig = TrainConfig()
) -> ClassifierModel:
    """Mini-batch gradient descent from zero-initialized parameters.

    Losses are recorded at every epoch boundary and the parameters with the
    lowest validation loss are returned. Training is single-threaded and
    seeded, so identical (data order, config, seed) reproduce the exact
    same model.
    """
    present = np.unique(train_set.y)
    if len(present) < 2:
        raise SingleClassInput("training set must contain at least 2 classes")
    n, dim = train_set.X.shape
    C = len(train_set.classes)
    W = np.zeros((C, dim))
    bias = np.zeros(C)
    rng = np.random.default_rng(cfg.seed)

    def epoch_losses() -> tuple[float, float]:
        tl, _, _ = loss_and_grad(W, bias, train_set.X, train_set.y, cfg.l2)
        vl, _, _ = loss_and_grad(W, bias, val_set.X, val_set.y, cfg.l2)
        return tl, vl

    train_losses: list[float] = []
    val_losses: list[float] = []
    best_val = np.inf
    best = (W.copy(), bias.copy(), -1)

    for epoch in range(cfg.epochs + 1):
        tl, vl = epoch_losses()
        if not (np.isfinite(tl) and np.isfinite(vl)):
            raise NonFiniteLoss(
                f"non-finite loss at epoch {epoch}: train={tl}, val={vl}; "
                f"lr={cfg.lr}, l2={cfg.l2}"
            )
        train_losses.append(tl)
        val_losses.append(vl)
        if vl < best_val:
            best_val = vl
            best = (W.copy(), bias.copy(), epoch)
        if epoch == cfg.epochs:
            break
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch):
            sel = perm[start : start + cfg.batch]
            loss, gW, gb = loss_and_grad(W, bias, train_set.X[sel], train_set.y[sel], cfg.l2)
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"non-finite batch loss at epoch {epoch}")
            W -= cfg.lr * gW
            bias -= cfg.lr * gb

    W_best, bias_best, best_epoch = best
    meta = {
        "config": {"epochs": cfg.epochs, "batch": cfg.batch, "lr": cfg.lr,
                   "l2": cfg.l2, "seed": cfg.seed},
        "train_losses": train_losses,
        "val_losses": val_losses,
        "best_epoch": best_epoch,
        "final_train_loss": train_losses[-1],
        "final_val_loss": val_losses[-1],
    }
    return ClassifierModel(classes=list(train_set.classes), weights=W_best,
                           bias=bias_best, train_meta=meta)


def predict(model: ClassifierModel, e: Embedding | np.ndarray) -> Prediction:
    vec = e.vector if isinstance(e, Embedding) else np.asarray(e, dtype=np.float64)
    if vec.shape[-1] != model.weights.shape[1]:
        raise DimensionMismatch(
            f"vector has {vec.shape[-1]} dims, model expects {model.weights.shape[1]}"
        )
    ref = e.snippet_ref if isinstance(e, Embedding) else ("", -1)
    return Prediction(snippet_ref=ref, probs=softmax(model.weights @ vec + model.bias))


def predict_batch(model: ClassifierModel, X: np.ndarray) -> np.ndarray:
    if X.shape[1] != model.weights.shape[1]:
        raise DimensionMismatch(
            f"matrix has {X.shape[1]} dims, model expects {model.weights.shape[1]}"
        )
    return softmax(X @ model.weights.T + model.bias)


def decide_argmax(p: Prediction | np.ndarray, classes: Sequence[str] | None = None,
                  model: ClassifierModel | None = None) -> str:
    """Class of maximal probability; ties break toward the earlier class."""
    if isinstance(p, Prediction):
        probs = p.probs
    else:
        probs = np.asarray(p)
    if classes is None:
        if model is None:
            raise ValueError("pass classes or model to name the decision")
        classes = model.classes
    return classes[int(np.argmax(probs))]


def decide_threshold(p: Prediction, target: str, tau: float,
                     classes: Sequence[str]) -> bool:
    """True iff the target class probability meets the threshold (>= tau)."""
    if not (0 < tau <= 1):
        raise ValueError("tau must be in (0, 1]")
    if target not in classes:
        raise UnknownClass(f"{target!r} not in {list(classes)}")
    return bool(p.probs[list(classes).index(target)] >= tau)


def save_model(model: ClassifierModel, path: str | Path) -> None:
    payload = {
        "classes": model.classes,
        "weights": model.weights.tolist(),
        "bias": model.bias.tolist(),
        "train_meta": model.train_meta,
    }
    Path(path).write_text(json.dumps(payload))


def load_model(path: str | Path) -> ClassifierModel:
    payload = json.loads(Path(path).read_text())
    return ClassifierModel(
        classes=list(payload["classes"]),
        weights=np.asarray(payload["weights"], dtype=np.float64),
        bias=np.asarray(payload["bias"], dtype=np.float64),
        train_meta=payload.get("train_meta", {}),
    )
