"""One-vs-rest confusion counting, precision/recall/F1, threshold sweeps.

Degenerate denominators are pinned: a metric whose denominator is zero is
0, and F1 is 0 whenever P + R is 0. Snippet-level evaluation only; events
spanning chunk boundaries are out of scope.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import EmptyGrid, RefMismatch


@dataclass
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass
class SweepRow:
    tau: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int


@dataclass
class SweepCurve:
    rows: list[SweepRow]
    best_tau: float
    best_f1: float


def confusion(
    preds: Mapping[tuple[str, int], str],
    truth: Mapping[tuple[str, int], str],
    target: str,
) -> ConfusionCounts:
    """One-vs-rest counts for ``target`` over an identical snippet set."""
    if set(preds.keys()) != set(truth.keys()):
        only_p = len(set(preds) - set(truth))
        only_t = len(set(truth) - set(preds))
        raise RefMismatch(
            f"predictions and truth cover different snippets "
            f"({only_p} only in preds, {only_t} only in truth)"
        )
    tp = fp = fn = tn = 0
    for ref, predicted in preds.items():
        is_pos = truth[ref] == target
        said_pos = predicted == target
        if said_pos and is_pos:
            tp += 1
        elif said_pos:
            fp += 1
        elif is_pos:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn)


def prf(c: ConfusionCounts) -> tuple[float, float, float]:
    """Precision, recall, and their harmonic mean F1.

    F1 = 2PR/(P+R) is evaluated as 2tp/(2tp + fp + fn) — the same quantity
    under the zero conventions, but exact on integer counts. Any zero
    denominator pins its metric to 0.
    """
    precision = c.tp / (c.tp + c.fp) if (c.tp + c.fp) > 0 else 0.0
    recall = c.tp / (c.tp + c.fn) if (c.tp + c.fn) > 0 else 0.0
    denom = 2 * c.tp + c.fp + c.fn
    f1 = 2 * c.tp / denom if denom > 0 else 0.0
    return precision, recall, f1


def sweep(
    target_probs: Mapping[tuple[str, int], float],
    truth: Mapping[tuple[str, int], str],
    target: str,
    taus: Sequence[float],
) -> SweepCurve:
    """Threshold sweep: decide p >= tau per snippet, count, score.

    ``taus`` must be strictly increasing within (0, 1]. best_tau is the F1
    argmax; exact ties go to the largest tau.
    """
    taus = list(taus)
    if len(taus) == 0:
        raise EmptyGrid("sweep needs at least one threshold")
    arr = np.asarray(taus, dtype=np.float64)
    if np.any(arr <= 0) or np.any(arr > 1) or np.any(np.diff(arr) <= 0):
        raise ValueError("taus must be strictly increasing within (0, 1]")
    if set(target_probs.keys()) != set(truth.keys()):
        raise RefMismatch("probabilities and truth cover different snippets")

    refs = list(target_probs.keys())
    p = np.array([target_probs[r] for r in refs])
    is_pos = np.array([truth[r] == target for r in refs])
    n_pos = int(is_pos.sum())

    rows: list[SweepRow] = []
    best_tau = taus[0]
    best_f1 = -1.0
    for tau in taus:
        said = p >= tau
        tp = int(np.sum(said & is_pos))
        fp = int(np.sum(said & ~is_pos))
        fn = n_pos - tp
        tn = len(refs) - tp - fp - fn
        precision, recall, f1 = prf(ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn))
        rows.append(SweepRow(tau=float(tau), precision=precision, recall=recall,
                             f1=f1, tp=tp, fp=fp, fn=fn))
        if f1 >= best_f1:
            best_f1 = f1
            best_tau = float(tau)
    return SweepCurve(rows=rows, best_tau=best_tau, best_f1=best_f1)


def default_tau_grid() -> list[float]:
    """0.01 .. 1.00 step 0.01; contains the 1/3-adjacent landmarks used in triage."""
    return [round(i / 100.0, 2) for i in range(1, 101)]


def report(curve: SweepCurve, out_dir: str | Path) -> dict[str, Path]:
    """Write sweep.csv, summary.json and plot_data.json under ``out_dir``."""
    if not curve.rows:
        raise ValueError("cannot report an empty curve")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    csv_path = out / "sweep.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tau", "precision", "recall", "f1", "tp", "fp", "fn"])
        for r in curve.rows:
            writer.writerow([r.tau, r.precision, r.recall, r.f1, r.tp, r.fp, r.fn])

    summary_path = out / "summary.json"
    summary_path.write_text(
        json.dumps({"best_tau": curve.best_tau, "best_f1": curve.best_f1}, indent=2)
    )

    plot_path = out / "plot_data.json"
    plot_path.write_text(
        json.dumps(
            {
                "tau": [r.tau for r in curve.rows],
                "precision": [r.precision for r in curve.rows],
                "recall": [r.recall for r in curve.rows],
                "f1": [r.f1 for r in curve.rows],
            }
        )
    )
    return {"csv": csv_path, "summary": summary_path, "plot_data": plot_path}


def read_truth_jsonl(path: str | Path) -> dict[tuple[str, int], str]:
    """Rows of {clip_id, index, class} keyed by snippet ref."""
    out: dict[tuple[str, int], str] = {}
    with Path(path).open() as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            out[(d["clip_id"], int(d["index"]))] = d["class"]
    return out


def write_truth_jsonl(path: str | Path, truth: Mapping[tuple[str, int], str]) -> None:
    with Path(path).open("w") as fh:
        for (clip_id, index), cname in truth.items():
            fh.write(json.dumps({"clip_id": clip_id, "index": index, "class": cname}) + "\n")


def read_sweep_csv(path: str | Path) -> list[SweepRow]:
    rows = []
    with Path(path).open() as fh:
        for rec in csv.DictReader(fh):
            rows.append(
                SweepRow(
                    tau=float(rec["tau"]),
                    precision=float(rec["precision"]),
                    recall=float(rec["recall"]),
                    f1=float(rec["f1"]),
                    tp=int(rec["tp"]),
                    fp=int(rec["fp"]),
                    fn=int(rec["fn"]),
                )
            )
    return rows
