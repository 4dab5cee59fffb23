"""ACC, AUC and F1 for binary predictions (deceptive is the positive class)."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class ScoredPredictions:
    video_ids: tuple[str, ...]
    y_true: np.ndarray  # 1 = deceptive
    y_pred: np.ndarray
    proba: np.ndarray

    def __post_init__(self):
        n = len(self.video_ids)
        if n == 0:
            raise MetricError("no predictions to score")
        if len(set(self.video_ids)) != n:
            raise MetricError("video_ids must be unique")
        for name in ("y_true", "y_pred", "proba"):
            arr = np.asarray(getattr(self, name))
            if arr.shape != (n,):
                raise MetricError(f"{name} has shape {arr.shape}, expected ({n},)")
            object.__setattr__(self, name, arr)
        if np.any((self.proba < 0) | (self.proba > 1)):
            raise MetricError("probabilities must lie in [0, 1]")


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricReport:
    acc: float
    auc: float | None
    f1_binary: float
    f1_weighted: float
    confusion: Confusion


def confusion(p: ScoredPredictions) -> Confusion:
    t = p.y_true.astype(bool)
    q = p.y_pred.astype(bool)
    return Confusion(
        tp=int(np.sum(t & q)), fp=int(np.sum(~t & q)), tn=int(np.sum(~t & ~q)), fn=int(np.sum(t & ~q))
    )


def accuracy(p: ScoredPredictions) -> float:
    c = confusion(p)
    return (c.tp + c.tn) / c.n


def auc(p: ScoredPredictions) -> float:
    """Probability that a deceptive row outscores a truthful one, ties counting half.

    Uses the Mann-Whitney rank-sum identity with midranks for ties.
    """
    pos = p.y_true.astype(bool)
    n_pos = int(pos.sum())
    n_neg = len(pos) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError("AUC undefined: both classes must be present")
    ranks = rankdata(p.proba, method="average")
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _f1(tp, fp, fn):
    denom = 2 * tp + fp + fn
    return 0.0 if denom == 0 else 2 * tp / denom


def f1(p: ScoredPredictions) -> tuple[float, float]:
    """(binary F1 for deceptive, support-weighted mean of per-class F1)."""
    c = confusion(p)
    f1_pos = _f1(c.tp, c.fp, c.fn)
    f1_neg = _f1(c.tn, c.fn, c.fp)
    n_pos = c.tp + c.fn
    n_neg = c.tn + c.fp
    weighted = (n_pos * f1_pos + n_neg * f1_neg) / c.n
    return f1_pos, weighted


def evaluate(p: ScoredPredictions) -> MetricReport:
    """All metrics; AUC is None when only one class is present."""
    try:
        a = auc(p)
    except MetricError:
        a = None
    fb, fw = f1(p)
    return MetricReport(accuracy(p), a, fb, fw, confusion(p))


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


REPORT_HEADER = ("model", "acc", "auc", "f1_binary", "f1_weighted")


def report_rows_csv(rows: Sequence[tuple[str, MetricReport]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_HEADER)
    for name, r in rows:
        w.writerow([name, _fmt(r.acc), _fmt(r.auc), _fmt(r.f1_binary), _fmt(r.f1_weighted)])
    return buf.getvalue()


def format_table(rows: Sequence[tuple[str, float | None, float | None, float | None]], sections=None) -> str:
    """Plain-text table with Model | ACC | AUC | F1 columns.

    `sections` optionally maps a row index to a heading printed before it.
    """
    sections = sections or {}
    width = max([len("Model")] + [len(r[0]) for r in rows])
    line = f"{'Model':<{width}} | {'ACC':>5} | {'AUC':>5} | {'F1':>5}"
    out = [line, "-" * len(line)]

    def cell(v):
        return f"{v:5.2f}" if v is not None else "    -"

    for i, (name, acc, a, f) in enumerate(rows):
        if i in sections:
            out.append(f"[{sections[i]}]")
        out.append(f"{name:<{width}} | {cell(acc)} | {cell(a)} | {cell(f)}")
    return "\n".join(out)
