"""ROC curves and AUC, with a brute-force pairwise cross-check."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class UndefinedAUC(ValueError):
    """Raised when the labels contain a single class."""


@dataclass(frozen=True)
class RocResult:
    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float
    n_pos: int
    n_neg: int


def _check(scores, labels) -> tuple[np.ndarray, np.ndarray, int, int]:
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel().astype(bool)
    if s.shape != y.shape:
        raise ValueError(f"{len(s)} scores but {len(y)} labels")
    if not np.isfinite(s).all():
        raise ValueError("scores must be finite")
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUC(f"AUC undefined: {n_pos} positives, {n_neg} negatives")
    return s, y, n_pos, n_neg


def roc_curve(scores, labels) -> RocResult:
    """ROC over every distinct score, predicting positive when ``score >= t``.

    The first point belongs to a ``+inf`` threshold (nothing predicted
    positive). Tied scores move the curve diagonally, which is what gives
    each tied positive/negative pair half credit under the trapezoid.
    """
    s, y, n_pos, n_neg = _check(scores, labels)
    order = np.argsort(-s, kind="mergesort")
    s_sorted = s[order]
    y_sorted = y[order]
    # last position of each run of equal scores
    run_end = np.r_[np.nonzero(np.diff(s_sorted))[0], len(s_sorted) - 1]
    tp = np.cumsum(y_sorted)[run_end]
    fp = (run_end + 1) - tp
    tpr = np.r_[0.0, tp / n_pos]
    fpr = np.r_[0.0, fp / n_neg]
    thresholds = np.r_[np.inf, s_sorted[run_end]]
    return RocResult(thresholds, fpr, tpr, trapezoid_auc(fpr, tpr), n_pos, n_neg)


def trapezoid_auc(fpr, tpr) -> float:
    fpr = np.asarray(fpr, dtype=np.float64)
    tpr = np.asarray(tpr, dtype=np.float64)
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def roc_auc(scores, labels) -> float:
    return roc_curve(scores, labels).auc


def auc_pairwise(scores, labels) -> float:
    """Mann-Whitney form: fraction of (positive, negative) pairs ranked
    correctly, ties counted as one half."""
    s, y, n_pos, n_neg = _check(scores, labels)
    pos = s[y][:, None]
    neg = s[~y][None, :]
    wins = np.count_nonzero(pos > neg)
    ties = np.count_nonzero(pos == neg)
    return (wins + 0.5 * ties) / (n_pos * n_neg)


def write_roc_csv(roc: RocResult, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("threshold,fpr,tpr\n")
        for t, f, p in zip(roc.thresholds, roc.fpr, roc.tpr):
            fh.write(f"{float(t)!r},{float(f)!r},{float(p)!r}\n")
