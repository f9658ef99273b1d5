"""Neighborhood-based prediction of single nodes and its validation metrics."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import conditional_means, discrete_logprobs
from .data import Dataset
from .theta import Theta


@dataclass
class PredictionReport:
    node: str
    kind: str
    predictions: np.ndarray  # (n,) means or (n, L) level probabilities
    truth: np.ndarray
    metric: dict = field(default_factory=dict)
    roc_points: list = field(default_factory=list)

    def write(self, outdir, levels=None) -> dict:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        with open(outdir / f"predictions_{self.node}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if self.kind == "continuous":
                w.writerow(["sample", "truth", "prediction"])
                for i, (t, pr) in enumerate(zip(self.truth, self.predictions)):
                    w.writerow([i, repr(float(t)), repr(float(pr))])
            else:
                labels = levels or [str(k) for k in range(self.predictions.shape[1])]
                w.writerow(["sample", "truth"] + [f"p_{lv}" for lv in labels])
                for i, (t, pr) in enumerate(zip(self.truth, self.predictions)):
                    w.writerow([i, labels[int(t)]] + [repr(float(v)) for v in pr])
        if self.roc_points:
            with open(outdir / f"roc_{self.node}.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["fpr", "tpr"])
                for f, t in self.roc_points:
                    w.writerow([repr(f), repr(t)])
        summary = {"node": self.node, "kind": self.kind, "n": int(len(self.truth)), **self.metric}
        (outdir / f"metrics_{self.node}.json").write_text(json.dumps(summary, indent=1))
        return summary


def predict_node(theta: Theta, ds: Dataset, node: str) -> np.ndarray:
    """Conditional mean (continuous) or level probabilities (discrete) of
    ``node`` given every other variable in each row."""
    kind, idx = theta.schema.locate(node)
    if kind == "continuous":
        return conditional_means(theta, ds.continuous, ds.one_hot)[:, idx]
    o = theta.schema.offsets
    return np.exp(discrete_logprobs(theta, ds.continuous, ds.one_hot)[:, o[idx]:o[idx + 1]])


def pearson(pred, truth) -> float:
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.size < 3 or pred.shape != truth.shape:
        raise ValueError("need two equal-length vectors with at least 3 values")
    for v in (pred, truth):
        # rounding noise around a constant is not variance
        if np.ptp(v) <= 1e-12 * max(1.0, float(np.abs(v).max())):
            raise ValueError("zero variance")
    a, b = pred - pred.mean(), truth - truth.mean()
    va, vb = a @ a, b @ b
    return float(np.clip((a @ b) / np.sqrt(va * vb), -1.0, 1.0))


def roc_auc(scores, labels) -> tuple[float, list[tuple[float, float]]]:
    """ROC curve over distinct score thresholds and its trapezoid area.

    Tied scores move along a diagonal segment, i.e. a tie counts one half.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(int)
    if set(np.unique(labels)) - {0, 1}:
        raise ValueError("labels must be binary 0/1")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both classes must be present")
    order = np.argsort(-scores, kind="mergesort")
    s, y = scores[order], labels[order]
    last = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tp = np.cumsum(y)[last]
    fp = (last + 1) - tp
    tp = np.r_[0, tp]
    fp = np.r_[0, fp]
    # exact integer numerator: sum of trapezoids in count units
    twice_area = int(np.sum((fp[1:] - fp[:-1]) * (tp[1:] + tp[:-1])))
    auc = twice_area / (2.0 * n_pos * n_neg)
    points = [(float(f) / n_neg, float(t) / n_pos) for f, t in zip(fp, tp)]
    return auc, points


def evaluate_node(theta: Theta, ds: Dataset, node: str, case_level: int | None = None) -> PredictionReport:
    """Predict ``node`` on ``ds`` and attach Pearson r or ROC AUC.

    For a discrete node the ROC score is the probability of ``case_level``
    (default: the first non-baseline level) against all other levels.
    """
    kind, idx = theta.schema.locate(node)
    pred = predict_node(theta, ds, node)
    if kind == "continuous":
        truth = ds.continuous[:, idx]
        return PredictionReport(node, kind, pred, truth, {"correlation": pearson(pred, truth)})
    truth = ds.discrete[:, idx]
    if case_level is None:
        case_level = 1 if theta.schema.baselines[idx] == 0 else 0
    auc, pts = roc_auc(pred[:, case_level], truth == case_level)
    return PredictionReport(node, kind, pred, truth, {"auc": auc, "case_level": int(case_level)}, pts)
