"""Saliency evaluation: MAE, max F-beta over 256 thresholds, PR curves."""

import csv
from dataclasses import dataclass

import numpy as np

from .tensor import ShapeError, Tensor

BETA_SQ = 0.3
NUM_THRESHOLDS = 256


@dataclass
class PrCurve:
    thresholds: np.ndarray
    precision: np.ndarray
    recall: np.ndarray

    def f_scores(self, beta_sq=BETA_SQ):
        p, r = self.precision, self.recall
        den = beta_sq * p + r
        return np.where(den > 0, (1 + beta_sq) * p * r / np.where(den > 0, den, 1.0), 0.0)


@dataclass
class FResult:
    max_f: float  # NaN when the ground truth has no foreground
    curve: PrCurve
    valid: bool


def _arrays(S, G):
    S = np.asarray(S.data if isinstance(S, Tensor) else S, dtype=float)
    G = np.asarray(G.data if isinstance(G, Tensor) else G, dtype=float)
    if S.shape != G.shape:
        raise ShapeError(f"saliency {S.shape} and ground truth {G.shape} differ")
    return S, G


def thresholds(n=NUM_THRESHOLDS):
    return np.arange(n) / n


def mae(S, G):
    S, G = _arrays(S, G)
    return float(np.abs(S - G).mean())


def pr_curve(S, G, n=NUM_THRESHOLDS):
    """Precision and recall of ``S >= t`` for every grid threshold.

    A histogram over threshold bins gives all counts in one pass. An empty
    prediction has precision 1.
    """
    S, G = _arrays(S, G)
    fg = G > 0.5
    t = thresholds(n)
    # pixel with value s is predicted positive for thresholds t <= s
    bins = np.clip(np.floor(S * n).astype(int), -1, n - 1)
    pos = np.bincount(bins[fg] + 1, minlength=n + 1)[1:]
    neg = np.bincount(bins[~fg] + 1, minlength=n + 1)[1:]
    tp = np.cumsum(pos[::-1])[::-1].astype(float)
    fp = np.cumsum(neg[::-1])[::-1].astype(float)
    total = float(fg.sum())
    precision = np.where(tp + fp > 0, tp / np.maximum(tp + fp, 1), 1.0)
    recall = tp / total if total > 0 else np.zeros(n)
    return PrCurve(t, precision, recall)


def f_beta(S, G, beta_sq=BETA_SQ):
    """Max F-beta over the threshold grid. All-background ground truth
    makes recall undefined; the result is then NaN with ``valid=False``."""
    curve = pr_curve(S, G)
    if not (_arrays(S, G)[1] > 0.5).any():
        return FResult(float("nan"), curve, False)
    return FResult(float(curve.f_scores(beta_sq).max()), curve, True)


def evaluate(pairs):
    """Per-image rows and a dataset-mean PR curve from (id, S, G) triples."""
    rows, curves = [], []
    for ident, S, G in pairs:
        res = f_beta(S, G)
        rows.append({"id": ident, "mae": mae(S, G), "maxF": res.max_f, "valid": res.valid})
        if res.valid:
            curves.append(res.curve)
    if curves:
        mean_curve = PrCurve(thresholds(), np.mean([c.precision for c in curves], axis=0),
                             np.mean([c.recall for c in curves], axis=0))
    else:
        mean_curve = None
    return rows, mean_curve


def summary(rows):
    valid = [r["maxF"] for r in rows if r["valid"]]
    return {"images": len(rows),
            "mae": float(np.mean([r["mae"] for r in rows])) if rows else float("nan"),
            "maxF": float(np.mean(valid)) if valid else float("nan")}


def write_rows_csv(path, rows):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["id", "mae", "maxF"])
        for r in rows:
            out.writerow([r["id"], repr(r["mae"]), "nan" if not r["valid"] else repr(r["maxF"])])


def write_curve_csv(path, curve):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["threshold", "precision", "recall"])
        for t, p, r in zip(curve.thresholds, curve.precision, curve.recall):
            out.writerow([repr(float(t)), repr(float(p)), repr(float(r))])
