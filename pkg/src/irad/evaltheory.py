"""Evaluation metrics and numerical checks of the joint-error lower bound."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .numkit import ShapeError, as_matrix


class UndefinedMetricError(ValueError):
    pass


def _average_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing the mean of their positions."""
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ranks = np.empty(len(x))
    starts = np.r_[0, np.nonzero(np.diff(xs))[0] + 1]
    ends = np.r_[starts[1:], len(x)]
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = (s + e + 1) / 2.0
    return ranks


def auroc(scores, labels) -> float:
    """P(anomaly outscores normal) + P(tie)/2 via the Mann-Whitney rank sum."""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if scores.shape != labels.shape:
        raise ShapeError(f"auroc: {len(scores)} scores vs {len(labels)} labels")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("auroc needs both normal (0) and anomalous (1) labels")
    r = _average_ranks(scores)
    u = r[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _entropy2(p: float) -> float:
    return -sum(q * math.log2(q) for q in (p, 1.0 - p) if q > 0)


def js_distance_bernoulli(p: float, q: float) -> float:
    """Square root of the base-2 Jensen-Shannon divergence between Bern(p) and Bern(q)."""
    for v in (p, q):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"probability out of range: {v}")
    jsd = _entropy2((p + q) / 2.0) - 0.5 * (_entropy2(p) + _entropy2(q))
    return math.sqrt(min(1.0, max(jsd, 0.0)))


@dataclass
class ErrorReport:
    eps_s: float
    eps_t: float
    d_js_labels: float
    lhs: float
    rhs: float
    holds: bool
    tol: float = 1e-9


@dataclass
class ThresholdRule:
    threshold: float

    def __call__(self, scores) -> np.ndarray:
        return (np.asarray(scores) >= self.threshold).astype(int)


def _binary(v, name) -> np.ndarray:
    v = np.asarray(v).reshape(-1)
    if not np.isin(v, (0, 1)).all():
        raise ValueError(f"{name} must be 0/1")
    return v.astype(np.float64)


def theorem1_check(pred_s, y_s, pred_t, y_t, tol: float = 1e-9) -> ErrorReport:
    """Joint error eps_S + eps_T against half the squared JS distance of label marginals."""
    pred_s, y_s, pred_t, y_t = (_binary(v, n) for v, n in ((pred_s, "pred_s"), (y_s, "y_s"), (pred_t, "pred_t"), (y_t, "y_t")))
    if len(pred_s) != len(y_s) or len(pred_t) != len(y_t):
        raise ShapeError("theorem1_check: predictions and labels differ in length")
    eps_s = float(np.abs(pred_s - y_s).mean())
    eps_t = float(np.abs(pred_t - y_t).mean())
    d = js_distance_bernoulli(float(y_s.mean()), float(y_t.mean()))
    lhs, rhs = eps_s + eps_t, 0.5 * d * d
    return ErrorReport(eps_s, eps_t, d, lhs, rhs, lhs >= rhs - tol, tol)


def lemma_jsd_check(pred, y) -> tuple[float, float, bool]:
    """JS distance between label and prediction marginals never exceeds sqrt(error)."""
    pred, y = _binary(pred, "pred"), _binary(y, "y")
    if len(pred) != len(y):
        raise ShapeError("lemma_jsd_check: lengths differ")
    d = js_distance_bernoulli(float(y.mean()), float(pred.mean()))
    root = math.sqrt(float(np.abs(pred - y).mean()))
    return d, root, d <= root + 1e-12


def threshold_sweep(scores_s, y_s, scores_t, y_t, tol: float = 1e-9) -> list[tuple[float, ErrorReport]]:
    """One report per distinct score value, thresholding both domains with the same rule."""
    scores_s, scores_t = np.asarray(scores_s), np.asarray(scores_t)
    rows = []
    for thr in np.unique(np.concatenate([scores_s, scores_t])):
        rule = ThresholdRule(float(thr))
        rows.append((float(thr), theorem1_check(rule(scores_s), y_s, rule(scores_t), y_t, tol)))
    return rows


# ---------------------------------------------------------------------------
# PCA


def jacobi_eigh(a: np.ndarray, tol: float = 1e-14, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigen-solve of a symmetric matrix; eigenvalues descending."""
    a = np.array(a, dtype=np.float64)
    n = len(a)
    v = np.eye(n)
    scale = max(np.abs(a).max(), 1e-300)
    for _ in range(max_sweeps):
        off = math.sqrt(max((a * a).sum() - (np.diag(a) ** 2).sum(), 0.0))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q], rot[q, p] = s, -s
                a = rot.T @ a @ rot
                v = v @ rot
    w = np.diag(a).copy()
    order = np.argsort(-w, kind="mergesort")
    return w[order], v[:, order]


def pca_2d(points, return_variance: bool = False):
    """Project onto the top two principal axes; largest-magnitude loading made positive."""
    x = as_matrix(points, "points")
    if x.shape[0] < 2 or x.shape[1] < 2:
        raise ShapeError(f"pca_2d needs at least 2 points in at least 2 dims, got {x.shape}")
    centred = x - x.mean(axis=0)
    cov = centred.T @ centred / (len(x) - 1)
    w, v = jacobi_eigh(cov)
    if w[0] <= 0:
        warnings.warn("pca_2d: data has rank 0, returning a zero projection")
        proj = np.zeros((len(x), 2))
        return (proj, np.zeros(2)) if return_variance else proj
    comps = v[:, :2].copy()
    for j in range(2):
        k = np.argmax(np.abs(comps[:, j]))
        if comps[k, j] < 0:
            comps[:, j] *= -1
    proj = centred @ comps
    return (proj, np.maximum(w[:2], 0.0)) if return_variance else proj
