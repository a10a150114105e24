"""Disparity error rate and occlusion-boundary precision/recall."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import binary_dilation


@dataclass(frozen=True)
class PRPoint:
    threshold: float
    precision: float
    recall: float
    c_p: int
    t_p: int
    g_p: int


@dataclass(frozen=True)
class EvalResult:
    badpix_0_1: float
    pr_curve: list = field(default_factory=list)


def _values(x):
    return np.asarray(getattr(x, "values", x), dtype=np.float64)


def border_mask(shape, margin):
    """True away from a ``margin``-pixel frame."""
    mask = np.zeros(shape, dtype=bool)
    h, w = shape
    m = int(margin)
    if 2 * m < h and 2 * m < w:
        mask[m : h - m, m : w - m] = True
    return mask


def border_margin(grid, max_offset):
    return int(math.ceil(max_offset * grid.max_abs))


def badpix(est, gt, threshold=0.1, mask=None):
    """Fraction of valid pixels whose |est - gt| exceeds ``threshold`` (pixels).

    Pixels with non-finite ground truth, or outside ``mask``, are ignored.
    """
    est, gt = _values(est), _values(gt)
    if est.shape != gt.shape:
        raise ValueError("estimate and ground truth differ in shape")
    valid = np.isfinite(gt)
    if mask is not None:
        valid &= np.asarray(mask, dtype=bool)
    n = int(valid.sum())
    if n == 0:
        raise ValueError("no valid pixels to evaluate")
    return float(np.count_nonzero(np.abs(est - gt)[valid] > threshold) / n)


def gradient_magnitude(disp):
    """Central-difference gradient magnitude (one-sided at the border)."""
    disp = _values(disp)
    if min(disp.shape) < 2:
        raise ValueError("need at least 2 pixels along each axis")
    gy, gx = np.gradient(np.nan_to_num(disp))
    return np.hypot(gx, gy)


def gt_boundary(gt, threshold):
    return gradient_magnitude(gt) > threshold


def boundary_pr(est, gt, gt_boundary_threshold, *, thresholds=None, n_thresholds=64, tolerance=1, mask=None):
    """Precision/recall of occlusion boundaries found by thresholding the
    estimate's gradient magnitude.

    At each threshold t: C_p counts pixels with gradient >= t, T_p those of
    them within ``tolerance`` pixels (chessboard distance) of a ground-truth
    boundary pixel, G_p the ground-truth boundary size.  Precision is T_p/C_p,
    recall C_p/G_p; thresholds with C_p = 0 or C_p > G_p (recall above 1) are
    left out.  By default thresholds are quantiles of the positive gradients.
    Returned points are ordered by increasing threshold.
    """
    est = _values(est)
    gt_edges = gt_boundary(gt, gt_boundary_threshold)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        gt_edges &= mask
    g_p = int(gt_edges.sum())
    if g_p == 0:
        raise ValueError("ground-truth boundary is empty at this threshold")
    grad = gradient_magnitude(est)
    if mask is not None:
        grad = np.where(mask, grad, 0.0)
    struct = np.ones((2 * tolerance + 1, 2 * tolerance + 1), dtype=bool)
    near = binary_dilation(gt_edges, structure=struct)

    positive = grad[grad > 0]
    if thresholds is None:
        if positive.size == 0:
            return []
        thresholds = np.unique(np.quantile(positive, np.linspace(0.0, 1.0, n_thresholds)))
    order = np.argsort(-grad.ravel(), kind="stable")
    sorted_grad = grad.ravel()[order]
    hits = np.cumsum(near.ravel()[order])
    curve = []
    for t in np.sort(np.asarray(thresholds, dtype=np.float64)):
        if t <= 0:
            continue
        c_p = int(np.searchsorted(-sorted_grad, -t, side="right"))
        if c_p == 0 or c_p > g_p:
            continue
        t_p = int(hits[c_p - 1])
        curve.append(PRPoint(float(t), t_p / c_p, c_p / g_p, c_p, t_p, g_p))
    return curve


def interpolated_precision(curve, recalls):
    """Best precision achieved at recall >= r, for each r (nan if unreachable)."""
    rec = np.array([pt.recall for pt in curve])
    prec = np.array([pt.precision for pt in curve])
    out = np.full(len(recalls), np.nan)
    for i, r in enumerate(recalls):
        sel = rec >= r
        if sel.any():
            out[i] = prec[sel].max()
    return out


def evaluate(est, gt, gt_boundary_threshold, *, threshold=0.1, mask=None):
    curve = boundary_pr(est, gt, gt_boundary_threshold, mask=mask)
    return EvalResult(badpix(est, gt, threshold, mask), curve)


def write_pr_csv(path, curve):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("threshold,precision,recall,C_p,T_p,G_p\n")
        for pt in curve:
            fh.write(f"{pt.threshold:.9g},{pt.precision:.9g},{pt.recall:.9g},{pt.c_p},{pt.t_p},{pt.g_p}\n")


def write_badpix_csv(path, rows):
    """``rows`` is an iterable of (name, value) pairs."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("map,badpix_0_1\n")
        for name, value in rows:
            fh.write(f"{name},{value:.9g}\n")
