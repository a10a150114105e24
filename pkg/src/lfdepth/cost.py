"""Angular-variance cost volume, bilateral aggregation, initial depth and confidence."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lightfield import LabelGrid, LightField, sample_bilinear, shift_bilinear

CONFIDENCE_FLOOR = 1e-12


@dataclass(frozen=True)
class CostParams:
    """``w_sigma`` is the aggregation window diameter, ``gamma`` the bilateral
    range parameter on [0, 1] intensities and ``conf_cap`` the value at which the
    mean/min cost ratio saturates before normalization."""

    w_sigma: int = 5
    gamma: float = 0.1
    conf_cap: float = 100.0

    def __post_init__(self):
        if self.w_sigma < 1 or self.w_sigma % 2 == 0:
            raise ValueError("w_sigma must be odd and >= 1")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.conf_cap <= 1:
            raise ValueError("conf_cap must exceed 1")


@dataclass(frozen=True)
class CostVolume:
    values: np.ndarray
    labels: LabelGrid

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 3 or values.shape[2] != self.labels.n_labels:
            raise ValueError("cost volume must be H x W x n_labels")
        if not np.all(np.isfinite(values)) or values.min() < 0:
            raise ValueError("costs must be finite and nonnegative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class DepthMap:
    """``kind`` is one of 'initial', 'sp', 'final' (disparity units) or
    'epsilon' (label units)."""

    values: np.ndarray
    kind: str

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if not np.all(np.isfinite(values)):
            raise ValueError(f"{self.kind} depth map has non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class ConfidenceMap:
    values: np.ndarray
    kind: str = "initial"

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.size and (values.min() < 0.0 or values.max() > 1.0):
            raise ValueError("confidence values must lie in [0, 1]")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


def angular_variance(lf: LightField, x, s):
    """Unbiased variance of the radiance along the slope line through pixel
    ``x = (row, col)`` for disparity ``s``, averaged over channels.

    Views whose sample falls outside the image are skipped; fewer than two
    samples give 0.
    """
    row, col = x
    samples = []
    for iu, iv, du, dv in lf.offsets():
        value = sample_bilinear(lf.views[iu, iv], col + du * s, row + dv * s)
        if value is not None:
            samples.append(value)
    if len(samples) < 2:
        return 0.0
    # offsets from the first sample: constant lines give exactly zero
    samples = np.asarray(samples) - samples[0]
    mean = samples.mean(axis=0)
    var = ((samples - mean) ** 2).sum(axis=0) / (len(samples) - 1)
    return float(var.mean())


def variance_volume(lf: LightField, grid: LabelGrid):
    """Per-pixel angular variance for every label, (H, W, n_labels)."""
    h, w = lf.shape
    ref = lf.central_view
    out = np.zeros((h, w, grid.n_labels))
    for i, s in enumerate(grid.labels):
        count = np.zeros((h, w))
        acc = np.zeros((h, w, lf.channels))
        acc2 = np.zeros((h, w, lf.channels))
        for iu, iv, du, dv in lf.offsets():
            shifted, valid = shift_bilinear(lf.views[iu, iv], du * s, dv * s)
            # offsets from the central sample keep the sums well conditioned and
            # make constant lines exactly zero-variance
            delta = np.where(valid[..., None], shifted - ref, 0.0)
            acc += delta
            acc2 += delta * delta
            count += valid
        n = np.maximum(count, 2.0)[..., None]
        var = (acc2 - acc * acc / n) / (n - 1.0)
        var = np.where((count >= 2)[..., None], np.maximum(var, 0.0), 0.0)
        out[..., i] = var.mean(axis=2)
    return out


def bilateral_weights(gray, w_sigma, gamma):
    """Range weights for every window offset, (n_offsets, H, W), zero outside the image.

    Offsets are enumerated row-major over the window so summation order is fixed.
    """
    h, w = gray.shape
    r = w_sigma // 2
    offsets = [(dy, dx) for dy in range(-r, r + 1) for dx in range(-r, r + 1)]
    weights = np.zeros((len(offsets), h, w))
    padded = np.full((h + 2 * r, w + 2 * r), np.nan)
    padded[r : r + h, r : r + w] = gray
    for k, (dy, dx) in enumerate(offsets):
        nb = padded[r + dy : r + dy + h, r + dx : r + dx + w]
        wk = np.exp(-((nb - gray) ** 2) / (2.0 * gamma**2))
        weights[k] = np.where(np.isnan(nb), 0.0, wk)
    return offsets, weights


def aggregate(variance, gray, w_sigma, gamma):
    """Unnormalized bilateral sum of the variance volume over a square window."""
    h, w, n = variance.shape
    r = w_sigma // 2
    offsets, weights = bilateral_weights(gray, w_sigma, gamma)
    padded = np.zeros((h + 2 * r, w + 2 * r, n))
    padded[r : r + h, r : r + w] = variance
    out = np.zeros_like(variance)
    for (dy, dx), wk in zip(offsets, weights):
        out += wk[..., None] * padded[r + dy : r + dy + h, r + dx : r + dx + w]
    return out


def build_cost_volume(lf: LightField, grid: LabelGrid, p: CostParams = CostParams()):
    variance = variance_volume(lf, grid)
    return CostVolume(aggregate(variance, lf.central_gray, p.w_sigma, p.gamma), grid)


def initial_depth(cv: CostVolume):
    """Per-pixel argmin label; ``np.argmin`` keeps the first (smallest) index on ties."""
    idx = np.argmin(cv.values, axis=2)
    return DepthMap(cv.labels.labels[idx], "initial")


def initial_confidence(cv: CostVolume, cap=CostParams.conf_cap):
    """Mean-to-minimum cost ratio, clamped to [1, cap] and min-max normalized.

    A constant ratio field maps to all ones.
    """
    mean = cv.values.mean(axis=2)
    low = cv.values.min(axis=2)
    raw = mean / np.maximum(low, CONFIDENCE_FLOOR)
    raw = np.clip(raw, 1.0, cap)
    lo, hi = raw.min(), raw.max()
    if hi - lo <= 0.0:
        return ConfidenceMap(np.ones_like(raw), "initial")
    return ConfidenceMap(np.clip((raw - lo) / (hi - lo), 0.0, 1.0), "initial")
