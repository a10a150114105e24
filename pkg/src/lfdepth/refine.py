"""Confidence shrinkage and edge reinforcement over occluded border regions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate

from .cost import ConfidenceMap


@dataclass(frozen=True)
class RefineParams:
    gamma_v: float = 0.3
    gamma_c: float = 0.1
    beta1: float = 5.0
    beta2: float = 2.0
    var_window: int = 3

    def __post_init__(self):
        if not (0 < self.gamma_v < 1 and 0 < self.gamma_c < 1):
            raise ValueError("thresholds must lie in (0, 1)")
        if self.beta1 < 0 or self.beta2 < 0:
            raise ValueError("betas must be nonnegative")
        if self.var_window < 1 or self.var_window % 2 == 0:
            raise ValueError("var_window must be odd")


def _values(field):
    return np.asarray(getattr(field, "values", field), dtype=np.float64)


def kappa_occ(eps):
    """2 / (1 + exp(-eps)) for negative eps, 1 elsewhere."""
    eps = _values(eps)
    neg = eps < 0
    out = np.ones_like(eps)
    out[neg] = 2.0 / (1.0 + np.exp(-eps[neg]))
    return out


def local_variance(values, window):
    """Population variance over a ``window`` x ``window`` neighbourhood,
    truncated at the image border."""
    values = np.asarray(values, dtype=np.float64)
    kernel = np.ones((window, window))
    count = correlate(np.ones_like(values), kernel, mode="constant", cval=0.0)
    # center on the global mean to limit cancellation in E[x^2] - E[x]^2
    centered = values - values.mean()
    s1 = correlate(centered, kernel, mode="constant", cval=0.0)
    s2 = correlate(centered * centered, kernel, mode="constant", cval=0.0)
    return np.maximum(s2 / count - (s1 / count) ** 2, 0.0)


def kappa_var_from_variance(vd, gamma_v):
    vd = np.asarray(vd, dtype=np.float64)
    out = np.ones_like(vd)
    high = vd > gamma_v
    out[high] = 2.0 / (1.0 + np.exp(vd[high] - gamma_v))
    return out


def kappa_var(d_index, p: RefineParams = RefineParams()):
    """Shrinkage over noisy initial depth; ``d_index`` is in label units."""
    return kappa_var_from_variance(local_variance(_values(d_index), p.var_window), p.gamma_v)


def refine_confidence(w, ko, kv):
    return ConfidenceMap(_values(w) * _values(ko) * _values(kv), "refined")


def rho_occ(ko, eps, p: RefineParams = RefineParams()):
    ko, eps = _values(ko), _values(eps)
    return np.where(eps < 0, 1.0 + p.beta1 * np.cos(0.5 * np.pi * ko), 1.0)


def rho_conf(w, p: RefineParams = RefineParams()):
    """Edge boost below the confidence threshold; jumps back to 1 at gamma_c."""
    w = _values(w)
    return np.where(w < p.gamma_c, 1.0 + p.beta2 * np.cos(0.5 * np.pi * w), 1.0)
