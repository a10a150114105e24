"""Final edge-aware weighted least-squares solve and end-to-end orchestration."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np

from . import solver
from .cost import (
    ConfidenceMap,
    CostParams,
    CostVolume,
    DepthMap,
    build_cost_volume,
    initial_confidence,
    initial_depth,
)
from .lightfield import LabelGrid, LightField
from .refine import RefineParams, kappa_occ, kappa_var, refine_confidence, rho_conf, rho_occ
from .superpixel import SpRegParams, SuperpixelGraph, epsilon_map, slic_segment, solve_sp_depth

log = logging.getLogger(__name__)


class StageError(RuntimeError):
    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class PipelineConfig:
    cost: CostParams = field(default_factory=CostParams)
    sp: SpRegParams = field(default_factory=SpRegParams)
    refine: RefineParams = field(default_factory=RefineParams)
    labels: LabelGrid = field(default_factory=lambda: LabelGrid(-2.0, 2.0, 33))
    eta: float = 0.03
    grad_floor: float = 1e-3
    solver_tol: float = 1e-6
    solver_max_iter: int | None = None
    ablate_kappa_occ: bool = False
    ablate_kappa_var: bool = False
    ablate_rho_occ: bool = False
    ablate_rho_conf: bool = False

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if not self.grad_floor > 0:
            raise ValueError("grad_floor must be positive")

    def ablated(self, on=True):
        """Copy with every shrinkage/reinforcement weight forced to 1."""
        return dataclasses.replace(
            self, ablate_kappa_occ=on, ablate_kappa_var=on, ablate_rho_occ=on, ablate_rho_conf=on
        )

    @classmethod
    def from_mapping(cls, data):
        """Build from nested dicts whose keys are the dataclass field names."""
        data = dict(data)
        sections = {"cost": CostParams, "sp": SpRegParams, "refine": RefineParams, "labels": LabelGrid}
        kwargs = {}
        known = {f.name for f in dataclasses.fields(cls)}
        for key, value in data.items():
            if key not in known:
                raise KeyError(f"unknown config key '{key}'")
            if key in sections:
                sub = sections[key]
                names = {f.name for f in dataclasses.fields(sub)}
                unknown = set(value) - names
                if unknown:
                    raise KeyError(f"unknown keys in [{key}]: {sorted(unknown)}")
                kwargs[key] = sub(**value)
            else:
                kwargs[key] = value
        return cls(**kwargs)

    def to_mapping(self):
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class PipelineResult:
    cost: CostVolume
    d: DepthMap
    omega: ConfidenceMap
    graph: SuperpixelGraph
    sp_values: np.ndarray
    p_sp: DepthMap
    eps: DepthMap
    k_occ: np.ndarray
    k_var: np.ndarray
    omega_t: ConfidenceMap
    r_occ: np.ndarray
    r_conf: np.ndarray
    d_final: DepthMap
    reports: dict


def _gray(image):
    image = np.asarray(image, dtype=np.float64)
    return image.mean(axis=2) if image.ndim == 3 else image


def _values(x):
    return np.asarray(getattr(x, "values", x), dtype=np.float64)


def grid_edges(shape):
    """4-neighbour pairs of an H x W grid, each undirected pair once: horizontal
    pairs first, then vertical, both row-major."""
    h, w = shape
    idx = np.arange(h * w).reshape(h, w)
    ei = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()])
    ej = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()])
    return ei, ej


def final_system(d, wt, ro, rc, central_view, eta, grad_floor=1e-3):
    """Sparse system of the final energy.

    An edge (x, y) is weighted ``eta / ((|I(x) - I(y)| + grad_floor) * m)`` with
    ``m`` the mean of ``rho_occ * rho_conf`` at its two endpoints; ``|.|`` is
    the L1 norm over color channels.
    """
    d, wt = _values(d), _values(wt)
    image = np.asarray(central_view, dtype=np.float64)
    if image.ndim == 2:
        image = image[..., None]
    if not (d.shape == wt.shape == image.shape[:2] == np.shape(ro) == np.shape(rc)):
        raise ValueError("all fields must share the central-view shape")
    ei, ej = grid_edges(d.shape)
    flat = image.reshape(-1, image.shape[2])
    diff = np.abs(flat[ei] - flat[ej]).sum(axis=1)
    rho = (np.asarray(ro, dtype=np.float64) * np.asarray(rc, dtype=np.float64)).ravel()
    m = 0.5 * (rho[ei] + rho[ej])
    ew = eta / ((diff + grad_floor) * m)
    return solver.assemble(wt.ravel(), d.ravel(), ei, ej, ew)


def final_depth(d, wt, ro, rc, central_view, eta, *, grad_floor=1e-3, tol=1e-6, max_iter=None):
    """Returns ``(DepthMap(kind='final'), SolveReport)``."""
    d_vals = _values(d)
    if eta == 0:
        # no coupling: every pixel with data weight keeps its initial value
        return DepthMap(d_vals, "final"), solver.SolveReport(0, 0.0, True)
    system = final_system(d, wt, ro, rc, central_view, eta, grad_floor)
    x, report = solver.solve(system, tol=tol, max_iter=max_iter)
    if not report.converged:
        log.warning("final solve stopped at relative residual %.3g", report.final_residual)
    return DepthMap(x.reshape(d_vals.shape), "final"), report


def run_pipeline(lf: LightField, cfg: PipelineConfig = PipelineConfig()):
    """Cost volume -> initial depth/confidence -> SLIC -> superpixel depth ->
    epsilon -> weight manipulation -> final solve.  Every intermediate is kept."""
    grid = cfg.labels
    stage = "cost"
    try:
        cv = build_cost_volume(lf, grid, cfg.cost)
        stage = "initial"
        d = initial_depth(cv)
        omega = initial_confidence(cv, cfg.cost.conf_cap)
        stage = "superpixel"
        graph = slic_segment(lf.central_view, cfg.sp)
        p_sp, sp_values, sp_report = solve_sp_depth(
            graph, d, omega, lf.central_view, cfg.sp, tol=min(cfg.solver_tol, 1e-8), max_iter=cfg.solver_max_iter
        )
        eps = epsilon_map(d, p_sp, grid)
        stage = "refine"
        ones = np.ones(lf.shape)
        ko = ones if cfg.ablate_kappa_occ else kappa_occ(eps)
        kv = ones if cfg.ablate_kappa_var else kappa_var(grid.to_index(d.values), cfg.refine)
        omega_t = refine_confidence(omega, ko, kv)
        ro = ones if cfg.ablate_rho_occ else rho_occ(kappa_occ(eps), eps, cfg.refine)
        rc = ones if cfg.ablate_rho_conf else rho_conf(omega, cfg.refine)
        stage = "final"
        d_final, final_report = final_depth(
            d,
            omega_t,
            ro,
            rc,
            lf.central_view,
            cfg.eta,
            grad_floor=cfg.grad_floor,
            tol=cfg.solver_tol,
            max_iter=cfg.solver_max_iter,
        )
    except Exception as exc:
        raise StageError(stage, exc) from exc
    return PipelineResult(
        cost=cv,
        d=d,
        omega=omega,
        graph=graph,
        sp_values=sp_values,
        p_sp=p_sp,
        eps=eps,
        k_occ=ko,
        k_var=kv,
        omega_t=omega_t,
        r_occ=ro,
        r_conf=rc,
        d_final=d_final,
        reports={"sp": sp_report, "final": final_report},
    )
