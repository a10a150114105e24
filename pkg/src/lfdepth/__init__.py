"""Light-field depth estimation with superpixel regularization over partially
occluded border regions."""

from .cost import (
    ConfidenceMap,
    CostParams,
    CostVolume,
    DepthMap,
    angular_variance,
    build_cost_volume,
    initial_confidence,
    initial_depth,
)
from .lightfield import GroundTruth, LabelGrid, LightField, Plane, load_lightfield, render_synthetic
from .pipeline import PipelineConfig, PipelineResult, StageError, final_depth, run_pipeline
from .refine import RefineParams, kappa_occ, kappa_var, refine_confidence, rho_conf, rho_occ
from .solver import SingularSystemError, SolveReport, SparseSpdSystem, assemble, solve
from .superpixel import SpRegParams, SuperpixelGraph, epsilon_map, slic_segment, solve_sp_depth
from .metrics import EvalResult, badpix, boundary_pr

__all__ = [
    "ConfidenceMap",
    "CostParams",
    "CostVolume",
    "DepthMap",
    "EvalResult",
    "GroundTruth",
    "LabelGrid",
    "LightField",
    "PipelineConfig",
    "PipelineResult",
    "Plane",
    "RefineParams",
    "SingularSystemError",
    "SolveReport",
    "SpRegParams",
    "SparseSpdSystem",
    "StageError",
    "SuperpixelGraph",
    "angular_variance",
    "assemble",
    "badpix",
    "boundary_pr",
    "build_cost_volume",
    "epsilon_map",
    "final_depth",
    "initial_confidence",
    "initial_depth",
    "kappa_occ",
    "kappa_var",
    "load_lightfield",
    "refine_confidence",
    "render_synthetic",
    "rho_conf",
    "rho_occ",
    "run_pipeline",
    "slic_segment",
    "solve",
    "solve_sp_depth",
]

__version__ = "0.1.0"
