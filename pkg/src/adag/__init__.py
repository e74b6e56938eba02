"""Differentiable DAG learning with analytic acyclicity constraints."""

from .constraints import (
    ConstraintEval,
    ConstraintSpec,
    SeriesInverseResult,
    eval_constraint,
    exponential,
    hessian_dense,
    inverse_power,
    logdet,
    preset,
    series_inverse,
    spectral_radius,
    spectral_radius_estimate,
)
from .graphs import GraphGenSpec, generate_dag, is_acyclic
from .metrics import count_accuracy, shd, tpr_fdr
from .optimizer import LearnResult, PathFollowConfig, mse_score, path_follow, threshold
from .sem import SemDataset, correlation_mask, normalize, sample_sem

__version__ = "0.1.0"

__all__ = [
    "ConstraintEval",
    "ConstraintSpec",
    "GraphGenSpec",
    "LearnResult",
    "PathFollowConfig",
    "SemDataset",
    "SeriesInverseResult",
    "correlation_mask",
    "count_accuracy",
    "eval_constraint",
    "exponential",
    "generate_dag",
    "hessian_dense",
    "inverse_power",
    "is_acyclic",
    "logdet",
    "mse_score",
    "normalize",
    "path_follow",
    "preset",
    "sample_sem",
    "series_inverse",
    "shd",
    "spectral_radius",
    "spectral_radius_estimate",
    "threshold",
    "tpr_fdr",
]
