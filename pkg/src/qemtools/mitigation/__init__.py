"""Extrapolation estimators, cost formulas and combined mitigation pipelines."""

from __future__ import annotations

from .costs import (
    CostReport,
    break_even,
    cost_exp_extrapolation,
    cost_hyperbolic,
    cost_postproc,
    cost_qe,
    cost_qh,
    cost_qs,
    cost_symmetry,
    detection_prob,
    optimal_split,
    residual_error,
)
from .extrapolation import (
    ExpDecayModel,
    FitDivergence,
    NonExponentialData,
    NonHyperbolicDecay,
    fit_multi_exp,
    hyperbolic_extrapolate,
    partition_forward,
    recombine_identity_check,
    select_model,
    two_point_exp,
)
from .pipelines import PipelineResult, q_pipeline, qe_pipeline, qh_pipeline

__all__ = [
    "CostReport",
    "ExpDecayModel",
    "FitDivergence",
    "NonExponentialData",
    "NonHyperbolicDecay",
    "PipelineResult",
    "break_even",
    "cost_exp_extrapolation",
    "cost_hyperbolic",
    "cost_postproc",
    "cost_qe",
    "cost_qh",
    "cost_qs",
    "cost_symmetry",
    "detection_prob",
    "fit_multi_exp",
    "hyperbolic_extrapolate",
    "optimal_split",
    "partition_forward",
    "q_pipeline",
    "qe_pipeline",
    "qh_pipeline",
    "recombine_identity_check",
    "residual_error",
    "select_model",
    "two_point_exp",
]
