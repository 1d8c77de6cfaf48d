"""Variance-reduced and adaptive-metric optimizers for finite-sum convex
minimization, with datasets, diagnostics and a benchmark harness."""

from .data import SyntheticSpec, gen_separable, load_libsvm, parse_libsvm, save_libsvm, serialize_libsvm
from .diagnostics import (
    PhaseTestState,
    Trace,
    TraceRow,
    estimate_sigma2,
    phase_ratio,
    two_phase_slope_fit,
)
from .optimizers import (
    InnerLoopPolicy,
    RunResult,
    StepSizeRule,
    adagrad,
    adasvrg_adaptive,
    adasvrg_fixed,
    adasvrg_multistage,
    hybrid_adagrad_adasvrg,
    loopless_svrg,
    sarah,
    sgd,
    svrg,
    svrg_bb,
    svrg_inner_armijo_1d,
)
from .precond import PrecondState, PrecondVariant, ProjectionSpec, project
from .problems import Dataset, GradOracleCounters, Problem

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "GradOracleCounters",
    "InnerLoopPolicy",
    "PhaseTestState",
    "PrecondState",
    "PrecondVariant",
    "Problem",
    "ProjectionSpec",
    "RunResult",
    "StepSizeRule",
    "SyntheticSpec",
    "Trace",
    "TraceRow",
    "adagrad",
    "adasvrg_adaptive",
    "adasvrg_fixed",
    "adasvrg_multistage",
    "estimate_sigma2",
    "gen_separable",
    "hybrid_adagrad_adasvrg",
    "load_libsvm",
    "loopless_svrg",
    "parse_libsvm",
    "phase_ratio",
    "project",
    "sarah",
    "save_libsvm",
    "serialize_libsvm",
    "sgd",
    "svrg",
    "svrg_bb",
    "svrg_inner_armijo_1d",
    "two_phase_slope_fit",
]
