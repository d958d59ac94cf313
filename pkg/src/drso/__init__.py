"""Wasserstein distributionally robust optimization on finite candidate sets."""
import os

# DRSO_THREADS caps BLAS threading; it must be set before numpy loads its backend
if os.environ.get("DRSO_THREADS"):
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, os.environ["DRSO_THREADS"])

from .dual import (EXISTS, UNBOUNDED, VANISHING, DualSolution, NoWorstCase, WassersteinBall,
                   WorstCaseDistribution, construct_worst_case, dual_objective,
                   epsilon_optimal_sequence, estimate_kappa, phi_regularize, primal_oracle,
                   robust_lower_bound_vK, solve_dual)
from .measures import (DiscreteDistribution, GroundMetric, PointSpace, SchemaError,
                       phi_divergence, wasserstein_distance)
from .objectives import Objective, named_objective, table_objective
from .phi import calibrate_radius, phi_worst_case
from .process import ControlPolicy, SamplePath, evaluate_control, optimize_control

__all__ = [
    "EXISTS", "UNBOUNDED", "VANISHING", "DualSolution", "NoWorstCase", "WassersteinBall",
    "WorstCaseDistribution", "construct_worst_case", "dual_objective",
    "epsilon_optimal_sequence", "estimate_kappa", "phi_regularize", "primal_oracle",
    "robust_lower_bound_vK", "solve_dual", "DiscreteDistribution", "GroundMetric",
    "PointSpace", "SchemaError", "phi_divergence", "wasserstein_distance", "Objective",
    "named_objective", "table_objective", "calibrate_radius", "phi_worst_case",
    "ControlPolicy", "SamplePath", "evaluate_control", "optimize_control",
]
