"""Frechet regression with graph-valued responses.

Graphs on a fixed node set are compared either with the power-Frobenius
metric on their Laplacians or with the 2-Wasserstein distance between the
Gaussians ``N(0, L^+)``; predictions are weighted Frechet means under the
chosen metric.
"""

__version__ = "0.1.0"

from ._backend import BACKEND
from .barycenter import BarycenterProblem, SolveReport, solve
from .errors import (
    DivergedNegativeEigenvalue,
    NetFrechetError,
    NotConverged,
    SolverError,
    ValidationError,
)
from .evalstats import EvalConfig, EvalResult, cv_mspe, frechet_mean, frechet_variance, r_squared
from .graphcore import Graph, gaussian_rep, laplacian, make_named
from .metrics import MetricSpec, distance, frobenius_power_distance, wasserstein_distance_sq
from .regress import (
    Dataset,
    RegressorSpec,
    SolverConfig,
    WeightScheme,
    global_weights,
    local_weights,
    predict,
    predict_many,
)

__all__ = [
    "BACKEND",
    "BarycenterProblem",
    "Dataset",
    "DivergedNegativeEigenvalue",
    "EvalConfig",
    "EvalResult",
    "Graph",
    "MetricSpec",
    "NetFrechetError",
    "NotConverged",
    "RegressorSpec",
    "SolveReport",
    "SolverConfig",
    "SolverError",
    "ValidationError",
    "WeightScheme",
    "cv_mspe",
    "distance",
    "frechet_mean",
    "frechet_variance",
    "frobenius_power_distance",
    "gaussian_rep",
    "global_weights",
    "laplacian",
    "local_weights",
    "make_named",
    "predict",
    "predict_many",
    "r_squared",
    "solve",
    "wasserstein_distance_sq",
]
