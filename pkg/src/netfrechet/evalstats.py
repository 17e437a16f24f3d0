"""Frechet mean/variance, Frechet R^2 and k-fold cross-validated MSPE."""

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import barycenter as bc
from . import specmat
from .errors import InsufficientData, UndefinedRSquared, ValidationError
from .graphcore import laplacian, weights_from_laplacian
from .metrics import FROBENIUS, MetricSpec, squared_distance_laplacians
from .regress import Dataset, RegressorSpec, predict

VARIANCE_FLOOR = 1e-12


def _laplacians(data):
    if isinstance(data, Dataset):
        return np.asarray(data.laplacians)
    graphs = list(data)
    if not graphs:
        raise InsufficientData("need at least one graph")
    return np.stack([laplacian(g) for g in graphs])


def _mean_of(Ls, metric):
    n = len(Ls)
    if metric.kind == FROBENIUS:
        if metric.alpha == 1:
            return Ls.mean(axis=0)
        F = specmat.matrix_power_batch(Ls, metric.alpha)
        return specmat.matrix_power(specmat.clip_psd(F.mean(axis=0)), 1.0 / metric.alpha)
    if n == 1:
        return Ls[0].copy()
    covs = np.stack([specmat.pinv_psd(L) for L in Ls])
    rep = bc.solve(bc.BarycenterProblem(covs, np.full(n, 1.0 / n), variant=bc.SHIFTED))
    return specmat.pinv_psd(specmat.center(rep.result))


def mean_laplacian(data, metric):
    """Laplacian of the uniform-weight Frechet mean (unprojected)."""
    return _mean_of(_laplacians(data), metric)


def frechet_mean(data, metric=None):
    """Uniform-weight Frechet mean of a Dataset or a sequence of graphs."""
    metric = metric or MetricSpec()
    return weights_from_laplacian(mean_laplacian(data, metric), clip_negative=True)


def frechet_variance(data, metric=None):
    """Mean squared distance to :func:`frechet_mean`."""
    metric = metric or MetricSpec()
    Ls = _laplacians(data)
    M = _mean_of(Ls, metric)
    return math.fsum(squared_distance_laplacians(metric, L, M) for L in Ls) / len(Ls)


def r_squared_from_predictions(data, predicted, metric, variance=None):
    """``1 - mean d^2(G_i, m(X_i)) / V`` for given predicted Laplacians."""
    Ls = _laplacians(data)
    V = frechet_variance(data, metric) if variance is None else variance
    if V <= VARIANCE_FLOOR:
        raise UndefinedRSquared(f"Frechet variance {V:.3e} is zero; all responses identical")
    resid = math.fsum(
        squared_distance_laplacians(metric, L, P) for L, P in zip(Ls, predicted)
    ) / len(Ls)
    return 1.0 - resid / V


@dataclass(frozen=True)
class EvalConfig:
    prediction_spec: RegressorSpec = field(default_factory=RegressorSpec)
    error_metric: MetricSpec = field(default_factory=MetricSpec)
    folds: int = 10
    reps: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.folds < 2:
            raise ValidationError(f"folds must be at least 2, got {self.folds}")
        if self.reps < 1:
            raise ValidationError(f"reps must be positive, got {self.reps}")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")

    def to_dict(self, ds=None):
        return {
            "prediction": self.prediction_spec.to_dict(ds),
            "error_metric": self.error_metric.to_dict(),
            "folds": self.folds,
            "reps": self.reps,
            "seed": self.seed,
        }


@dataclass
class EvalResult:
    r_squared: float
    frechet_variance: float
    mspe_mean: float
    mspe_per_rep: np.ndarray
    flags: list = field(default_factory=list)
    config: dict | None = None

    def to_dict(self):
        return {
            "r_squared": self.r_squared,
            "frechet_variance": self.frechet_variance,
            "mspe_mean": self.mspe_mean,
            "mspe_per_rep": [float(v) for v in self.mspe_per_rep],
            "flags": list(self.flags),
            "config": self.config,
        }

    def csv_rows(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rep", "mspe"])
        for r, v in enumerate(self.mspe_per_rep):
            w.writerow([r, repr(float(v))])
        return buf.getvalue()


def _raw_predictions(ds, X, spec, flags):
    """Raw (unprojected) predicted Laplacians at each row of ``X``."""
    out = []
    for x in X:
        rep = predict(ds, x, spec)
        for f in rep.flags:
            if f not in flags:
                flags.append(f)
        out.append(rep.raw_laplacian)
    return out


def _eval_spec(spec):
    return RegressorSpec(spec.metric, spec.weights, spec.solver, projection=False)


def r_squared(ds, config, flags=None):
    """In-sample Frechet R^2 under ``config.error_metric``."""
    flags = [] if flags is None else flags
    preds = _raw_predictions(ds, ds.X, _eval_spec(config.prediction_spec), flags)
    return r_squared_from_predictions(ds, preds, config.error_metric)


def rep_seed(seed, rep):
    """Deterministic per-rep generator, independent of execution order."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(rep,)))


def fold_assignment(n, folds, rng):
    """Shuffled indices split into ``folds`` near-equal contiguous blocks."""
    perm = rng.permutation(n)
    return np.array_split(perm, folds)


def _rep_mspe(ds, config, r, flags):
    spec = _eval_spec(config.prediction_spec)
    blocks = fold_assignment(ds.n, config.folds, rep_seed(config.seed, r))
    errs = np.zeros(ds.n)
    for test in blocks:
        train = np.setdiff1d(np.arange(ds.n), test)
        sub = ds.subset(train)
        preds = _raw_predictions(sub, ds.X[test], spec, flags)
        for i, P in zip(test, preds):
            errs[i] = squared_distance_laplacians(config.error_metric, ds.laplacians[i], P)
    return math.fsum(errs) / ds.n


def cv_mspe(ds, config, n_jobs=1):
    """Repeated k-fold MSPE plus in-sample R^2 and Frechet variance."""
    if ds.n < config.folds:
        raise InsufficientData(f"{config.folds} folds need at least {config.folds} observations")
    if ds.n - math.ceil(ds.n / config.folds) < 2:
        raise InsufficientData("training folds would hold fewer than 2 observations")
    rep_flags = [[] for _ in range(config.reps)]
    if n_jobs == 1:
        per_rep = [_rep_mspe(ds, config, r, rep_flags[r]) for r in range(config.reps)]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            per_rep = list(pool.map(
                lambda r: _rep_mspe(ds, config, r, rep_flags[r]), range(config.reps)
            ))
    flags = []
    for fl in rep_flags:
        flags.extend(f for f in fl if f not in flags)
    V = frechet_variance(ds, config.error_metric)
    try:
        r2 = r_squared(ds, config, flags)
    except UndefinedRSquared:
        r2 = float("nan")
        flags.append("r_squared_undefined")
    per_rep = np.array(per_rep)
    return EvalResult(
        r_squared=r2,
        frechet_variance=V,
        mspe_mean=float(per_rep.mean()),
        mspe_per_rep=per_rep,
        flags=flags,
        config=config.to_dict(ds),
    )
