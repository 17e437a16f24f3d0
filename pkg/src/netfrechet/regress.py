"""Global and local Frechet regression with graph-valued responses.

A prediction at covariate ``x`` is the weighted Frechet mean
``argmin_G sum_i w_i(x) d^2(G_i, G)`` with weights summing to one:

* power-Frobenius metric: the weighted mean of ``F_alpha(L_i)`` mapped back
  through ``F_{1/alpha}``;
* Wasserstein metric: the weighted Bures-Wasserstein barycenter of the
  Laplacian pseudo-inverses, pseudo-inverted back to a Laplacian.
"""

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import barycenter as bc
from . import specmat
from .errors import DegenerateKernelSupport, DimensionMismatch, InsufficientData
from .graphcore import Graph, laplacian, weights_from_laplacian
from .metrics import FROBENIUS, WASSERSTEIN, MetricSpec, squared_distance_laplacians

log = logging.getLogger(__name__)

GLOBAL = "global"
LOCAL = "local"
GAUSSIAN = "gaussian"
EPANECHNIKOV = "epanechnikov"


class Dataset:
    """Ordered covariate-graph pairs; immutable after construction.

    Parameters
    ----------
    X : array-like, shape (n,) or (n, p)
        Covariates.
    graphs : sequence of Graph
        Responses, all on the same node count.
    ids : sequence of str, optional
        Row labels (dates for the taxi data).
    node_labels : sequence of str, optional
    """

    def __init__(self, X, graphs, ids=None, node_labels=None):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        graphs = list(graphs)
        if X.ndim != 2 or X.shape[0] != len(graphs):
            raise DimensionMismatch(f"{X.shape[0]} covariate rows for {len(graphs)} graphs")
        if len(graphs) < 2:
            raise InsufficientData(f"need at least 2 observations, got {len(graphs)}")
        if not np.all(np.isfinite(X)):
            raise InsufficientData("covariates must be finite")
        k = graphs[0].n
        if any(g.n != k for g in graphs):
            raise DimensionMismatch("all graphs must share one node count")
        X.setflags(write=False)
        self.X = X
        self.graphs = tuple(graphs)
        self.ids = None if ids is None else [str(i) for i in ids]
        self.node_labels = None if node_labels is None else [str(s) for s in node_labels]
        if self.ids is not None and len(self.ids) != len(graphs):
            raise DimensionMismatch("ids and graphs differ in length")

    @classmethod
    def from_pairs(cls, pairs, **kw):
        xs, gs = zip(*pairs)
        return cls(np.array(xs, dtype=np.float64), gs, **kw)

    def __len__(self):
        return len(self.graphs)

    @property
    def n(self):
        return len(self.graphs)

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def k(self):
        return self.graphs[0].n

    @cached_property
    def x_mean(self):
        return self.X.mean(axis=0)

    @cached_property
    def x_cov(self):
        D = self.X - self.x_mean
        return D.T @ D / self.n

    @cached_property
    def laplacians(self):
        L = np.stack([laplacian(g) for g in self.graphs])
        L.setflags(write=False)
        return L

    @cached_property
    def covariances(self):
        C = np.stack([specmat.pinv_psd(L) for L in self.laplacians])
        C.setflags(write=False)
        return C

    def subset(self, idx):
        idx = list(idx)
        return Dataset(
            self.X[idx],
            [self.graphs[i] for i in idx],
            ids=None if self.ids is None else [self.ids[i] for i in idx],
            node_labels=self.node_labels,
        )


def _as_query(ds, x):
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.shape != (ds.p,):
        raise DimensionMismatch(f"query has {x.size} covariates, dataset has {ds.p}")
    return x


def global_weights(ds, x, flags=None):
    """``w_i = (1 + (X_i - Xbar)^T Sigma^-1 (x - Xbar)) / n``; may be negative.

    A singular covariate covariance is pseudo-inverted and
    ``"covariate_cov_pinv"`` is appended to ``flags``.
    """
    x = _as_query(ds, x)
    cov = ds.x_cov
    D = ds.X - ds.x_mean
    ev = np.linalg.eigvalsh(cov)
    if ev[0] <= 1e-12 * max(ev[-1], 1e-300):
        if flags is not None:
            flags.append("covariate_cov_pinv")
        z = np.linalg.pinv(cov, rcond=1e-12, hermitian=True) @ (x - ds.x_mean)
    else:
        z = np.linalg.solve(cov, x - ds.x_mean)
    s = 1.0 + D @ z
    return s / ds.n


def kernel_values(U, kernel):
    """Product kernel over columns of the scaled differences ``U``."""
    if kernel == GAUSSIAN:
        K = np.exp(-0.5 * U**2)
    elif kernel == EPANECHNIKOV:
        K = np.maximum(0.0, 0.75 * (1.0 - U**2))
    else:
        raise ValueError(f"unknown kernel {kernel!r}")
    return K.prod(axis=1)


def default_bandwidth(ds):
    """Rule of thumb ``n^(-1/5) * std(X_j)`` per covariate (1.0 for constant columns)."""
    sd = ds.X.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    return ds.n ** (-0.2) * sd


def local_weights(ds, x, kernel=GAUSSIAN, bandwidth=None):
    """Local-linear weights ``s_iL / n``.

    With ``d_i = X_i - x`` and ``K_i = K_h(d_i)``,
    ``s_i = K_i (1 - mu1^T mu2^-1 d_i) / (mu0 - mu1^T mu2^-1 mu1)`` where
    ``mu_j = mean(K_i d_i^j)`` (vector/matrix valued for p > 1).
    """
    x = _as_query(ds, x)
    h = default_bandwidth(ds) if bandwidth is None else np.broadcast_to(
        np.asarray(bandwidth, dtype=np.float64), (ds.p,)
    )
    if np.any(h <= 0):
        raise ValueError("bandwidth must be positive")
    D = ds.X - x
    K = kernel_values(D / h, kernel)
    if np.count_nonzero(K) < 2:
        raise DegenerateKernelSupport(
            f"fewer than two observations inside the kernel support at x={x.tolist()}"
        )
    mu0 = K.mean()
    mu1 = (K[:, None] * D).mean(axis=0)
    mu2 = (K[:, None, None] * D[:, :, None] * D[:, None, :]).mean(axis=0)
    try:
        a = np.linalg.solve(mu2, mu1)
    except np.linalg.LinAlgError:
        raise DegenerateKernelSupport(f"singular second kernel moment at x={x.tolist()}") from None
    denom = mu0 - mu1 @ a
    if not denom > 1e-12 * mu0:
        raise DegenerateKernelSupport(f"kernel support degenerate at x={x.tolist()}")
    s = K * (1.0 - D @ a) / denom
    return s / ds.n


@dataclass(frozen=True)
class WeightScheme:
    kind: str = GLOBAL
    kernel: str = GAUSSIAN
    bandwidth: tuple | None = None

    def __post_init__(self):
        if self.kind not in (GLOBAL, LOCAL):
            raise ValueError(f"unknown weight scheme {self.kind!r}")
        if self.kernel not in (GAUSSIAN, EPANECHNIKOV):
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if self.bandwidth is not None:
            bw = tuple(float(b) for b in np.atleast_1d(self.bandwidth))
            if any(not b > 0 for b in bw):
                raise ValueError("bandwidth must be positive")
            object.__setattr__(self, "bandwidth", bw)

    @classmethod
    def local(cls, kernel=GAUSSIAN, bandwidth=None):
        return cls(LOCAL, kernel, bandwidth)

    def weights(self, ds, x, flags=None):
        if self.kind == GLOBAL:
            return global_weights(ds, x, flags)
        return local_weights(ds, x, self.kernel, self.bandwidth)

    def to_dict(self, ds=None):
        d = {"kind": self.kind}
        if self.kind == LOCAL:
            d["kernel"] = self.kernel
            bw = self.bandwidth
            if bw is None and ds is not None:
                bw = tuple(default_bandwidth(ds))
            d["bandwidth"] = None if bw is None else [float(b) for b in bw]
        return d


@dataclass(frozen=True)
class SolverConfig:
    variant: str = bc.SHIFTED
    eps: float = 1e-5
    tol: float = 1e-8
    max_iter: int = 500

    def __post_init__(self):
        if self.variant not in bc.VARIANTS:
            raise ValueError(f"unknown solver variant {self.variant!r}")


@dataclass(frozen=True)
class RegressorSpec:
    metric: MetricSpec = field(default_factory=MetricSpec)
    weights: WeightScheme = field(default_factory=WeightScheme)
    solver: SolverConfig = field(default_factory=SolverConfig)
    projection: bool = True

    def to_dict(self, ds=None):
        d = {"metric": self.metric.to_dict(), "weights": self.weights.to_dict(ds),
             "projection": self.projection}
        if self.metric.kind == WASSERSTEIN:
            d["solver"] = {"variant": self.solver.variant, "eps": self.solver.eps,
                           "tol": self.solver.tol, "max_iter": self.solver.max_iter}
        return d


@dataclass
class PredictionReport:
    x: np.ndarray
    effective_weights: np.ndarray
    graph: Graph
    laplacian: np.ndarray
    raw_laplacian: np.ndarray
    solver_report: bc.SolveReport | None = None
    flags: list = field(default_factory=list)

    def to_dict(self):
        return {
            "x": [float(v) for v in self.x],
            "weights": [float(v) for v in self.effective_weights],
            "edges": [{"i": i, "j": j, "w": w} for i, j, w in self.graph.edges()],
            "laplacian": [[float(v) for v in row] for row in self.laplacian],
            "solver": None if self.solver_report is None else self.solver_report.to_dict(),
            "flags": list(self.flags),
        }


def project_laplacian(L):
    """Zero positive off-diagonals and rebuild the diagonal from row sums."""
    W = -np.asarray(L, dtype=np.float64).copy()
    np.fill_diagonal(W, 0.0)
    W = np.maximum(0.5 * (W + W.T), 0.0)
    return np.diag(W.sum(axis=1)) - W


def _report(x, lam, raw, projection, solver_report=None, flags=()):
    raw = 0.5 * (raw + raw.T)
    flags = list(flags)
    L = project_laplacian(raw) if projection else raw
    off = -raw.copy()
    np.fill_diagonal(off, 0.0)
    if off.min() < -1e-9 * max(1.0, np.abs(raw).max()):
        flags.append("negative_weights_clipped" if projection else "raw_has_negative_weights")
    return PredictionReport(
        x=x,
        effective_weights=lam,
        graph=weights_from_laplacian(L, clip_negative=True),
        laplacian=L,
        raw_laplacian=raw,
        solver_report=solver_report,
        flags=flags,
    )


def predict_frobenius(ds, x, alpha=1.0, weights=None, projection=True, lam=None, flags=None):
    """Weighted mean in ``F_alpha`` space, mapped back with ``F_{1/alpha}``."""
    x = _as_query(ds, x)
    flags = [] if flags is None else flags
    if lam is None:
        lam = (weights or WeightScheme()).weights(ds, x, flags)
    if alpha == 1:
        M = np.tensordot(lam, ds.laplacians, axes=1)
        raw = specmat.clip_psd(M, 0.0)
    else:
        F = specmat.matrix_power_batch(ds.laplacians, alpha)
        M = specmat.clip_psd(np.tensordot(lam, F, axes=1), 0.0)
        raw = specmat.matrix_power(M, 1.0 / alpha)
    return _report(x, lam, raw, projection, flags=flags)


def predict_wasserstein(ds, x, solver=None, weights=None, projection=True, lam=None,
                        flags=None, strict=False, backend=None):
    """Bures-Wasserstein barycenter of the pseudo-inverse Laplacians, pseudo-inverted.

    Non-convergence is reported through the ``"not_converged"`` flag and
    the attached solver report; the last iterate is still returned.
    """
    x = _as_query(ds, x)
    solver = solver or SolverConfig()
    flags = [] if flags is None else flags
    if lam is None:
        lam = (weights or WeightScheme()).weights(ds, x, flags)
    problem = bc.BarycenterProblem(
        ds.covariances, lam, variant=solver.variant, eps=solver.eps,
        tol=solver.tol, max_iter=solver.max_iter,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", bc.NotConvergedWarning)
        rep = bc.solve(problem, strict=strict, backend=backend)
    if not rep.converged:
        flags.append("not_converged")
    flags.extend(f for f in rep.flags if f not in flags)
    raw = specmat.pinv_psd(specmat.center(rep.result))
    return _report(x, lam, raw, projection, solver_report=rep, flags=flags)


def predict(ds, x, spec=None, **kw):
    """Dispatch on ``spec.metric`` and ``spec.weights``."""
    spec = spec or RegressorSpec()
    flags = []
    lam = spec.weights.weights(ds, _as_query(ds, x), flags)
    if spec.metric.kind == FROBENIUS:
        return predict_frobenius(ds, x, spec.metric.alpha, projection=spec.projection,
                                 lam=lam, flags=flags)
    return predict_wasserstein(ds, x, spec.solver, projection=spec.projection, lam=lam,
                               flags=flags, **kw)


def predict_many(ds, xs, spec=None, n_jobs=1, **kw):
    """:func:`predict` over a sequence of queries; results keep input order."""
    xs = [np.atleast_1d(np.asarray(x, dtype=np.float64)) for x in xs]
    if n_jobs == 1:
        return [predict(ds, x, spec, **kw) for x in xs]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(lambda x: predict(ds, x, spec, **kw), xs))


def weighted_objective(ds, report, metric):
    """``sum_i w_i d^2(G_i, prediction)`` on the raw prediction."""
    return math.fsum(
        float(w) * squared_distance_laplacians(metric, L, report.raw_laplacian)
        for w, L in zip(report.effective_weights, ds.laplacians)
    )
