"""Weighted Bures-Wasserstein barycenters of centered Gaussians.

Three fixed-point solvers share one driver:

``plain``
    ``S <- S^-1/2 (sum_i w_i (S^1/2 C_i S^1/2)^1/2)^2 S^-1/2``; needs at
    least one positive definite input.
``shifted``
    The plain iteration on ``C_i + J/k`` (``J`` the all-ones matrix),
    followed by double-centering.  Valid when every ``C_i`` annihilates the
    ones vector, as Laplacian pseudo-inverses do.
``entropic``
    ``S <- (eps/4) sum_i w_i (-I + (I + 16/eps^2 S^1/2 C_i S^1/2)^1/2)``.

Weights must sum to one but may be negative (affine combinations).  No
convergence guarantee exists in that regime, so iterates are watched for
genuinely negative directions and the solve is aborted rather than
silently repaired.
"""

import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _backend, specmat
from .errors import DimensionMismatch, DivergedNegativeEigenvalue, NotConverged, ValidationError

log = logging.getLogger(__name__)

PLAIN = "plain"
SHIFTED = "shifted"
ENTROPIC = "entropic"
VARIANTS = (PLAIN, SHIFTED, ENTROPIC)

# eigenvalues above -NOISE_REL * ||S_t||_F are rounding noise and get clamped
NOISE_REL = 1e-6


class NotConvergedWarning(RuntimeWarning):
    pass


@dataclass
class BarycenterProblem:
    covariances: np.ndarray
    weights: np.ndarray
    variant: str = SHIFTED
    eps: float = 1e-5
    tol: float = 1e-8
    max_iter: int = 500
    init: np.ndarray | None = None
    rank_tol: float | None = None

    def __post_init__(self):
        C = np.asarray(self.covariances, dtype=np.float64)
        if C.ndim == 2:
            C = C[None]
        if C.ndim != 3 or C.shape[1] != C.shape[2] or C.shape[0] < 1:
            raise DimensionMismatch(f"covariances must be a (n, k, k) stack, got {C.shape}")
        w = np.atleast_1d(np.asarray(self.weights, dtype=np.float64))
        if w.shape != (C.shape[0],):
            raise DimensionMismatch(f"{C.shape[0]} covariances but {w.size} weights")
        if not np.all(np.isfinite(C)) or not np.all(np.isfinite(w)):
            raise ValidationError("covariances and weights must be finite")
        if abs(w.sum() - 1.0) >= 1e-12 * max(1.0, np.abs(w).sum()):
            raise ValidationError(f"weights must sum to 1, got {w.sum()!r}")
        if self.variant not in VARIANTS:
            raise ValidationError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.variant == ENTROPIC and not self.eps > 0:
            raise ValidationError("entropic variant needs eps > 0")
        if not self.tol > 0 or self.max_iter < 1:
            raise ValidationError("tol must be positive and max_iter at least 1")
        C = 0.5 * (C + np.swapaxes(C, 1, 2))
        for i, c in enumerate(C):
            ev = np.linalg.eigvalsh(c)
            thr = (self.rank_tol or specmat.default_rank_tol(c.shape[0])) * max(np.abs(ev).max(), 0)
            if ev[0] < -thr:
                raise ValidationError(f"covariance {i} is not PSD (min eigenvalue {ev[0]:.3e})")
        self.covariances = C
        self.weights = w
        if self.init is not None:
            self.init = specmat.as_sym(self.init, "init")
            if self.init.shape != C.shape[1:]:
                raise DimensionMismatch("init has the wrong shape")

    @property
    def dim(self):
        return self.covariances.shape[1]


@dataclass
class SolveReport:
    result: np.ndarray
    iterations: int
    residuals: list
    converged: bool
    variant: str
    requested_variant: str
    wall_time: float
    flags: list = field(default_factory=list)

    def to_dict(self):
        return {
            "variant": self.variant,
            "requested_variant": self.requested_variant,
            "iterations": self.iterations,
            "converged": self.converged,
            "residuals": [float(r) for r in self.residuals],
            "wall_time": self.wall_time,
            "flags": list(self.flags),
        }


def residual(S_t, S_next):
    """Relative step size ``||S_next - S_t||_F / max(1, ||S_t||_F)``."""
    S_t = np.asarray(S_t, dtype=np.float64)
    return float(np.linalg.norm(np.asarray(S_next) - S_t) / max(1.0, np.linalg.norm(S_t)))


def default_init(covariances, weights):
    """Arithmetic mean over the non-negative weights, renormalized, clipped PSD."""
    pos = np.clip(weights, 0.0, None)
    total = pos.sum()
    if total <= 0:
        pos = np.full_like(weights, 1.0 / len(weights))
        total = 1.0
    S0 = np.tensordot(pos / total, covariances, axes=1)
    return specmat.clip_psd(S0, 0.0)


def _sym(S):
    return 0.5 * (S + S.T)


def _eig_guard(S, scale, what, report_args):
    """Clamp rounding-level negative eigenvalues; abort on genuine ones."""
    w, U = np.linalg.eigh(_sym(S))
    if w[0] >= 0:
        return _sym(S), w, U
    if w[0] < -NOISE_REL * scale:
        report = SolveReport(**report_args)
        raise DivergedNegativeEigenvalue(
            f"{what} has eigenvalue {w[0]:.3e} (scale {scale:.3e}); affine combination left the PSD cone",
            report,
        )
    w = np.maximum(w, 0.0)
    return _sym((U * w) @ U.T), w, U


def _is_pd(C, rank_tol):
    ev = np.linalg.eigvalsh(C)
    thr = (rank_tol or specmat.default_rank_tol(C.shape[0])) * max(np.abs(ev).max(), 0)
    return ev[0] > thr


def _iterate(problem, C, step, S0, kern, variant, requested, flags, t0):
    S = S0
    residuals = []
    converged = False
    for t in range(problem.max_iter):
        scale = max(np.linalg.norm(S), np.finfo(float).tiny)
        args = dict(
            result=S,
            iterations=t,
            residuals=residuals,
            converged=False,
            variant=variant,
            requested_variant=requested,
            wall_time=time.perf_counter() - t0,
            flags=flags,
        )
        S_next = step(S, C, kern, scale, args)
        r = residual(S, S_next)
        residuals.append(r)
        S = S_next
        if r <= problem.tol:
            converged = True
            break
    return S, residuals, converged


def _plain_step(weights, rank_tol):
    def step(S, C, kern, scale, args):
        S, w, U = _eig_guard(S, scale, "iterate", args)
        thr = (rank_tol or specmat.default_rank_tol(len(w))) * max(w[-1], 0)
        keep = w > thr
        root = np.sqrt(w)
        S_half = _sym((U * root) @ U.T)
        inv_root = np.zeros_like(w)
        inv_root[keep] = 1.0 / root[keep]
        S_mhalf = _sym((U * inv_root) @ U.T)
        M = _sym(kern.bw_sqrt_sum(S_half, C, weights))
        # M is squared below, so a genuinely indefinite M would be hidden
        _eig_guard(M, scale, "weighted root sum", args)
        return _sym(S_mhalf @ M @ M @ S_mhalf)

    return step


def _entropic_step(weights, eps):
    def step(S, C, kern, scale, args):
        S, w, U = _eig_guard(S, scale, "iterate", args)
        S_half = _sym((U * np.sqrt(w)) @ U.T)
        S_next = _sym(kern.entropic_sum(S_half, C, weights, eps))
        S_next, _, _ = _eig_guard(S_next, scale, "iterate", args)
        return S_next

    return step


def _centered(C, tol=1e-9):
    ones = np.ones(C.shape[1])
    return all(np.linalg.norm(c @ ones) <= tol * max(1.0, np.linalg.norm(c)) for c in C)


def _finish(problem, S, residuals, converged, variant, flags, t0, strict):
    report = SolveReport(
        result=S,
        iterations=len(residuals),
        residuals=residuals,
        converged=converged,
        variant=variant,
        requested_variant=problem.variant,
        wall_time=time.perf_counter() - t0,
        flags=flags,
    )
    if not converged:
        msg = (
            f"{variant} barycenter did not reach tol={problem.tol:g} in {problem.max_iter} "
            f"iterations (last residual {residuals[-1]:.3e})"
        )
        if strict:
            raise NotConverged(msg, report)
        warnings.warn(msg, NotConvergedWarning, stacklevel=3)
    return report


def _run_plain(problem, C, S0, kern, variant, flags, t0):
    step = _plain_step(problem.weights, problem.rank_tol)
    return _iterate(problem, C, step, S0, kern, variant, problem.variant, flags, t0)


def solve(problem, strict=False, backend=None):
    """Solve with the problem's variant; see the module docstring.

    A plain problem without any positive definite input is rerouted to the
    shifted variant and flagged.  A report with ``converged=False`` is
    returned (with a :class:`NotConvergedWarning`) when ``max_iter`` runs
    out, unless ``strict`` is set, in which case :class:`NotConverged` is
    raised with the report attached.
    """
    if problem.variant == SHIFTED:
        return solve_shifted(problem, strict, backend)
    if problem.variant == ENTROPIC:
        return solve_entropic(problem, strict, backend)
    t0 = time.perf_counter()
    C = problem.covariances
    if not any(_is_pd(c, problem.rank_tol) for c in C):
        log.info("no positive definite input; rerouting plain solve to shifted")
        return solve_shifted(problem, strict, backend, flags=["rerouted_to_shifted"])
    kern = _backend.get(backend)
    S0 = default_init(C, problem.weights) if problem.init is None else problem.init
    S, res, ok = _run_plain(problem, C, S0, kern, PLAIN, [], t0)
    return _finish(problem, S, res, ok, PLAIN, [], t0, strict)


def solve_shifted(problem, strict=False, backend=None, flags=None):
    t0 = time.perf_counter()
    flags = list(flags or [])
    kern = _backend.get(backend)
    C = problem.covariances
    k = problem.dim
    shift = np.full((k, k), 1.0 / k)
    if k > 1 and _centered(C):
        Cs = C + shift
        if problem.init is None:
            S0 = default_init(Cs, problem.weights)
        else:
            S0 = specmat.center(problem.init) + shift
        S, res, ok = _run_plain(problem, Cs, S0, kern, SHIFTED, flags, t0)
        S = specmat.center(S)
    else:
        # the shift only commutes with inputs that annihilate the ones vector
        flags.append("shift_skipped_uncentered_inputs")
        S0 = default_init(C, problem.weights) if problem.init is None else problem.init
        S, res, ok = _run_plain(problem, C, S0, kern, SHIFTED, flags, t0)
    return _finish(problem, S, res, ok, SHIFTED, flags, t0, strict)


def solve_entropic(problem, strict=False, backend=None):
    t0 = time.perf_counter()
    kern = _backend.get(backend)
    C = problem.covariances
    S0 = default_init(C, problem.weights) if problem.init is None else problem.init
    step = _entropic_step(problem.weights, problem.eps)
    S, res, ok = _iterate(problem, C, step, S0, kern, ENTROPIC, problem.variant, [], t0)
    return _finish(problem, S, res, ok, ENTROPIC, [], t0, strict)


def fixed_point_map(problem, S, backend=None):
    """Right-hand side of the variant's defining equation evaluated at ``S``.

    For plain and shifted this is ``sum_i w_i (S^1/2 C_i S^1/2)^1/2`` (on the
    shifted inputs for ``shifted``, then centered); for entropic it is the
    regularized map itself.
    """
    kern = _backend.get(backend)
    C = problem.covariances
    S = specmat.clip_psd(S, 0.0)
    if problem.variant == ENTROPIC:
        S_half = specmat.psd_sqrt(S)
        return _sym(kern.entropic_sum(S_half, C, problem.weights, problem.eps))
    k = problem.dim
    if problem.variant == SHIFTED and k > 1 and _centered(C):
        shift = np.full((k, k), 1.0 / k)
        Ss = S + shift
        M = kern.bw_sqrt_sum(specmat.psd_sqrt(Ss), C + shift, problem.weights)
        return specmat.center(M)
    return _sym(kern.bw_sqrt_sum(specmat.psd_sqrt(S), C, problem.weights))


def fixed_point_residual(problem, S, backend=None):
    """``residual(S, fixed_point_map(S))``: zero exactly at a fixed point."""
    return residual(S, fixed_point_map(problem, S, backend))
