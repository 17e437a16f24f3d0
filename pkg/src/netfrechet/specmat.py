"""Spectral operations on real symmetric matrices.

Everything here works on plain ``numpy.ndarray`` values: inputs are
validated and symmetrized, outputs are fresh arrays.  Rank and PSD
decisions use a *relative* threshold ``rank_tol * max|eigenvalue|`` with
``rank_tol`` defaulting to ``1e-10 * dim``.
"""

from typing import NamedTuple

import numpy as np

from . import _backend
from .errors import InvalidMatrix, NotPSD


class EigenPair(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_sym(S, name="matrix"):
    """Validate a square finite matrix and return its symmetric part."""
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1] or S.shape[0] < 1:
        raise InvalidMatrix(f"{name} must be a non-empty square matrix, got shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise InvalidMatrix(f"{name} has non-finite entries")
    return 0.5 * (S + S.T)


def default_rank_tol(dim):
    return 1e-10 * dim


def _threshold(evals, rank_tol):
    rel = default_rank_tol(evals.shape[-1]) if rank_tol is None else rank_tol
    return rel * max(float(np.max(np.abs(evals))), 0.0)


def eigh(S):
    """Eigendecomposition with eigenvalues in ascending order."""
    w, U = np.linalg.eigh(as_sym(S))
    return EigenPair(w, U)


def _check_psd(evals, rank_tol, name="matrix"):
    thr = _threshold(evals, rank_tol)
    lo = float(evals.min())
    if lo < -thr:
        raise NotPSD(f"{name} has eigenvalue {lo:.3e} below -{thr:.3e}")


def _cutoff(dim, rank_tol):
    return default_rank_tol(dim) if rank_tol is None else rank_tol


def matrix_power(S, alpha, rank_tol=None):
    """``U diag(lam**alpha) U^T`` for PSD ``S``.

    Eigenvalues within the rank threshold of zero (either sign) are set to
    0 before powering, so rounding noise in null directions is not
    amplified by fractional powers.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    S = as_sym(S)
    out, evals = _backend.kernels.psd_funcm(S[None], float(alpha), _cutoff(S.shape[0], rank_tol))
    _check_psd(evals[0], rank_tol)
    return out[0]


def matrix_power_batch(mats, alpha, rank_tol=None):
    """:func:`matrix_power` over a (m, k, k) stack in one kernel call."""
    mats = np.asarray(mats, dtype=np.float64)
    mats = 0.5 * (mats + np.swapaxes(mats, -1, -2))
    out, evals = _backend.kernels.psd_funcm(mats, float(alpha), _cutoff(mats.shape[-1], rank_tol))
    for i, ev in enumerate(evals):
        _check_psd(ev, rank_tol, name=f"matrix {i}")
    return out


def psd_sqrt(S, rank_tol=None):
    return matrix_power(S, 0.5, rank_tol)


def pinv_psd(S, rank_tol=None):
    """Moore-Penrose pseudo-inverse of a PSD matrix.

    Eigenvalues at or below ``rank_tol * max eigenvalue`` are treated as
    exact zeros.
    """
    w, U = eigh(S)
    _check_psd(w, rank_tol)
    thr = _threshold(w, rank_tol)
    keep = w > thr
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / w[keep]
    out = (U * inv) @ U.T
    return 0.5 * (out + out.T)


def center(S):
    """Double-center: ``P S P`` with ``P = I - J/dim``."""
    S = as_sym(S)
    r = S.mean(axis=1)
    out = S - r[:, None] - r[None, :] + r.mean()
    return 0.5 * (out + out.T)


def clip_psd(S, floor=0.0):
    """Raise every eigenvalue below ``floor`` up to ``floor``."""
    if floor < 0:
        raise ValueError("floor must be non-negative")
    S = as_sym(S)
    w, U = np.linalg.eigh(S)
    if w[0] >= floor:
        return S
    out = (U * np.maximum(w, floor)) @ U.T
    return 0.5 * (out + out.T)


def write_dense(S, fh):
    """Write the dense text format: ``dim`` line, then one row per line."""
    S = np.asarray(S, dtype=np.float64)
    fh.write(f"{S.shape[0]}\n")
    for row in S:
        fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def read_dense(fh):
    lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise InvalidMatrix("empty dense matrix file")
    dim = int(lines[0])
    if len(lines) - 1 != dim:
        raise InvalidMatrix(f"expected {dim} rows, found {len(lines) - 1}")
    S = np.array([[float(v) for v in ln.split()] for ln in lines[1:]])
    if S.shape != (dim, dim):
        raise InvalidMatrix(f"expected {dim}x{dim} entries, got {S.shape}")
    return S
