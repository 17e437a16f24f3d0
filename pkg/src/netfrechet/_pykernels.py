"""Pure-NumPy reference kernels.

Same call signatures and results (to rounding) as the compiled
``_kernels`` module; used whenever the extension is unavailable or the
``NETFRECHET_PURE_PYTHON`` environment variable is set.
"""

import numpy as np

NAME = "python"


def _apply(inner, f, cutoff=0.0):
    w, U = np.linalg.eigh(inner)
    lam = np.clip(w, 0.0, None)
    if cutoff > 0:
        floor = cutoff * np.abs(w).max(axis=-1, keepdims=True)
        lam = np.where(w > floor, lam, 0.0)
    vals = f(lam)
    return (U * vals[..., None, :]) @ np.swapaxes(U, -1, -2), w


def psd_funcm(mats, power, cutoff=0.0):
    """Apply ``lam -> max(lam, 0) ** power`` to each matrix in a (m, k, k) stack.

    Eigenvalues at or below ``cutoff * max|lam|`` are treated as 0.  Returns the transformed stack and the raw (unclamped) ascending
    eigenvalues, shape (m, k).
    """
    mats = np.ascontiguousarray(mats, dtype=np.float64)
    return _apply(mats, lambda lam: lam**power, cutoff)


def _conjugated(s_half, covs):
    inner = s_half @ np.ascontiguousarray(covs, dtype=np.float64) @ s_half
    return 0.5 * (inner + np.swapaxes(inner, -1, -2))


def bw_sqrt_sum(s_half, covs, weights):
    """``sum_i w_i (S^1/2 C_i S^1/2)^1/2`` with inner eigenvalues clamped at 0."""
    terms, _ = _apply(_conjugated(s_half, covs), np.sqrt)
    return np.tensordot(np.asarray(weights, dtype=np.float64), terms, axes=1)


def entropic_sum(s_half, covs, weights, eps):
    """``(eps/4) sum_i w_i (-I + (I + 16/eps^2 S^1/2 C_i S^1/2)^1/2)``.

    ``-1 + sqrt(1 + c mu)`` is evaluated as ``c mu / (1 + sqrt(1 + c mu))``
    to avoid cancellation for small ``mu``.
    """
    c = 16.0 / (eps * eps)

    def g(mu):
        cm = c * mu
        return cm / (1.0 + np.sqrt(1.0 + cm))

    terms, _ = _apply(_conjugated(s_half, covs), g)
    return (eps / 4.0) * np.tensordot(np.asarray(weights, dtype=np.float64), terms, axes=1)
