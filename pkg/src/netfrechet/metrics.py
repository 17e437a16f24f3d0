"""Power-Frobenius and 2-Wasserstein distances between graphs.

Both metrics are available on :class:`~netfrechet.graphcore.Graph` values
and, for internal use by regression and evaluation, directly on Laplacian
matrices (which need not come from a valid graph).
"""

from dataclasses import dataclass

import numpy as np

from . import specmat
from .errors import DimensionMismatch
from .graphcore import laplacian

FROBENIUS = "frobenius"
WASSERSTEIN = "wasserstein"


@dataclass(frozen=True)
class MetricSpec:
    kind: str = FROBENIUS
    alpha: float = 1.0
    rank_tol: float | None = None

    def __post_init__(self):
        if self.kind not in (FROBENIUS, WASSERSTEIN):
            raise ValueError(f"unknown metric {self.kind!r}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    @classmethod
    def frobenius(cls, alpha=1.0):
        return cls(FROBENIUS, alpha)

    @classmethod
    def wasserstein(cls):
        return cls(WASSERSTEIN)

    @property
    def label(self):
        if self.kind == WASSERSTEIN:
            return "wasserstein"
        return "frobenius" if self.alpha == 1 else f"frobenius(alpha={self.alpha:g})"

    def to_dict(self):
        return {"kind": self.kind, "alpha": self.alpha}


def _same_size(A, B):
    if A.shape != B.shape:
        raise DimensionMismatch(f"sizes differ: {A.shape} vs {B.shape}")


def bures_wasserstein_sq(A, B, rank_tol=None):
    """``tr A + tr B - 2 tr (A^1/2 B A^1/2)^1/2`` for PSD ``A``, ``B``.

    Values below the rounding floor of the trace expression (including
    negative ones) are returned as exactly 0, so ``d(A, A) == 0``.
    """
    A = specmat.as_sym(A)
    B = specmat.as_sym(B)
    _same_size(A, B)
    Ah = specmat.psd_sqrt(A, rank_tol)
    inner = specmat.clip_psd(Ah @ B @ Ah, 0.0)
    cross = np.trace(specmat.psd_sqrt(inner))
    total = float(np.trace(A) + np.trace(B))
    d2 = total - 2.0 * float(cross)
    noise = 64.0 * np.finfo(float).eps * A.shape[0] * abs(total)
    return d2 if d2 > noise else 0.0


def frobenius_power_distance_laplacians(L1, L2, alpha=1.0, rank_tol=None):
    L1 = np.asarray(L1, dtype=np.float64)
    L2 = np.asarray(L2, dtype=np.float64)
    _same_size(L1, L2)
    if alpha == 1:
        return float(np.linalg.norm(specmat.as_sym(L1) - specmat.as_sym(L2)))
    F1 = specmat.matrix_power(L1, alpha, rank_tol)
    F2 = specmat.matrix_power(L2, alpha, rank_tol)
    return float(np.linalg.norm(F1 - F2))


def frobenius_power_distance(G1, G2, alpha=1.0, rank_tol=None):
    """``|| F_alpha(L1) - F_alpha(L2) ||_F``."""
    if G1.n != G2.n:
        raise DimensionMismatch(f"node counts differ: {G1.n} vs {G2.n}")
    return frobenius_power_distance_laplacians(laplacian(G1), laplacian(G2), alpha, rank_tol)


def wasserstein_distance_sq(G1, G2, rank_tol=None):
    """Squared 2-Wasserstein distance between N(0, L1^+) and N(0, L2^+)."""
    if G1.n != G2.n:
        raise DimensionMismatch(f"node counts differ: {G1.n} vs {G2.n}")
    return wasserstein_sq_laplacians(laplacian(G1), laplacian(G2), rank_tol)


def wasserstein_sq_laplacians(L1, L2, rank_tol=None):
    L1 = np.asarray(L1, dtype=np.float64)
    L2 = np.asarray(L2, dtype=np.float64)
    _same_size(L1, L2)
    return bures_wasserstein_sq(
        specmat.pinv_psd(L1, rank_tol), specmat.pinv_psd(L2, rank_tol), rank_tol
    )


def squared_distance_laplacians(spec, L1, L2):
    if spec.kind == WASSERSTEIN:
        return wasserstein_sq_laplacians(L1, L2, spec.rank_tol)
    return frobenius_power_distance_laplacians(L1, L2, spec.alpha, spec.rank_tol) ** 2


def squared_distance(spec, G1, G2):
    if G1.n != G2.n:
        raise DimensionMismatch(f"node counts differ: {G1.n} vs {G2.n}")
    return squared_distance_laplacians(spec, laplacian(G1), laplacian(G2))


def distance(spec, G1, G2):
    return float(np.sqrt(squared_distance(spec, G1, G2)))
