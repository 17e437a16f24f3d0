# Compiled kernels for the barycenter fixed-point step.
#
# Each kernel performs a batch of small symmetric eigendecompositions
# (LAPACK dsyevd) and rebuilds U f(Lambda) U^T with BLAS, without returning
# to the interpreter between matrices.  Symmetric inputs make row-major and
# column-major storage interchangeable, which the BLAS calls rely on.

from libc.math cimport sqrt, pow
from libc.string cimport memcpy
from scipy.linalg.cython_blas cimport dgemm
from scipy.linalg.cython_lapack cimport dsyevd

import numpy as np

NAME = "cython"

cdef enum:
    F_POWER = 0
    F_SQRT = 1
    F_ENTROPIC = 2


cdef inline double _f(int mode, double lam, double param, double floor) nogil:
    if lam <= floor:
        return 0.0
    if mode == F_SQRT:
        return sqrt(lam)
    if mode == F_POWER:
        return pow(lam, param)
    # F_ENTROPIC: -1 + sqrt(1 + c lam), cancellation-free
    lam = param * lam
    return lam / (1.0 + sqrt(1.0 + lam))


cdef int _eig_apply(double* a, int k, double* w, double* work, int lwork,
                    int* iwork, int liwork, double* tmp, double* out,
                    int mode, double param, double scale, double beta, double cutoff) nogil:
    """out := beta*out + scale * U f(w) U^T; ``a`` is overwritten by U.

    Eigenvalues at or below ``cutoff * max|w|`` map to 0.
    """
    cdef char jobz = b'V'
    cdef char uplo = b'L'
    cdef char tn = b'N'
    cdef char tt = b'T'
    cdef int info = 0
    cdef int i, j
    cdef double sf, floor
    dsyevd(&jobz, &uplo, &k, a, &k, w, work, &lwork, iwork, &liwork, &info)
    if info != 0:
        return info
    # ascending order: the largest magnitude sits at one end
    floor = cutoff * max(-w[0], w[k - 1])
    for j in range(k):
        sf = sqrt(_f(mode, w[j], param, floor))
        for i in range(k):
            tmp[j * k + i] = a[j * k + i] * sf
    dgemm(&tn, &tt, &k, &k, &k, &scale, tmp, &k, tmp, &k, &beta, out, &k)
    return 0


cdef class _Work:
    cdef double[::1] a, w, work, tmp, tmp2
    cdef int[::1] iwork
    cdef int k, lwork, liwork

    def __init__(self, int k):
        self.k = k
        self.lwork = 1 + 6 * k + 2 * k * k
        self.liwork = 3 + 5 * k
        self.a = np.empty(k * k)
        self.w = np.empty(k)
        self.work = np.empty(self.lwork)
        self.tmp = np.empty(k * k)
        self.tmp2 = np.empty(k * k)
        self.iwork = np.empty(self.liwork, dtype=np.intc)


def psd_funcm(mats, double power, double cutoff=0.0):
    """Apply ``lam -> max(lam, 0) ** power`` to each matrix of a (m, k, k) stack.

    Eigenvalues at or below ``cutoff * max|lam|`` are treated as 0.

    Returns ``(out, eigenvalues)`` like the NumPy fallback.
    """
    cdef double[:, :, ::1] src = np.ascontiguousarray(mats, dtype=np.float64)
    cdef Py_ssize_t m = src.shape[0]
    cdef int k = <int>src.shape[1]
    out_arr = np.empty((m, k, k))
    evals_arr = np.empty((m, k))
    cdef double[:, :, ::1] out = out_arr
    cdef double[:, ::1] evals = evals_arr
    cdef _Work ws = _Work(k)
    cdef Py_ssize_t i
    cdef int info = 0
    cdef int mode = F_SQRT if power == 0.5 else F_POWER
    with nogil:
        for i in range(m):
            memcpy(&ws.a[0], &src[i, 0, 0], k * k * sizeof(double))
            info = _eig_apply(&ws.a[0], k, &evals[i, 0], &ws.work[0], ws.lwork,
                              &ws.iwork[0], ws.liwork, &ws.tmp[0], &out[i, 0, 0],
                              mode, power, 1.0, 0.0, cutoff)
            if info != 0:
                break
    if info != 0:
        raise np.linalg.LinAlgError(f"dsyevd failed (info={info})")
    return out_arr, evals_arr


cdef object _conj_sum(s_half, covs, weights, int mode, double param, double scale):
    cdef double[:, ::1] sh = np.ascontiguousarray(s_half, dtype=np.float64)
    cdef double[:, :, ::1] cs = np.ascontiguousarray(covs, dtype=np.float64)
    cdef double[::1] lam = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t n = cs.shape[0]
    cdef int k = <int>sh.shape[0]
    if cs.shape[1] != k or cs.shape[2] != k or lam.shape[0] != n:
        raise ValueError("shape mismatch between S^1/2, covariances and weights")
    out_arr = np.zeros((k, k))
    cdef double[:, ::1] out = out_arr
    cdef _Work ws = _Work(k)
    cdef char tn = b'N'
    cdef double one = 1.0
    cdef double zero = 0.0
    cdef Py_ssize_t i
    cdef int info = 0
    with nogil:
        for i in range(n):
            # tmp2 = S^1/2 C_i ; a = tmp2 S^1/2
            dgemm(&tn, &tn, &k, &k, &k, &one, &sh[0, 0], &k, &cs[i, 0, 0], &k,
                  &zero, &ws.tmp2[0], &k)
            dgemm(&tn, &tn, &k, &k, &k, &one, &ws.tmp2[0], &k, &sh[0, 0], &k,
                  &zero, &ws.a[0], &k)
            info = _eig_apply(&ws.a[0], k, &ws.w[0], &ws.work[0], ws.lwork,
                              &ws.iwork[0], ws.liwork, &ws.tmp[0], &out[0, 0],
                              mode, param, scale * lam[i], 1.0, 0.0)
            if info != 0:
                break
    if info != 0:
        raise np.linalg.LinAlgError(f"dsyevd failed (info={info})")
    return out_arr


def bw_sqrt_sum(s_half, covs, weights):
    """``sum_i w_i (S^1/2 C_i S^1/2)^1/2`` with inner eigenvalues clamped at 0."""
    return _conj_sum(s_half, covs, weights, F_SQRT, 0.0, 1.0)


def entropic_sum(s_half, covs, weights, double eps):
    """``(eps/4) sum_i w_i (-I + (I + 16/eps^2 S^1/2 C_i S^1/2)^1/2)``."""
    return _conj_sum(s_half, covs, weights, F_ENTROPIC, 16.0 / (eps * eps), eps / 4.0)
