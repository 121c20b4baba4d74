# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-step hot kernels.

Mirrors the API of ``subtrack._core_numpy``. The least-squares solve uses
normal equations with an unblocked Cholesky, falling back to LAPACK lstsq
(min-norm semantics) when the Gram matrix is not safely positive definite.
Norm accumulations use Kahan summation so the compiled and numpy backends
agree to a few ulp.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

NAME = "compiled"

# Pivots below this fraction of the largest Gram diagonal are treated as
# rank deficiency and routed to the LAPACK min-norm path.
cdef double _PIVOT_RTOL = 1e-11


cdef inline double _kahan_add(double* s, double* c, double x) noexcept nogil:
    cdef double y = x - c[0]
    cdef double t = s[0] + y
    c[0] = (t - s[0]) - y
    s[0] = t
    return s[0]


cdef int _chol_solve(double[:, ::1] gram, double[::1] rhs, double[::1] out) noexcept nogil:
    """Solve gram @ out = rhs via Cholesky; nonzero return means fall back."""
    cdef Py_ssize_t d = gram.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double acc, maxdiag
    maxdiag = 0.0
    for i in range(d):
        if gram[i, i] > maxdiag:
            maxdiag = gram[i, i]
    if maxdiag <= 0.0:
        return 1
    # lower factor written into the lower triangle of gram
    for j in range(d):
        acc = gram[j, j]
        for k in range(j):
            acc -= gram[j, k] * gram[j, k]
        if acc <= _PIVOT_RTOL * maxdiag:
            return 1
        gram[j, j] = sqrt(acc)
        for i in range(j + 1, d):
            acc = gram[i, j]
            for k in range(j):
                acc -= gram[i, k] * gram[j, k]
            gram[i, j] = acc / gram[j, j]
    # forward then backward substitution
    for i in range(d):
        acc = rhs[i]
        for k in range(i):
            acc -= gram[i, k] * out[k]
        out[i] = acc / gram[i, i]
    for i in range(d - 1, -1, -1):
        acc = out[i]
        for k in range(i + 1, d):
            acc -= gram[k, i] * out[k]
        out[i] = acc / gram[i, i]
    return 0


def solve_restricted(double[:, ::1] basis, cnp.int64_t[::1] omega, double[::1] values):
    """Min-norm least-squares coefficients for basis rows ``omega`` vs ``values``."""
    cdef Py_ssize_t d = basis.shape[1]
    cdef Py_ssize_t m = omega.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] gram_arr = np.empty((d, d))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] rhs_arr = np.empty(d)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_arr = np.empty(d)
    cdef double[:, ::1] gram = gram_arr
    cdef double[::1] rhs = rhs_arr
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j, k, row
    cdef double acc
    cdef int fail
    with nogil:
        for i in range(d):
            acc = 0.0
            for k in range(m):
                acc += basis[omega[k], i] * values[k]
            rhs[i] = acc
            for j in range(i, d):
                acc = 0.0
                for k in range(m):
                    row = omega[k]
                    acc += basis[row, i] * basis[row, j]
                gram[i, j] = acc
                gram[j, i] = acc
        fail = _chol_solve(gram, rhs, out)
    if fail:
        sub = np.asarray(basis)[np.asarray(omega)]
        out_arr, *_ = np.linalg.lstsq(sub, np.asarray(values), rcond=None)
    return out_arr


def predict_and_residual(double[:, ::1] basis, cnp.int64_t[::1] omega,
                         double[::1] values, double[::1] w):
    """Prediction, masked residual and their norms.

    Returns ``(p, r, w_norm, p_norm, r_norm)``.
    """
    cdef Py_ssize_t n = basis.shape[0]
    cdef Py_ssize_t d = basis.shape[1]
    cdef Py_ssize_t m = omega.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] p_arr = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] r_arr = np.zeros(n)
    cdef double[::1] p = p_arr
    cdef double[::1] r = r_arr
    cdef Py_ssize_t i, j, k, row
    cdef double acc, resid
    cdef double p_sq = 0.0, r_sq = 0.0, w_sq = 0.0
    cdef double cp = 0.0, cr = 0.0, cw = 0.0
    with nogil:
        for i in range(n):
            acc = 0.0
            for j in range(d):
                acc += basis[i, j] * w[j]
            p[i] = acc
            _kahan_add(&p_sq, &cp, acc * acc)
        for k in range(m):
            row = omega[k]
            resid = values[k] - p[row]
            r[row] = resid
            _kahan_add(&r_sq, &cr, resid * resid)
        for j in range(d):
            _kahan_add(&w_sq, &cw, w[j] * w[j])
    return p_arr, r_arr, sqrt(w_sq), sqrt(p_sq), sqrt(r_sq)


def apply_rotation_step(double[:, ::1] basis, double[::1] p, double[::1] r,
                        double[::1] w, double cos_t, double sin_t,
                        double p_norm, double r_norm, double w_norm):
    """In-place rank-one rotation update of ``basis``."""
    cdef Py_ssize_t n = basis.shape[0]
    cdef Py_ssize_t d = basis.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ws_arr = np.empty(d)
    cdef double[::1] ws = ws_arr
    cdef Py_ssize_t i, j
    cdef double ca = (cos_t - 1.0) / p_norm
    cdef double sa = sin_t / r_norm
    cdef double coeff
    with nogil:
        for j in range(d):
            ws[j] = w[j] / w_norm
        for i in range(n):
            coeff = ca * p[i] + sa * r[i]
            for j in range(d):
                basis[i, j] += coeff * ws[j]


def gram_identity_error(double[:, ::1] basis):
    """Frobenius norm of ``basis.T @ basis - I``."""
    cdef Py_ssize_t n = basis.shape[0]
    cdef Py_ssize_t d = basis.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double acc, diff
    cdef double total = 0.0
    with nogil:
        for i in range(d):
            for j in range(i, d):
                acc = 0.0
                for k in range(n):
                    acc += basis[k, i] * basis[k, j]
                if i == j:
                    diff = acc - 1.0
                    total += diff * diff
                else:
                    total += 2.0 * acc * acc
    return sqrt(total)
