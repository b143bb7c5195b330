# cython: language_level=3
"""Compiled inner loops.

Every function here has a drop-in twin in ``_kernels_py`` with the same
signature and the same floating point operation order where that matters.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, log

cnp.import_array()


def ma_filter(const double[::1] eta, const Py_ssize_t[::1] lags,
              const double[::1] weights, Py_ssize_t n_out):
    """out[t] = sum_k weights[k] * eta[t + L - lags[k]] with L = max(lags).

    ``eta`` must hold ``n_out + L`` innovations, oldest first.  Terms are
    accumulated in the order of ``lags``.
    """
    cdef Py_ssize_t n_taps = lags.shape[0]
    cdef Py_ssize_t L = 0
    cdef Py_ssize_t k, t
    for k in range(n_taps):
        if lags[k] > L:
            L = lags[k]
    if eta.shape[0] < n_out + L:
        raise ValueError("eta is shorter than n_out + max lag")
    out = np.zeros(n_out, dtype=np.float64)
    cdef double[::1] o = out
    cdef double acc
    with nogil:
        for t in range(n_out):
            acc = 0.0
            for k in range(n_taps):
                acc = acc + weights[k] * eta[t + L - lags[k]]
            o[t] = acc
    return out


def lp_candidates(const double[::1] a, const double[::1] b, double rtol,
                  double det_tol, double zero_tol):
    """Enumerate basic feasible solutions of the two-constraint covering LP.

    Returns ``(best, rows)`` where ``rows`` is an (m, 5) array of
    ``(i, j, kappa_i, kappa_j, objective)`` for every vertex whose objective
    is within ``rtol`` (relative) of the optimum.  Singletons carry ``j = -1``.
    """
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t i, j, pas
    cdef double best = np.inf
    cdef double ki, kj, det, obj, cut = np.inf
    rows = []
    for pas in range(2):
        if pas == 1:
            cut = best + rtol * best
        for i in range(n):
            if a[i] > 0.0 and b[i] > 0.0:
                ki = 1.0 / a[i]
                if 1.0 / b[i] > ki:
                    ki = 1.0 / b[i]
                if pas == 0:
                    if ki < best:
                        best = ki
                elif ki <= cut:
                    rows.append((i, -1, ki, 0.0, ki))
        for i in range(n):
            for j in range(i + 1, n):
                det = a[i] * b[j] - a[j] * b[i]
                if fabs(det) <= det_tol:
                    continue
                ki = (b[j] - a[j]) / det
                kj = (a[i] - b[i]) / det
                if ki <= zero_tol or kj <= zero_tol:
                    # negative: infeasible basis; ~0: duplicates a singleton vertex
                    continue
                obj = ki + kj
                if pas == 0:
                    if obj < best:
                        best = obj
                elif obj <= cut:
                    rows.append((i, j, ki, kj, obj))
    if not rows:
        return best, np.empty((0, 5), dtype=np.float64)
    return best, np.asarray(rows, dtype=np.float64)


cdef inline double _g(double z, double log_k, double beta, double log_p) nogil:
    if beta == 0.0:
        return log_k - z - log_p
    return log_k + beta * log(z) - z - log_p


def custom_tail_quantile(const double[::1] p, double log_k, double beta,
                         double z0, double rtol):
    """Solve K z^beta e^{-z} = p for z >= z0, elementwise.

    Safeguarded Newton: each iterate stays inside a shrinking bisection
    bracket, so convergence never depends on the starting point.
    """
    cdef Py_ssize_t n = p.shape[0]
    cdef Py_ssize_t m, it
    cdef double lo, hi, z, znew, gz, dg, lp, width
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for m in range(n):
            lp = log(p[m])
            lo = z0
            width = 1.0
            hi = z0 + width
            while _g(hi, log_k, beta, lp) >= 0.0:
                lo = hi
                width = 2.0 * width
                hi = z0 + width
            z = 0.5 * (lo + hi)
            for it in range(200):
                gz = _g(z, log_k, beta, lp)
                if gz > 0.0:
                    lo = z
                else:
                    hi = z
                dg = beta / z - 1.0
                if dg < 0.0:
                    znew = z - gz / dg
                else:
                    znew = 0.5 * (lo + hi)
                if not (znew > lo and znew < hi):
                    znew = 0.5 * (lo + hi)
                if fabs(znew - z) <= rtol * fabs(znew) or hi - lo <= rtol * fabs(hi):
                    z = znew
                    break
                z = znew
            o[m] = z
    return out
