# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the loops in ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, fmod, M_PI

cnp.import_array()

DEF OPTIMAL = 0
DEF UNBOUNDED = 1
DEF ITERATION_LIMIT = 2
DEF HARRIS_SLACK = 1e-9  # infeasibility allowed per ratio test

STATUS_OPTIMAL = OPTIMAL
STATUS_UNBOUNDED = UNBOUNDED
STATUS_ITERATION_LIMIT = ITERATION_LIMIT


cdef inline double _wrap(double x) noexcept nogil:
    cdef double y = fmod(x + M_PI, 2.0 * M_PI)
    if y < 0:
        y += 2.0 * M_PI
    y -= M_PI
    if y == -M_PI:
        y = M_PI
    return y


cdef void _field(const double[::1] x, const Py_ssize_t[::1] src, const Py_ssize_t[::1] dst,
                 const double[::1] w, const double[::1] scale, const double[::1] base,
                 double[::1] accp, double[::1] accm, double[::1] out) noexcept nogil:
    cdef Py_ssize_t n = x.shape[0], m = src.shape[0], i, e
    cdef double f
    for i in range(n):
        accp[i] = 0.0
        accm[i] = 0.0
    for e in range(m):
        f = w[e] * sin(x[src[e]] - x[dst[e]])
        accp[src[e]] += f
        accm[dst[e]] += f
    for i in range(n):
        out[i] = base[i] - scale[i] * (accp[i] - accm[i])


def rk4_integrate(theta0, src, dst, weights, inv_d, drift, double rate, double dt,
                  Py_ssize_t nsteps, Py_ssize_t stride):
    cdef double[::1] theta = np.array(theta0, dtype=np.float64)
    cdef Py_ssize_t n = theta.shape[0]
    cdef const Py_ssize_t[::1] s = np.ascontiguousarray(src, dtype=np.intp)
    cdef const Py_ssize_t[::1] t = np.ascontiguousarray(dst, dtype=np.intp)
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef double[::1] scale = rate * np.asarray(inv_d, dtype=np.float64)
    cdef double[::1] base = rate * np.asarray(drift, dtype=np.float64)
    cdef double[::1] k1 = np.empty(n), k2 = np.empty(n), k3 = np.empty(n), k4 = np.empty(n)
    cdef double[::1] tmp = np.empty(n), accp = np.empty(n), accm = np.empty(n)

    samples = list(range(0, nsteps + 1, stride))
    if samples[len(samples) - 1] != nsteps:
        samples.append(nsteps)
    cdef Py_ssize_t nsamp = len(samples)
    cdef Py_ssize_t[::1] sample_steps = np.asarray(samples, dtype=np.intp)
    out_arr = np.empty((nsamp, n))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t step, i, k = 1
    cdef double h2 = 0.5 * dt, h6 = dt / 6.0
    for i in range(n):
        out[0, i] = theta[i]
    with nogil:
        for step in range(1, nsteps + 1):
            _field(theta, s, t, w, scale, base, accp, accm, k1)
            for i in range(n):
                tmp[i] = theta[i] + h2 * k1[i]
            _field(tmp, s, t, w, scale, base, accp, accm, k2)
            for i in range(n):
                tmp[i] = theta[i] + h2 * k2[i]
            _field(tmp, s, t, w, scale, base, accp, accm, k3)
            for i in range(n):
                tmp[i] = theta[i] + dt * k3[i]
            _field(tmp, s, t, w, scale, base, accp, accm, k4)
            for i in range(n):
                theta[i] = _wrap(theta[i] + h6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            if k < nsamp and step == sample_steps[k]:
                for i in range(n):
                    out[k, i] = theta[i]
                k += 1
    return out_arr


cdef void _pivot(double[:, ::1] T, Py_ssize_t r, Py_ssize_t j) noexcept nogil:
    cdef Py_ssize_t nr = T.shape[0], nc = T.shape[1], i, c
    cdef double piv = T[r, j], f
    for c in range(nc):
        T[r, c] = T[r, c] / piv
    for i in range(nr):
        if i == r:
            continue
        f = T[i, j]
        if f != 0.0:
            for c in range(nc):
                T[i, c] -= f * T[r, c]
            T[i, j] = 0.0
    T[r, j] = 1.0


def simplex_iterate(double[:, ::1] T, cnp.int64_t[::1] basis, Py_ssize_t nrows,
                    Py_ssize_t price_row, Py_ssize_t n_enter, Py_ssize_t max_iter,
                    Py_ssize_t bland_after, double tol_rc, double tol_piv):
    cdef Py_ssize_t it = 0, j, i, r
    cdef Py_ssize_t rhs_col = T.shape[1] - 1
    cdef double pmin, q, best, a, rhs, thr, tiny, bound
    cdef int status
    with nogil:
        while True:
            j = -1
            if it < bland_after:
                pmin = 0.0
                for i in range(n_enter):
                    if j < 0 or T[price_row, i] < pmin:
                        pmin = T[price_row, i]
                        j = i
                if j < 0 or pmin >= -tol_rc:
                    status = OPTIMAL
                    break
            else:
                for i in range(n_enter):
                    if T[price_row, i] < -tol_rc:
                        j = i
                        break
                if j < 0:
                    status = OPTIMAL
                    break
            if it >= max_iter:
                status = ITERATION_LIMIT
                break
            # Harris two-pass ratio test: bound the step with every positive entry
            # (allowing HARRIS_SLACK of infeasibility), then take the largest pivot
            # among rows within that bound; under Bland's rule, the lowest basic
            # index among pivots above the relative threshold
            thr = 1.0
            for i in range(nrows):
                if T[i, j] > thr:
                    thr = T[i, j]
            thr *= tol_piv
            tiny = thr * 1e-3
            bound = -1.0
            for i in range(nrows):
                a = T[i, j]
                if a > tiny:
                    rhs = T[i, rhs_col]
                    if rhs < 0.0:
                        rhs = 0.0
                    q = (rhs + HARRIS_SLACK) / a
                    if bound < 0.0 or q < bound:
                        bound = q
            r = -1
            best = 0.0
            for i in range(nrows):
                a = T[i, j]
                if a > tiny:
                    rhs = T[i, rhs_col]
                    if rhs < 0.0:
                        rhs = 0.0
                    if rhs / a > bound:
                        continue
                    if it >= bland_after and r >= 0 and best > thr:
                        if a > thr and basis[i] < basis[r]:
                            r = i
                            best = a
                    elif r < 0 or a > best or (a == best and basis[i] < basis[r]):
                        r = i
                        best = a
            if r < 0:
                status = UNBOUNDED
                break
            _pivot(T, r, j)
            basis[r] = j
            it += 1
    return status, it
