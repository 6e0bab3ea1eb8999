"""Pure-numpy reference implementations of the hot loops.

Semantics match ``_kernels.pyx`` exactly; the compiled module is preferred at
import time when it is available (see ``_backend``).
"""

import numpy as np

OPTIMAL = 0
UNBOUNDED = 1
ITERATION_LIMIT = 2
STATUS_OPTIMAL, STATUS_UNBOUNDED, STATUS_ITERATION_LIMIT = OPTIMAL, UNBOUNDED, ITERATION_LIMIT
HARRIS_SLACK = 1e-9  # infeasibility allowed per ratio test

_TWO_PI = 2.0 * np.pi


def _wrap(x):
    y = np.mod(x + np.pi, _TWO_PI) - np.pi
    y[y == -np.pi] = np.pi
    return y


def rk4_integrate(theta0, src, dst, weights, inv_d, drift, rate, dt, nsteps, stride):
    """Fixed-step RK4 on ``rate * (drift - D^-1 B A sin(B^T theta))``.

    Angles are wrapped to (-pi, pi] after every step.  Returns the states at
    steps ``0, stride, 2*stride, ...`` (and the last step), stacked by row.
    """
    theta = np.array(theta0, dtype=float)
    n = theta.shape[0]
    src = np.asarray(src, dtype=np.intp)
    dst = np.asarray(dst, dtype=np.intp)
    scale = rate * np.asarray(inv_d, dtype=float)
    base = rate * np.asarray(drift, dtype=float)

    def field(x):
        flow = weights * np.sin(x[src] - x[dst])
        acc = np.bincount(src, flow, minlength=n) - np.bincount(dst, flow, minlength=n)
        return base - scale * acc

    samples = list(range(0, nsteps + 1, stride))
    if samples[-1] != nsteps:
        samples.append(nsteps)
    out = np.empty((len(samples), n))
    out[0] = theta
    k = 1
    h2 = 0.5 * dt
    h6 = dt / 6.0
    for step in range(1, nsteps + 1):
        k1 = field(theta)
        k2 = field(theta + h2 * k1)
        k3 = field(theta + h2 * k2)
        k4 = field(theta + dt * k3)
        theta = _wrap(theta + h6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
        if k < len(samples) and step == samples[k]:
            out[k] = theta
            k += 1
    return out


def simplex_iterate(T, basis, nrows, price_row, n_enter, max_iter, bland_after, tol_rc, tol_piv):
    """Primal simplex pivots on a dense tableau, in place.

    ``T`` has ``nrows`` constraint rows followed by one or more objective rows
    (reduced costs, negated objective in the last column); every pivot updates
    all rows.  Entering columns are limited to ``[0, n_enter)``.  Pricing is
    Dantzig (most negative reduced cost, lowest index on ties) until
    ``bland_after`` iterations, then Bland's rule.  The leaving row comes from
    a Harris two-pass ratio test; ``tol_piv`` times the largest entry of the
    column (at least 1) is the threshold for a well-scaled pivot.  Ties go to
    the smallest basic variable index.

    Returns ``(status, iterations)``.
    """
    it = 0
    rhs_col = T.shape[1] - 1
    rows = np.arange(nrows)
    while True:
        price = T[price_row, :n_enter]
        if n_enter == 0:
            return OPTIMAL, it
        if it < bland_after:
            j = int(np.argmin(price))
            if price[j] >= -tol_rc:
                return OPTIMAL, it
        else:
            neg = np.flatnonzero(price < -tol_rc)
            if neg.size == 0:
                return OPTIMAL, it
            j = int(neg[0])
        if it >= max_iter:
            return ITERATION_LIMIT, it
        col = T[:nrows, j]
        # Harris two-pass ratio test: bound the step with every positive entry
        # (allowing HARRIS_SLACK of infeasibility), then take the largest pivot
        # among rows within that bound; under Bland's rule, the lowest basic
        # index among pivots above the relative threshold
        thr = tol_piv * max(1.0, col.max(initial=0.0))
        cand = rows[col > thr * 1e-3]
        if cand.size == 0:
            return UNBOUNDED, it
        a = col[cand]
        rhs = np.maximum(T[cand, rhs_col], 0.0)
        bound = ((rhs + HARRIS_SLACK) / a).min()
        keep = rhs / a <= bound
        cand, a = cand[keep], a[keep]
        big = a > thr
        if it >= bland_after and big.any():
            r = int(cand[big][np.argmin(basis[cand[big]])])
        else:
            top = cand[a == a.max()]
            r = int(top[np.argmin(basis[top])])
        _pivot(T, r, j)
        basis[r] = j
        it += 1


def _pivot(T, r, j):
    prow = T[r] / T[r, j]
    T[r] = prow
    colv = T[:, j].copy()
    colv[r] = 0.0
    nz = np.flatnonzero(colv)
    if nz.size:
        T[nz] -= np.outer(colv[nz], prow)
        T[nz, j] = 0.0
    T[r, j] = 1.0
