"""Dense linear programming: problem container, two-phase simplex, feasibility check.

Problems are stated as::

    minimize    c^T x
    subject to  A_eq x == b_eq
                A_in x <= b_in
                lower <= x <= upper      (either side may be infinite)

and solved by converting to standard form (free variables split, shifted
bounds, slack columns) and running a two-phase primal tableau simplex.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._backend import kernels

FEAS_TOL = 1e-8
RC_TOL = 1e-9
PIVOT_TOL = 1e-9
MAX_ITER = 1_000_000

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class LpError(RuntimeError):
    """Solver failure (as opposed to an infeasible or unbounded problem)."""


@dataclass(frozen=True, eq=False)
class LinearProgram:
    c: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    A_in: np.ndarray
    b_in: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        nv = c.size
        A_eq = np.asarray(self.A_eq, dtype=float).reshape(-1, nv)
        A_in = np.asarray(self.A_in, dtype=float).reshape(-1, nv)
        b_eq = np.asarray(self.b_eq, dtype=float).ravel()
        b_in = np.asarray(self.b_in, dtype=float).ravel()
        lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (nv,)).copy()
        upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (nv,)).copy()
        if b_eq.size != A_eq.shape[0] or b_in.size != A_in.shape[0]:
            raise ValueError("constraint matrix and right-hand side sizes disagree")
        if np.any(lower > upper):
            raise ValueError("lower bound exceeds upper bound")
        if np.any(lower == np.inf) or np.any(upper == -np.inf):
            raise ValueError("bounds must allow a finite value")
        for name, val in dict(c=c, A_eq=A_eq, b_eq=b_eq, A_in=A_in, b_in=b_in, lower=lower, upper=upper).items():
            object.__setattr__(self, name, val)

    @classmethod
    def build(cls, c, A_eq=None, b_eq=None, A_in=None, b_in=None, lower=None, upper=None):
        c = np.asarray(c, dtype=float).ravel()
        nv = c.size
        return cls(
            c,
            np.zeros((0, nv)) if A_eq is None else A_eq,
            np.zeros(0) if b_eq is None else b_eq,
            np.zeros((0, nv)) if A_in is None else A_in,
            np.zeros(0) if b_in is None else b_in,
            np.full(nv, -np.inf) if lower is None else lower,
            np.full(nv, np.inf) if upper is None else upper,
        )

    @property
    def num_vars(self) -> int:
        return self.c.size


@dataclass(frozen=True, eq=False)
class LpSolution:
    status: str
    x: np.ndarray | None = None
    value: float = np.nan
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


class _StandardForm:
    """``x = offset + M @ xs`` with ``xs >= 0`` and ``A xs (==, <=) b`` rows."""

    def __init__(self, lp: LinearProgram):
        nv = lp.num_vars
        lo, up = lp.lower, lp.upper
        A_eq, b_eq, c = lp.A_eq.copy(), lp.b_eq.copy(), lp.c.copy()
        A_in, b_in = lp.A_in.copy(), lp.b_in.copy()
        self.substitutions = _eliminate_free(A_eq, b_eq, A_in, b_in, c, lo, up)
        gone = {int(j) for blk in self.substitutions for j in blk[0]}
        keep_rows = np.setdiff1d(np.arange(A_eq.shape[0]), [int(r) for blk in self.substitutions for r in blk[1]])
        A_eq, b_eq = A_eq[keep_rows], b_eq[keep_rows]
        cols = []  # (original var, sign)
        offset = np.zeros(nv)
        box_rows = []  # (std col, width)
        for j in range(nv):
            l, u = lo[j], up[j]
            if j in gone:
                continue
            if np.isfinite(l) and l == u:
                offset[j] = l
            elif np.isfinite(l):
                offset[j] = l
                cols.append((j, 1.0))
                if np.isfinite(u):
                    box_rows.append((len(cols) - 1, u - l))
            elif np.isfinite(u):
                offset[j] = u
                cols.append((j, -1.0))
            else:
                cols.append((j, 1.0))
                cols.append((j, -1.0))
        ns = len(cols)
        M = np.zeros((nv, ns))
        for k, (j, s) in enumerate(cols):
            M[j, k] = s
        self.M, self.offset, self.ns = M, offset, ns
        self.c = c @ M
        self.A_eq = A_eq @ M
        self.b_eq = b_eq - A_eq @ offset
        A_box = np.zeros((len(box_rows), ns))
        b_box = np.zeros(len(box_rows))
        for r, (k, width) in enumerate(box_rows):
            A_box[r, k] = 1.0
            b_box[r] = width
        self.A_in = np.vstack([A_in @ M, A_box])
        self.b_in = np.concatenate([b_in - A_in @ offset, b_box])

    def recover(self, xs: np.ndarray) -> np.ndarray:
        x = self.offset + self.M @ xs
        for cols, _, W, w in reversed(self.substitutions):
            x[cols] = 0.0
            x[cols] = w - W @ x
        return x


def _eliminate_free(A_eq, b_eq, A_in, b_in, c, lower, upper, rel_pivot: float = 0.1):
    """Substitute free variables out through equality rows, in place.

    One free column is picked per equality row (sparsest among the
    well-scaled ones) and the whole block is eliminated at once.  Returns
    ``[(cols, rows, W, w)]`` such that ``x[cols] = w - W @ x`` with ``W``
    zero on ``cols``; an empty list when no usable block exists.
    """
    free = np.isinf(lower) & np.isinf(upper)
    nnz = (A_eq != 0).sum(axis=0) + (A_in != 0).sum(axis=0)
    rows, cols = [], []
    for r in range(A_eq.shape[0]):
        row = A_eq[r]
        cand = np.flatnonzero(free & (row != 0))
        cand = cand[~np.isin(cand, cols)]
        if cand.size == 0:
            continue
        mags = np.abs(row[cand])
        ok = cand[mags >= rel_pivot * mags.max()]
        rows.append(r)
        cols.append(int(ok[np.argmin(nnz[ok])]))
    if not rows:
        return []
    P = A_eq[np.ix_(rows, cols)]
    try:
        Pinv = np.linalg.inv(P)
    except np.linalg.LinAlgError:
        return []
    if np.abs(P).sum(axis=0).max() * np.abs(Pinv).sum(axis=0).max() > 1e8:
        return []
    W = Pinv @ A_eq[rows]
    w = Pinv @ b_eq[rows]
    W[:, cols] = 0.0
    for M, vec in ((A_eq, b_eq), (A_in, b_in)):
        coef = M[:, cols].copy()
        M -= coef @ W
        vec -= coef @ w
        M[:, cols] = 0.0
    c -= c[cols] @ W
    c[cols] = 0.0
    A_eq[rows] = 0.0
    b_eq[rows] = 0.0
    return [(np.array(cols), np.array(rows), W, w)]


REINVERT_EVERY = 64
DRIFT_TOL = 1e-10
MAX_COND = 1e12


class _Tableau:
    """Dense tableau over ``[A | slack | artificial]`` with a refreshable basis inverse."""

    def __init__(self, sf: _StandardForm):
        n_eq, n_in, ns = sf.A_eq.shape[0], sf.A_in.shape[0], sf.ns
        nrows = n_eq + n_in
        A = np.vstack([sf.A_eq, sf.A_in])
        b = np.concatenate([sf.b_eq, sf.b_in])
        # row equilibration; slack columns stay +-1 (the slacks absorb the scale)
        scale = np.abs(A).max(axis=1) if ns else np.ones(nrows)
        scale[scale == 0] = 1.0
        A = A / scale[:, None]
        b = b / scale
        neg = b < 0
        A[neg] *= -1
        b = np.abs(b)
        slack = np.zeros((nrows, n_in))
        slack[np.arange(n_eq, nrows), np.arange(n_in)] = np.where(neg[n_eq:], -1.0, 1.0)
        # rows whose slack enters with +1 start with that slack basic; others get an artificial
        art_rows = [r for r in range(nrows) if r < n_eq or neg[r]]
        n_art = len(art_rows)
        art = np.zeros((nrows, n_art))
        art[art_rows, np.arange(n_art)] = 1.0
        self.full = np.hstack([A, slack, art, b[:, None]])
        self.nrows, self.ns, self.nstruct = nrows, ns, ns + n_in
        self.ncols = self.nstruct + n_art
        self.n_art = n_art
        basis = np.empty(nrows, dtype=np.int64)
        basis[n_eq:] = ns + np.arange(n_in)
        basis[art_rows] = self.nstruct + np.arange(n_art)
        self.basis = basis
        self.cost2 = np.zeros(self.ncols)
        self.cost2[:ns] = sf.c
        self.cost1 = np.zeros(self.ncols)
        self.cost1[self.nstruct:] = 1.0
        self.T = np.zeros((nrows + 2, self.ncols + 1))
        self.T[:nrows] = self.full
        self._price(self.T[:nrows])
        self.scale = scale

    def _price(self, body):
        for row, cost in ((self.nrows, self.cost2), (self.nrows + 1, self.cost1)):
            cb = cost[self.basis]
            self.T[row, :-1] = cost - cb @ body[:, :-1]
            self.T[row, -1] = -(cb @ body[:, -1])

    def drift(self) -> float:
        """Residual of the basic solution read off the tableau against the original rows."""
        xb = self.T[: self.nrows, -1]
        return float(np.abs(self.full[:, self.basis] @ xb - self.full[:, -1]).max())

    def reinvert(self):
        Bm = self.full[:, self.basis]
        try:
            Binv = np.linalg.inv(Bm)
        except np.linalg.LinAlgError:
            raise LpError("numerically singular basis (condition number inf)") from None
        cond = np.abs(Bm).sum(axis=0).max() * np.abs(Binv).sum(axis=0).max()
        if not np.isfinite(cond) or cond > MAX_COND:
            raise LpError(f"numerically singular basis (condition number {cond:.3e})")
        body = Binv @ self.full
        body[np.arange(self.nrows), self.basis] = 1.0
        self.T[: self.nrows] = body
        self._price(body)

    def run(self, row: int, n_enter: int, budget: list, bland_after: int, used: list):
        """Pivot on objective ``row`` until optimal/unbounded, reinverting between chunks."""
        k = kernels
        while True:
            chunk = min(REINVERT_EVERY, budget[0])
            status, it = k.simplex_iterate(
                self.T, self.basis, self.nrows, row, n_enter, chunk, max(0, bland_after - used[0]), RC_TOL, PIVOT_TOL
            )
            budget[0] -= it
            used[0] += it
            if it and self.drift() > DRIFT_TOL:
                self.reinvert()
                if status != k.STATUS_ITERATION_LIMIT:
                    continue  # re-price on the refreshed tableau
            if status == k.STATUS_ITERATION_LIMIT:
                if budget[0] <= 0:
                    raise LpError(f"cycling suspected: {used[0]} iterations without termination")
                continue
            return status


def _simplex(sf: _StandardForm, bland_factor: int = 10, max_iter: int = MAX_ITER):
    tab = _Tableau(sf)
    nrows, nstruct = tab.nrows, tab.nstruct
    bland_after = bland_factor * tab.ncols
    budget, used = [max_iter], [0]
    if tab.n_art:
        tab.run(nrows + 1, nstruct, budget, bland_after, used)
        T = tab.T
        infeas = -T[nrows + 1, -1]
        if infeas > FEAS_TOL * max(1.0, np.abs(tab.full[:, -1]).max()):
            return INFEASIBLE, None, used[0]
        # drive zero-level artificials out of the basis where possible
        moved = False
        for r in range(nrows):
            if tab.basis[r] >= nstruct:
                row = T[r, :nstruct]
                cand = np.flatnonzero(np.abs(row) > 1e-7)
                if cand.size:
                    j = int(cand[np.argmax(np.abs(row[cand]))])
                    _pivot_any(T, r, j)
                    tab.basis[r] = j
                    moved = True
        if moved and tab.drift() > DRIFT_TOL:
            tab.reinvert()
    status = tab.run(nrows, nstruct, budget, bland_after, used)
    if status == kernels.STATUS_UNBOUNDED:
        return UNBOUNDED, None, used[0]
    xs_all = np.zeros(tab.ncols)
    xs_all[tab.basis] = np.maximum(tab.T[:nrows, -1], 0.0)
    return OPTIMAL, xs_all, used[0]


def _pivot_any(T, r, j):
    T[r] /= T[r, j]
    col = T[:, j].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])
    T[:, j] = 0.0
    T[r, j] = 1.0


def _primal_residual(lp: LinearProgram, x: np.ndarray) -> float:
    scale = 1.0
    res = 0.0
    if lp.A_eq.size:
        res = max(res, float(np.abs(lp.A_eq @ x - lp.b_eq).max()))
        scale = max(scale, float(np.abs(lp.b_eq).max()))
    if lp.A_in.size:
        res = max(res, float(np.maximum(lp.A_in @ x - lp.b_in, 0).max()))
        scale = max(scale, float(np.abs(lp.b_in).max()))
    res = max(res, float(np.maximum(lp.lower - x, 0).max(initial=0)), float(np.maximum(x - lp.upper, 0).max(initial=0)))
    return res / scale


def simplex_solve(lp: LinearProgram) -> LpSolution:
    sf = _StandardForm(lp)
    status, xs_all, iters = _simplex(sf)
    if status != OPTIMAL:
        return LpSolution(status, iterations=iters)
    x = sf.recover(xs_all[: sf.ns])
    if _primal_residual(lp, x) > FEAS_TOL:
        raise LpError(f"primal residual {_primal_residual(lp, x):.3e} after refactorization")
    return LpSolution(OPTIMAL, x, float(lp.c @ x), iters)


Solver = Callable[[LinearProgram], LpSolution]
_default_solver: Solver = simplex_solve


def set_default_solver(solver: Solver | None) -> None:
    """Swap the engine used by :func:`solve` (``None`` restores the bundled simplex)."""
    global _default_solver
    _default_solver = simplex_solve if solver is None else solver


def solve(lp: LinearProgram, solver: Solver | None = None) -> LpSolution:
    return (solver or _default_solver)(lp)


def verify(lp: LinearProgram, solution: LpSolution, tol: float = 1e-7) -> bool:
    """Independent feasibility re-check of ``solution.x`` against every constraint."""
    if solution.x is None:
        return False
    x = np.asarray(solution.x, dtype=float)
    if x.shape != (lp.num_vars,) or not np.all(np.isfinite(x)):
        return False
    return _primal_residual(lp, x) <= tol


def scipy_solver(lp: LinearProgram) -> LpSolution:
    """HiGHS through scipy, for cross-checking or as a drop-in engine."""
    from scipy.optimize import linprog

    bounds = [
        (None if not np.isfinite(l) else l, None if not np.isfinite(u) else u)
        for l, u in zip(lp.lower, lp.upper)
    ]
    kwargs = dict(
        A_ub=lp.A_in if lp.A_in.size else None,
        b_ub=lp.b_in if lp.A_in.size else None,
        A_eq=lp.A_eq if lp.A_eq.size else None,
        b_eq=lp.b_eq if lp.A_eq.size else None,
        bounds=bounds,
        method="highs",
    )
    res = linprog(lp.c, **kwargs)
    if res.status == 2:
        # presolve can label an unbounded problem infeasible; confirm without it
        res = linprog(lp.c, options={"presolve": False}, **kwargs)
    if res.status == 0:
        return LpSolution(OPTIMAL, res.x, float(res.fun), int(res.nit))
    if res.status == 2:
        return LpSolution(INFEASIBLE)
    if res.status == 3:
        return LpSolution(UNBOUNDED)
    raise LpError(f"HiGHS failed: {res.message}")
