"""LP relaxation of the min-max boundary frequency deviation, and transient certificates.

For an angle envelope ``gamma`` and winding vector ``u`` the candidate
invariant set is the cohesive set intersected with the winding cell.  Its
boundary consists of ``2m`` faces ``y_e = z * gamma_e``; on each face we lower
bound the smallest possible maximum frequency deviation among states whose
flow points outward by replacing ``sin`` with a four-sided polytope.  The
minimum over faces, ``v2``, certifies every start with a smaller initial
deviation.

Frequencies inside the LP are measured in the rotating frame, i.e. the
variable ``f`` stands for ``p - B A eta - omega_syn * d``; the objective and
the outward-sign rows are unchanged by that shift.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import lp as lpmod
from .lyapunov import ToleranceSet, property_thresholds, v_inf
from .model import KuramotoModel
from .network import cycle_basis
from .torus import GammaEnvelope, WindingVector, edge_differences, winding_vector

CERTIFIED = "certified"
NOT_CERTIFIED = "not-certified"
NOT_APPLICABLE = "not-applicable"
PROPERTIES = ("P1", "P2", "P3", "P4", "P5", "P6")


@dataclass(frozen=True)
class SinePolytope:
    """Four half-planes ``c_y * y + c_eta * eta <= rhs`` per edge (rows of shape (m, 4, 3))."""

    gamma: np.ndarray
    halfplanes: np.ndarray

    @property
    def tangent_offset(self) -> np.ndarray:
        return self.halfplanes[:, 0, 2]

    @property
    def chord_slope(self) -> np.ndarray:
        return -self.halfplanes[:, 2, 0]

    @property
    def chord_offset(self) -> np.ndarray:
        return self.halfplanes[:, 2, 2]

    def contains(self, y, eta, tol: float = 1e-12) -> np.ndarray:
        """Elementwise membership for per-edge arrays ``y`` and ``eta``."""
        h = self.halfplanes
        lhs = h[..., 0] * np.asarray(y)[..., None] + h[..., 1] * np.asarray(eta)[..., None]
        return np.all(lhs <= h[..., 2] + tol, axis=-1)


def polytope_constants(gamma):
    """``(c1, s, c2)``: unit-slope offset, chord slope and chord offset."""
    g = np.asarray(gamma, dtype=float)
    if np.any(~(g > 0)) or np.any(g > np.pi / 2 + 1e-15):
        raise ValueError("gamma entries must lie in (0, pi/2]")
    g = np.minimum(g, np.pi / 2)
    c1 = g - np.sin(g)
    s = np.sin(g) / g
    ystar = np.arccos(np.minimum(s, 1.0))
    c2 = np.maximum(np.sin(ystar) - s * ystar, 0.0)
    return c1, s, c2


def sine_polytope(gamma) -> SinePolytope:
    g = np.atleast_1d(np.asarray(gamma, dtype=float))
    c1, s, c2 = polytope_constants(g)
    one = np.ones_like(g)
    h = np.stack(
        [
            np.stack([-one, one, c1], axis=-1),  # eta <= y + c1
            np.stack([one, -one, c1], axis=-1),  # eta >= y - c1
            np.stack([-s, one, c2], axis=-1),  # eta <= s y + c2
            np.stack([s, -one, c2], axis=-1),  # eta >= s y - c2
        ],
        axis=1,
    )
    return SinePolytope(np.minimum(g, np.pi / 2), h)


def _gamma_array(gamma, m: int) -> np.ndarray:
    g = gamma.gamma if isinstance(gamma, GammaEnvelope) else np.asarray(gamma, dtype=float)
    g = np.broadcast_to(g, (m,)).astype(float)
    GammaEnvelope(g)  # range check
    return np.minimum(g, np.pi / 2)


def _u_array(u, k: int) -> np.ndarray:
    if u is None:
        return np.zeros(k)
    arr = u.u if isinstance(u, WindingVector) else np.asarray(u)
    arr = np.atleast_1d(arr).astype(float)
    if arr.shape != (k,):
        raise ValueError(f"winding vector has {arr.size} entries, cycle basis has {k}")
    return arr


class FaceTemplate:
    """Constraint blocks shared by all faces of one (model, u); ``gamma`` fills the rest.

    Variable layout: ``y`` (m), ``eta`` (m), ``f`` (n), ``t`` (1).
    """

    def __init__(self, model: KuramotoModel, u=None):
        net = model.net
        n, m = net.n, net.m
        basis = cycle_basis(net)
        k = len(basis)
        self.model, self.n, self.m = model, n, m
        self.nv = 2 * m + n + 1
        self.u = _u_array(u, k)
        iy, ie, iF, it = 0, m, 2 * m, 2 * m + n
        self.slices = (iy, ie, iF, it)
        d = model.d
        BA = model.B * net.weights
        shift = model.p_star.sum() / d.sum() * d
        # f + B A eta = p_star - shift
        A_eq = np.zeros((n + k, self.nv))
        A_eq[:n, ie:ie + m] = BA
        A_eq[:n, iF:iF + n] = np.eye(n)
        b_eq = np.zeros(n + k)
        b_eq[:n] = model.p_star - shift
        # cycle sums of y = B^T theta run opposite to the counterclockwise winding sum
        A_eq[n:, iy:iy + m] = basis.C
        b_eq[n:] = -2 * np.pi * self.u
        self.A_eq, self.b_eq = A_eq, b_eq
        # polytope rows (4 per edge), epigraph rows (2 per node), one outward-sign row
        A_in = np.zeros((4 * m + 2 * n + 1, self.nv))
        rows = np.arange(m)
        for q, (cy, ce) in enumerate([(-1, 1), (1, -1), (None, 1), (None, -1)]):
            A_in[4 * rows + q, iy + rows] = 0.0 if cy is None else cy
            A_in[4 * rows + q, ie + rows] = ce
        nodes = np.arange(n)
        A_in[4 * m + 2 * nodes, iF + nodes] = 1.0 / d
        A_in[4 * m + 2 * nodes + 1, iF + nodes] = -1.0 / d
        A_in[4 * m:4 * m + 2 * n, it] = -1.0
        self.A_in = A_in
        self.c = np.zeros(self.nv)
        self.c[it] = 1.0
        self._gamma_key = None

    def _fill_gamma(self, g: np.ndarray):
        if self._gamma_key is not None and np.array_equal(self._gamma_key, g):
            return
        m = self.m
        iy = self.slices[0]
        c1, s, c2 = polytope_constants(g)
        rows = np.arange(m)
        A_in = self.A_in
        A_in[4 * rows + 2, iy + rows] = -s
        A_in[4 * rows + 3, iy + rows] = s
        b = np.zeros(A_in.shape[0])
        b[4 * rows] = c1
        b[4 * rows + 1] = c1
        b[4 * rows + 2] = c2
        b[4 * rows + 3] = c2
        self._b_in = b
        lower = np.full(self.nv, -np.inf)
        upper = np.full(self.nv, np.inf)
        lower[:m], upper[:m] = -g, g
        lower[-1] = 0.0  # t bounds absolute values
        self._lower, self._upper = lower, upper
        self._gamma_key = g.copy()

    def face(self, gamma, e: int, z: int) -> lpmod.LinearProgram:
        if z not in (-1, 1):
            raise ValueError("face sign must be +1 or -1")
        g = _gamma_array(gamma, self.m)
        self._fill_gamma(g)
        net = self.model.net
        i, j = net.src[e], net.dst[e]
        iF = self.slices[2]
        d = self.model.d
        A_in = self.A_in.copy()
        A_in[-1, iF + i] = -z / d[i]
        A_in[-1, iF + j] = z / d[j]
        lower = self._lower.copy()
        upper = self._upper.copy()
        lower[e] = upper[e] = z * g[e]
        return lpmod.LinearProgram(self.c, self.A_eq, self.b_eq, A_in, self._b_in, lower, upper)


def build_face_lp(model: KuramotoModel, u, gamma, face_edge: int, face_sign: int) -> lpmod.LinearProgram:
    """Relaxed min-max deviation problem restricted to the face ``y_e = z * gamma_e``."""
    return FaceTemplate(model, u).face(gamma, face_edge, face_sign)


class FaceSolveError(RuntimeError):
    def __init__(self, e: int, z: int, label: str, cause: Exception):
        super().__init__(f"face ({label}, {z:+d}): {cause}")
        self.face = (e, z)


def faces(m: int):
    return [(e, z) for e in range(m) for z in (1, -1)]


def _solve_face(template: FaceTemplate, g, e, z, solver) -> float:
    prob = template.face(g, e, z)
    try:
        sol = lpmod.solve(prob, solver)
    except lpmod.LpError as exc:
        raise FaceSolveError(e, z, template.model.net.edge_label(e), exc) from exc
    if sol.status == lpmod.INFEASIBLE:
        return np.inf
    if sol.status != lpmod.OPTIMAL:
        raise FaceSolveError(e, z, template.model.net.edge_label(e), lpmod.LpError(sol.status))
    if not lpmod.verify(prob, sol):
        raise FaceSolveError(e, z, template.model.net.edge_label(e), lpmod.LpError("optimum failed verification"))
    return max(sol.value, 0.0)


def v2(model: KuramotoModel, u, gamma, *, template: FaceTemplate | None = None, stop_below=None,
       order=None, solver=None):
    """Minimum over the ``2m`` face optima; ``(value, face_values)``.

    ``face_values`` is an array of shape ``(m, 2)`` with column 0 for ``z = +1``
    and column 1 for ``z = -1``.  With ``stop_below`` set, evaluation stops at
    the first face whose optimum is ``<= stop_below`` (the remaining entries
    stay NaN); the returned value is then only an upper bound.  ``order``
    lists the faces to try first.
    """
    template = FaceTemplate(model, u) if template is None else template
    m = model.net.m
    g = _gamma_array(gamma, m)
    table = np.full((m, 2), np.nan)
    seq = faces(m)
    if order:
        front = [f for f in order if f in seq]
        seq = front + [f for f in seq if f not in set(front)]
    best = np.inf
    for e, z in seq:
        val = _solve_face(template, g, e, z, solver)
        table[e, 0 if z == 1 else 1] = val
        best = min(best, val)
        if stop_below is not None and best <= stop_below:
            break
    return best, table


def binding_face(face_values: np.ndarray):
    e, col = np.unravel_index(np.nanargmin(face_values), face_values.shape)
    return int(e), 1 if col == 0 else -1


def _face_system(C, u, e, z, g):
    """Equality system for one face; returns (free columns, solver for dependent columns) or None."""
    m = C.shape[1]
    k = C.shape[0]
    E = np.vstack([C, np.eye(m)[e]])
    r = np.concatenate([-2 * np.pi * u, [z * g[e]]])
    # greedy pivot selection of k+1 dependent columns
    dep = []
    for col in [e] + [c for c in range(m) if c != e]:
        trial = dep + [col]
        if np.linalg.matrix_rank(E[:, trial]) == len(trial):
            dep = trial
        if len(dep) == k + 1:
            break
    if np.linalg.matrix_rank(E) < k + 1:
        return None
    free = [c for c in range(m) if c not in dep]
    return free, dep, E, r


def brute_force_v1(model: KuramotoModel, u, gamma, resolution: float = 1e-3, chunk: int = 1 << 18) -> float:
    """Grid search of the exact boundary min-max deviation (no relaxation).

    Each face is parametrized by ``n - 2`` free edge differences on a uniform
    grid of step ``resolution``; the remaining differences follow from the
    face pin and the cycle equations.  Only grid points that satisfy every
    constraint exactly are scored, so the result is never below the true
    minimum.  Meant for graphs with at most four edges.
    """
    net = model.net
    m = net.m
    if m > 4:
        raise ValueError("brute-force oracle is limited to graphs with at most 4 edges")
    basis = cycle_basis(net)
    C = basis.C if len(basis) else np.zeros((0, m))
    uu = _u_array(u, len(basis))
    g = _gamma_array(gamma, m)
    d = model.d
    drift = model.drift
    src, dst, w = net.src, net.dst, net.weights
    BT = model.B.T
    best = np.inf
    for e, z in faces(m):
        sysinfo = _face_system(C, uu, e, z, g)
        if sysinfo is None:
            continue
        free, dep, E, r = sysinfo
        Edep = E[:, dep]
        Efree = E[:, free]
        axes = [np.linspace(-g[c], g[c], max(2, int(np.ceil(2 * g[c] / resolution)) + 1)) for c in free]
        i, j = src[e], dst[e]
        for pts in _grid_chunks(axes, chunk):
            rhs = r[None, :] - pts @ Efree.T
            ydep = np.linalg.solve(Edep, rhs.T).T
            Y = np.empty((pts.shape[0], m))
            Y[:, free] = pts
            Y[:, dep] = ydep
            Y[:, e] = z * g[e]
            Y = Y[np.all(np.abs(Y) <= g, axis=1)]
            if not len(Y):
                continue
            acc = np.sin(Y) * w @ BT
            v = drift - acc / d
            outward = z * (v[:, i] - v[:, j]) >= 0
            if np.any(outward):
                best = min(best, float(np.abs(v[outward]).max(axis=1).min()))
    return best


def _grid_chunks(axes, chunk):
    """Cartesian grid of ``axes`` in row blocks of roughly ``chunk`` points."""
    if not axes:
        yield np.zeros((1, 0))
        return
    tail = int(np.prod([a.size for a in axes[1:]])) if len(axes) > 1 else 1
    step = max(1, chunk // tail)
    for k in range(0, axes[0].size, step):
        mesh = np.meshgrid(axes[0][k:k + step], *axes[1:], indexing="ij")
        yield np.stack([m_.ravel() for m_ in mesh], axis=1)


@dataclass
class Certificate:
    """Decision record for one start against one envelope."""

    u: WindingVector
    gamma: np.ndarray
    v2: float
    delta0: float
    gamma0: np.ndarray
    status: str
    verdicts: dict
    thresholds: dict = field(default_factory=dict)
    face_values: np.ndarray | None = None
    edge_labels: list | None = None
    reason: str = ""

    @property
    def certified(self) -> bool:
        return self.status == CERTIFIED

    def to_text(self) -> str:
        lines = [
            "# transient certificate",
            f"status = {self.status}",
        ]
        if self.reason:
            lines.append(f"reason = {self.reason}")
        lines += [
            f"delta0_hz = {float(self.delta0)!r}",
            f"v2_hz = {float(self.v2)!r}",
            f"winding = {' '.join(str(int(x)) for x in self.u.u)}",
        ]
        for key in PROPERTIES:
            lines.append(f"{key} = {'certified' if self.verdicts.get(key) else 'not-certified'}")
        for key, val in self.thresholds.items():
            lines.append(f"{key}_threshold_hz = {float(val)!r}")
        lines.append("")
        lines.append("# edge gamma0_deg gamma_deg v2_plus_hz v2_minus_hz")
        labels = self.edge_labels or [str(e) for e in range(len(self.gamma))]
        fv = self.face_values if self.face_values is not None else np.full((len(self.gamma), 2), np.nan)
        for e, lab in enumerate(labels):
            lines.append(
                " ".join([lab] + [repr(float(x)) for x in
                             (np.degrees(self.gamma0[e]), np.degrees(self.gamma[e]), fv[e, 0], fv[e, 1])])
            )
        return "\n".join(lines) + "\n"


def certify(model: KuramotoModel, theta0=None, gamma=None, tolerances: ToleranceSet | None = None, *,
            gamma0=None, delta0=None, u=None, solver=None, rate: str = "certified") -> Certificate:
    """Check the LP transient guarantee for a start ``theta0`` (or explicit ``gamma0``, ``delta0``).

    P1 holds when ``delta0 < v2`` (strict); P2-P6 additionally need the
    per-property thresholds.  A ``gamma`` not dominating ``gamma0`` or
    leaving ``(0, pi/2]`` yields status ``not-applicable``.
    """
    net = model.net
    m = net.m
    basis = cycle_basis(net)
    if theta0 is not None:
        delta0 = v_inf(model, theta0)
        gamma0 = edge_differences(theta0, net)
        if u is None:
            u = winding_vector(theta0, net, basis)
    if delta0 is None or gamma0 is None:
        raise ValueError("pass theta0, or both gamma0 and delta0")
    gamma0 = np.broadcast_to(np.asarray(gamma0, dtype=float), (m,)).copy()
    uvec = u if isinstance(u, WindingVector) else WindingVector(_u_array(u, len(basis)).astype(np.int64))
    tolerances = ToleranceSet.unconstrained(net.n, m) if tolerances is None else tolerances
    g = np.broadcast_to(np.asarray(gamma.gamma if isinstance(gamma, GammaEnvelope) else gamma, float), (m,)).copy()
    base = dict(u=uvec, gamma=g, delta0=float(delta0), gamma0=gamma0, edge_labels=net.edge_labels)
    no = {k: False for k in PROPERTIES}
    if np.any(~(g > 0)) or np.any(g > np.pi / 2) or np.any(g < gamma0):
        return Certificate(v2=np.nan, status=NOT_APPLICABLE, verdicts=no,
                           reason="gamma must satisfy gamma0 <= gamma <= pi/2 with positive entries", **base)
    value, table = v2(model, uvec, g, solver=solver)
    p1 = bool(delta0 < value)
    th = property_thresholds(model, g, tolerances, rate=rate)
    adm = th.admits(float(delta0))
    verdicts = {"P1": p1, **{k: p1 and ok for k, ok in adm.items()}}
    thresholds = {
        "P2": float(th.frequency.min()),
        "P4": float(th.power.min()),
        "P5": float(th.ramping.min()),
        "P6": float(th.energy.min()),
    }
    return Certificate(v2=float(value), status=CERTIFIED if p1 else NOT_CERTIFIED, verdicts=verdicts,
                       thresholds=thresholds, face_values=table, **base)
