"""Heterogeneous Kuramoto model of a droop-controlled inverter network.

The angle dynamics are ``D dtheta/dt = f(theta) = p - B A sin(B^T theta)`` with
``p = p_star + omega_star * d``.  Frequencies are in Hz, powers in MW and droop
denominators in MW/Hz.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .network import PowerNetwork, cycle_basis, incidence_matrix

LITERAL = "literal"
ANGULAR = "angular"
CONVENTIONS = (LITERAL, ANGULAR)


class EquilibriumError(RuntimeError):
    pass


class EquilibriumWarning(UserWarning):
    pass


def wrap_angle(x):
    """Representative of ``x`` in (-pi, pi]."""
    y = np.mod(np.asarray(x, dtype=float) + np.pi, 2 * np.pi) - np.pi
    return np.where(y == -np.pi, np.pi, y)


@dataclass(frozen=True, eq=False)
class TorusState:
    theta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.theta, dtype=dtype)

    def __len__(self):
        return len(self.theta)


def as_angles(theta) -> np.ndarray:
    if isinstance(theta, TorusState):
        return theta.theta
    return np.asarray(theta, dtype=float)


@dataclass(frozen=True, eq=False)
class KuramotoModel:
    """Droop-controlled network with constant voltage magnitudes.

    ``convention`` selects how the state derivative is read: under
    ``"literal"`` the angle rate is ``D^-1 f(theta)`` directly; under
    ``"angular"`` the rate is ``2 pi`` times that (d rescaled by ``1/2pi``).
    Steady-state quantities do not depend on the convention.
    """

    net: PowerNetwork
    d: np.ndarray
    p_star: np.ndarray
    omega_star: float = 60.0
    convention: str = LITERAL
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        p_star = np.asarray(self.p_star, dtype=float)
        if d.shape != (self.net.n,) or p_star.shape != (self.net.n,):
            raise ValueError(
                f"expected {self.net.n} droop and injection entries, got {d.shape} and {p_star.shape}"
            )
        if np.any(d <= 0) or not np.all(np.isfinite(d)):
            raise ValueError("droop denominators must be positive")
        if self.convention not in CONVENTIONS:
            raise ValueError(f"unknown convention {self.convention!r}")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "p_star", p_star)
        object.__setattr__(self, "omega_star", float(self.omega_star))

    @property
    def n(self) -> int:
        return self.net.n

    @property
    def p(self) -> np.ndarray:
        return self.p_star + self.omega_star * self.d

    @property
    def B(self) -> np.ndarray:
        B = self._cache.get("B")
        if B is None:
            B = incidence_matrix(self.net)
            self._cache["B"] = B
        return B

    @property
    def rate_factor(self) -> float:
        """Multiplier turning a Hz-valued frequency into the angle rate."""
        return 1.0 if self.convention == LITERAL else 2 * np.pi

    @property
    def drift(self) -> np.ndarray:
        """Rotating-frame natural frequencies ``p_star/d - p_star_sum/d_sum`` (Hz)."""
        return self.p_star / self.d - self.p_star.sum() / self.d.sum()

    def with_convention(self, convention: str) -> "KuramotoModel":
        return KuramotoModel(self.net, self.d, self.p_star, self.omega_star, convention)

    def remove_lines(self, edge_ids: Iterable) -> "KuramotoModel":
        """Post-contingency model with the given edges (indices or labels) removed."""
        ids = {self.net.edge_index(e) for e in edge_ids}
        if not ids:
            return self
        return KuramotoModel(
            self.net.without_edges(ids), self.d, self.p_star, self.omega_star, self.convention
        )

    def coupling(self, theta) -> np.ndarray:
        """``B A sin(B^T theta)`` evaluated edge by edge."""
        th = as_angles(theta)
        net = self.net
        flow = net.weights * np.sin(th[net.src] - th[net.dst])
        out = np.zeros(net.n)
        np.add.at(out, net.src, flow)
        np.subtract.at(out, net.dst, flow)
        return out


def _check_dim(model: KuramotoModel, theta) -> np.ndarray:
    th = as_angles(theta)
    if th.shape != (model.n,):
        raise ValueError(f"state has shape {th.shape}, model has {model.n} nodes")
    return th


def vector_field(model: KuramotoModel, theta) -> np.ndarray:
    th = _check_dim(model, theta)
    return model.p - model.coupling(th)


def synchronous_frequency(model: KuramotoModel) -> float:
    return model.omega_star + model.p_star.sum() / model.d.sum()


def state_laplacian(model: KuramotoModel, theta) -> np.ndarray:
    th = _check_dim(model, theta)
    B = model.B
    w = model.net.weights * np.cos(B.T @ th)
    return (B * w) @ B.T


def laplacian(model: KuramotoModel) -> np.ndarray:
    L = model._cache.get("L")
    if L is None:
        B = model.B
        L = (B * model.net.weights) @ B.T
        model._cache["L"] = L
    return L


def lambda2(L) -> float:
    """Second-smallest eigenvalue of a symmetric PSD Laplacian."""
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise ValueError("Laplacian must be square")
    if not np.allclose(L, L.T, rtol=0, atol=1e-12 * max(1.0, np.abs(L).max())):
        raise ValueError("Laplacian is not symmetric")
    if L.shape[0] < 2:
        raise ValueError("need at least two nodes")
    ev = np.linalg.eigvalsh(L)
    lam = float(ev[1])
    if lam < -1e-9:
        raise ValueError(f"negative lambda_2 = {lam:.3e}; graph disconnected or input not PSD")
    return lam


def model_lambda2(model: KuramotoModel) -> float:
    lam = model._cache.get("lambda2")
    if lam is None:
        model.net.require_connected()
        lam = lambda2(laplacian(model))
        model._cache["lambda2"] = lam
    return lam


@dataclass(frozen=True)
class EquilibriumResult:
    state: TorusState
    iterations: int
    residual: float
    cohesive: bool


def solve_equilibrium(model: KuramotoModel, init=None, tol: float = 1e-10, max_iter: int = 50):
    """Newton-Raphson for a synchronous state with the first angle pinned at zero.

    Returns an :class:`EquilibriumResult`.  A converged point with some line
    difference at or beyond pi/2 is returned with ``cohesive=False`` and an
    :class:`EquilibriumWarning`.
    """
    model.net.require_connected()
    n = model.n
    th = np.zeros(n) if init is None else _check_dim(model, init).astype(float).copy()
    th = th - th[0]
    shift = model.p_star.sum() / model.d.sum() * model.d
    target = model.p_star - shift
    B = model.B
    w = model.net.weights
    for it in range(max_iter + 1):
        g = target - model.coupling(th)
        res = float(np.abs(g).max())
        if res < tol:
            break
        if it == max_iter:
            raise EquilibriumError("no equilibrium found from this start")
        J = (B * (w * np.cos(B.T @ th))) @ B.T
        try:
            step = np.linalg.solve(J[1:, 1:], g[1:])
        except np.linalg.LinAlgError:
            raise EquilibriumError("singular Jacobian; no equilibrium found from this start") from None
        th[1:] += step
        if not np.all(np.isfinite(th)):
            raise EquilibriumError("no equilibrium found from this start")
    gaps = np.abs(wrap_angle(B.T @ th))
    cohesive = bool(np.all(gaps < np.pi / 2))
    if not cohesive:
        warnings.warn(
            f"equilibrium has a line difference of {np.degrees(gaps.max()):.2f} deg (>= 90)",
            EquilibriumWarning,
            stacklevel=2,
        )
    return EquilibriumResult(TorusState(th), it, res, cohesive)


__all__ = [
    "ANGULAR",
    "LITERAL",
    "EquilibriumError",
    "EquilibriumResult",
    "EquilibriumWarning",
    "KuramotoModel",
    "TorusState",
    "cycle_basis",
    "lambda2",
    "laplacian",
    "model_lambda2",
    "solve_equilibrium",
    "state_laplacian",
    "synchronous_frequency",
    "vector_field",
    "wrap_angle",
]
