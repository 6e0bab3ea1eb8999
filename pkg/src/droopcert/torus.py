"""Angles on the n-torus: signed arc differences, winding numbers, cohesive sets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import as_angles, wrap_angle
from .network import CycleBasis, PowerNetwork, cycle_basis

INTEGER_TOL = 1e-9


class DegenerateStateError(ValueError):
    """A line difference sits exactly on the branch point pi."""


@dataclass(frozen=True)
class WindingVector:
    u: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u", np.asarray(self.u, dtype=np.int64))

    def __len__(self):
        return len(self.u)

    def __eq__(self, other):
        other_u = other.u if isinstance(other, WindingVector) else np.asarray(other)
        return np.array_equal(self.u, other_u)

    def __hash__(self):
        return hash(tuple(self.u.tolist()))


@dataclass(frozen=True)
class GammaEnvelope:
    """Per-edge angle bounds in (0, pi/2]."""

    gamma: np.ndarray

    def __post_init__(self):
        g = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        if np.any(~(g > 0)) or np.any(g > np.pi / 2 + 1e-15):
            raise ValueError("gamma entries must lie in (0, pi/2]")
        object.__setattr__(self, "gamma", np.minimum(g, np.pi / 2))

    @classmethod
    def uniform(cls, alpha: float, m: int) -> "GammaEnvelope":
        return cls(np.full(m, float(alpha)))

    @property
    def gamma_max(self) -> float:
        return float(self.gamma.max())

    def __len__(self):
        return len(self.gamma)


def ccw_difference(alpha, beta):
    """Signed counterclockwise arc from ``alpha`` to ``beta``, in (-pi, pi]."""
    return wrap_angle(np.asarray(beta, dtype=float) - np.asarray(alpha, dtype=float))


def _edge_ccw(theta: np.ndarray, net: PowerNetwork, check: bool = True) -> np.ndarray:
    diff = ccw_difference(theta[net.src], theta[net.dst])
    if check and np.any(np.abs(diff) == np.pi):
        e = int(np.flatnonzero(np.abs(diff) == np.pi)[0])
        raise DegenerateStateError(f"edge {net.edge_label(e)} has an angle difference of exactly pi")
    return diff


def _to_integer(raw: np.ndarray) -> np.ndarray:
    rounded = np.rint(raw)
    err = np.abs(raw - rounded)
    if np.any(err > INTEGER_TOL):
        raise ValueError(f"winding sum {raw[np.argmax(err)]!r} is not an integer")
    return rounded.astype(np.int64)


def winding_number(theta, cycle, net: PowerNetwork) -> int:
    """Winding number of ``theta`` along a signed edge vector (a circulation).

    Each edge with coefficient ``c`` contributes ``c`` times the counterclockwise
    difference from its source angle to its sink angle.
    """
    th = as_angles(theta)
    diff = _edge_ccw(th, net)
    cyc = np.asarray(cycle, dtype=float)
    return int(_to_integer(np.array([cyc @ diff / (2 * np.pi)]))[0])


def winding_raw(theta, net: PowerNetwork, basis: CycleBasis | None = None) -> np.ndarray:
    """Unrounded winding sums; exposed for integrality checks."""
    basis = cycle_basis(net) if basis is None else basis
    diff = _edge_ccw(as_angles(theta), net)
    return basis.C @ diff / (2 * np.pi)


def winding_vector(theta, net: PowerNetwork, basis: CycleBasis | None = None) -> WindingVector:
    return WindingVector(_to_integer(winding_raw(theta, net, basis)))


def winding_vectors(states: np.ndarray, net: PowerNetwork, basis: CycleBasis | None = None) -> np.ndarray:
    """Winding vectors for a stack of states (rows)."""
    basis = cycle_basis(net) if basis is None else basis
    states = np.atleast_2d(states)
    diff = wrap_angle(states[:, net.dst] - states[:, net.src])
    return _to_integer(diff @ basis.C.T / (2 * np.pi))


def edge_differences(theta, net: PowerNetwork) -> np.ndarray:
    """Geodesic per-edge distances ``|B^T theta|`` in [0, pi]."""
    th = as_angles(theta)
    return np.abs(wrap_angle(th[net.src] - th[net.dst]))


def in_cohesive_set(theta, gamma, net: PowerNetwork) -> bool:
    g = gamma.gamma if isinstance(gamma, GammaEnvelope) else np.broadcast_to(gamma, (net.m,))
    return bool(np.all(edge_differences(theta, net) < g))
