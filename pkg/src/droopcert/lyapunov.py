"""Frequency-deviation Lyapunov candidates, decay rates and constraint thresholds."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import KuramotoModel, model_lambda2, synchronous_frequency, vector_field
from .torus import GammaEnvelope


def freq_deviation(model: KuramotoModel, theta) -> np.ndarray:
    """Per-node deviation ``D^-1 f(theta) - omega_syn`` (Hz).

    Evaluated in the rotating frame so the 60 Hz offset never enters the sum.
    """
    vector_field(model, theta)  # dimension check
    return model.drift - model.coupling(theta) / model.d


def freq_deviation_batch(model: KuramotoModel, states: np.ndarray) -> np.ndarray:
    net = model.net
    states = np.atleast_2d(states)
    flow = net.weights * np.sin(states[:, net.src] - states[:, net.dst])
    out = np.zeros((states.shape[0], net.n))
    np.add.at(out.T, net.src, flow.T)
    np.subtract.at(out.T, net.dst, flow.T)
    return model.drift - out / model.d


def v_inf(model: KuramotoModel, theta) -> float:
    return float(np.abs(freq_deviation(model, theta)).max())


def v_d(model: KuramotoModel, theta) -> float:
    v = freq_deviation(model, theta)
    return float(np.sqrt(v @ (model.d * v)))


def kappa(model: KuramotoModel, gamma) -> float:
    """Decay rate ``cos(gamma_max) * lambda_2(L)`` as stated for unit droop."""
    gmax = gamma.gamma_max if isinstance(gamma, GammaEnvelope) else float(np.max(gamma))
    return float(np.cos(gmax) * model_lambda2(model))


def kappa_cert(model: KuramotoModel, gamma) -> float:
    """Rate valid for arbitrary droop: ``kappa / d_max``.

    Follows from ``v^T L(theta) v >= lambda_2(L(theta)) v^T D v / d_max`` on
    the subspace ``d^T v = 0``.
    """
    return kappa(model, gamma) / float(model.d.max())


@dataclass(frozen=True)
class ToleranceSet:
    """Operating limits: frequency (Hz), angle (rad), power (MW), ramp (MW/s), energy (MW s)."""

    delta_bar: np.ndarray
    gamma_bar: np.ndarray
    p_bar: np.ndarray
    r_bar: np.ndarray
    s_bar: np.ndarray

    def __post_init__(self):
        for name in ("delta_bar", "gamma_bar", "p_bar", "r_bar", "s_bar"):
            arr = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if np.any(arr < 0) or np.any(np.isnan(arr)):
                raise ValueError(f"{name} entries must be nonnegative")
            object.__setattr__(self, name, arr)
        if np.any(self.gamma_bar <= 0) or np.any(self.gamma_bar > np.pi / 2 + 1e-15):
            raise ValueError("gamma_bar entries must lie in (0, pi/2]")

    @classmethod
    def unconstrained(cls, n: int, m: int) -> "ToleranceSet":
        inf = np.full(n, np.inf)
        return cls(inf, np.full(m, np.pi / 2), inf, inf, inf)

    @classmethod
    def broadcast(cls, n, m, delta_bar=np.inf, gamma_bar=np.pi / 2, p_bar=np.inf, r_bar=np.inf, s_bar=np.inf):
        return cls(
            np.broadcast_to(np.asarray(delta_bar, float), (n,)).copy(),
            np.broadcast_to(np.asarray(gamma_bar, float), (m,)).copy(),
            np.broadcast_to(np.asarray(p_bar, float), (n,)).copy(),
            np.broadcast_to(np.asarray(r_bar, float), (n,)).copy(),
            np.broadcast_to(np.asarray(s_bar, float), (n,)).copy(),
        )


    def without_edges(self, edge_ids) -> "ToleranceSet":
        """Drop the angle tolerances of removed lines (indices into the original edge list)."""
        keep = np.setdiff1d(np.arange(self.gamma_bar.size), np.asarray(list(edge_ids), dtype=int))
        return ToleranceSet(self.delta_bar, self.gamma_bar[keep], self.p_bar, self.r_bar, self.s_bar)


def energy_factor(d: np.ndarray) -> float:
    return 1.0 + 0.5 * np.log(d.sum() / d.min())


@dataclass
class Thresholds:
    """Largest admissible initial deviation per node for P2, P4, P5, P6 and the P3 edge test."""

    frequency: np.ndarray
    angle_ok: np.ndarray
    power: np.ndarray
    ramping: np.ndarray
    energy: np.ndarray
    rate: float
    extra: dict = field(default_factory=dict)

    def admits(self, delta0: float) -> dict[str, bool]:
        return {
            "P2": bool(np.all(delta0 <= self.frequency)),
            "P3": bool(np.all(self.angle_ok)),
            "P4": bool(np.all(delta0 <= self.power)),
            "P5": bool(np.all(delta0 <= self.ramping)),
            "P6": bool(np.all(delta0 <= self.energy)),
        }


def property_thresholds(
    model: KuramotoModel, gamma, tolerances: ToleranceSet, rate: str = "certified"
) -> Thresholds:
    """Per-property bounds on the initial max frequency deviation.

    ``rate="certified"`` uses ``kappa / d_max`` in the energy bound; ``"unit-droop"``
    uses ``kappa`` unscaled (only rigorous when every ``d_i <= 1``).
    """
    g = gamma.gamma if isinstance(gamma, GammaEnvelope) else np.asarray(gamma, float)
    if rate == "certified":
        k = kappa_cert(model, g)
    elif rate == "unit-droop":
        k = kappa(model, g)
    else:
        raise ValueError(f"unknown rate {rate!r}")
    d = model.d
    deg = model.net.degree_weights()
    with np.errstate(divide="ignore", invalid="ignore"):
        ramp = np.where(deg > 0, 0.5 * tolerances.r_bar / deg, np.inf)
        energy = k * tolerances.s_bar / d / energy_factor(d)
    energy = np.nan_to_num(energy, nan=0.0, posinf=np.inf)
    return Thresholds(
        frequency=tolerances.delta_bar.copy(),
        angle_ok=g <= tolerances.gamma_bar,
        power=tolerances.p_bar / d,
        ramping=ramp,
        energy=energy,
        rate=k,
    )


def metzler_sign_check(M, x) -> float:
    """``max_{i in I_max} sgn(x_i) (M x)_i`` with ``I_max`` the maximal-modulus indices."""
    M = np.asarray(M, dtype=float)
    x = np.asarray(x, dtype=float)
    off = M - np.diag(np.diag(M))
    if np.any(off < -1e-12 * max(1.0, np.abs(M).max())):
        raise ValueError("matrix is not Metzler (negative off-diagonal entry)")
    norm = np.abs(x).max()
    imax = np.flatnonzero(np.abs(x) == norm)
    Mx = M @ x
    return float(np.max(np.sign(x[imax]) * Mx[imax]))
