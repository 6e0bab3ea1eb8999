"""Fixed-step integration in the rotating frame and constraint monitoring."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .lyapunov import ToleranceSet, freq_deviation_batch
from .model import KuramotoModel, as_angles, synchronous_frequency
from .network import cycle_basis
from .torus import GammaEnvelope, winding_vectors


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled solution.  ``states`` are wrapped angles in the frame rotating at ``omega_syn``."""

    model: KuramotoModel
    times: np.ndarray
    states: np.ndarray
    freq_dev: np.ndarray
    edge_diffs: np.ndarray
    winding: np.ndarray
    energy_dev: np.ndarray
    dt: float

    def __len__(self):
        return len(self.times)

    @property
    def v_inf(self) -> np.ndarray:
        return np.abs(self.freq_dev).max(axis=1)

    @property
    def v_d(self) -> np.ndarray:
        return np.sqrt(np.einsum("ki,i,ki->k", self.freq_dev, self.model.d, self.freq_dev))

    @property
    def power(self) -> np.ndarray:
        """Electrical injections ``p_e`` per sample (MW)."""
        return _injections_batch(self.model, self.states)


def _injections_batch(model: KuramotoModel, states: np.ndarray) -> np.ndarray:
    net = model.net
    flow = net.weights * np.sin(states[:, net.src] - states[:, net.dst])
    out = np.zeros((states.shape[0], net.n))
    np.add.at(out.T, net.src, flow.T)
    np.subtract.at(out.T, net.dst, flow.T)
    return out


def power_injections(model: KuramotoModel, theta) -> np.ndarray:
    """``p_e,i = sum_j a_ij sin(theta_i - theta_j)`` (MW)."""
    return model.coupling(theta)


def ramping_rate(model: KuramotoModel, theta) -> np.ndarray:
    """Analytic ``d p_e / dt`` along the flow (MW/s)."""
    th = as_angles(theta)
    net = model.net
    rate = model.rate_factor * (model.drift - model.coupling(th) / model.d)
    flow = net.weights * np.cos(th[net.src] - th[net.dst]) * (rate[net.src] - rate[net.dst])
    out = np.zeros(net.n)
    np.add.at(out, net.src, flow)
    np.subtract.at(out, net.dst, flow)
    return out


def _ramping_batch(model: KuramotoModel, states: np.ndarray, freq_dev: np.ndarray) -> np.ndarray:
    net = model.net
    rate = model.rate_factor * freq_dev
    flow = net.weights * np.cos(states[:, net.src] - states[:, net.dst]) * (rate[:, net.src] - rate[:, net.dst])
    out = np.zeros_like(states)
    np.add.at(out.T, net.src, flow.T)
    np.subtract.at(out.T, net.dst, flow.T)
    return out


def integrate(model: KuramotoModel, theta0, t_end: float, dt: float = 1e-3, stride: int = 1) -> Trajectory:
    """Classical RK4 with fixed step ``dt``; a sample is kept every ``stride`` steps."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not t_end >= dt:
        raise ValueError("t_end must be at least dt")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    th0 = as_angles(theta0).astype(float)
    if th0.shape != (model.n,):
        raise ValueError(f"initial state has shape {th0.shape}, model has {model.n} nodes")
    nsteps = int(round(t_end / dt))
    net = model.net
    states = kernels.rk4_integrate(
        th0, net.src, net.dst, net.weights, 1.0 / model.d, model.drift,
        model.rate_factor, float(dt), nsteps, int(stride),
    )
    if not np.all(np.isfinite(states)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(states), axis=1))[0])
        raise IntegrationError(f"non-finite state at sample {bad} (dt={dt}); check the model data")
    steps = np.arange(0, nsteps + 1, stride)
    if steps[-1] != nsteps:
        steps = np.append(steps, nsteps)
    times = steps * dt
    fdev = freq_deviation_batch(model, states)
    gaps = np.abs(np.mod(states[:, net.src] - states[:, net.dst] + np.pi, 2 * np.pi) - np.pi)
    basis = cycle_basis(net)
    try:
        wind = winding_vectors(states, net, basis)
    except ValueError:
        wind = np.full((len(times), len(basis)), np.iinfo(np.int64).min)
    # p_e - p_star = -d * (theta_dot - omega_star); integrate by trapezoid
    excess = -model.d * (fdev + (synchronous_frequency(model) - model.omega_star))
    energy = np.zeros_like(states)
    if len(times) > 1:
        inc = 0.5 * (excess[1:] + excess[:-1]) * np.diff(times)[:, None]
        energy[1:] = np.cumsum(inc, axis=0)
    return Trajectory(model, times, states, fdev, gaps, wind, energy, float(dt))


def detect_winding_escape(traj: Trajectory, gamma) -> float | None:
    """First sample time at which the state leaves the cohesive set, or ``None``."""
    g = gamma.gamma if isinstance(gamma, GammaEnvelope) else np.broadcast_to(gamma, (traj.model.net.m,))
    out = np.any(traj.edge_diffs >= g, axis=1)
    if not np.any(out):
        return None
    return float(traj.times[np.argmax(out)])


SATISFIED = "satisfied"
VIOLATED = "violated"
UNDETERMINED = "undetermined"


@dataclass
class PropertyStatus:
    status: str
    time: float | None = None
    index: int | None = None
    value: float | None = None

    def __str__(self):
        if self.status == VIOLATED:
            return f"violated at t={self.time:g} (index {self.index}, value {self.value:.6g})"
        return self.status


@dataclass
class MonitorReport:
    properties: dict
    worst: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.properties[key]

    def summary(self) -> str:
        return "\n".join(f"{k}: {v}" for k, v in self.properties.items())


def _first_violation(values: np.ndarray, limit: np.ndarray, times: np.ndarray):
    excess = values - limit
    bad = excess > 0
    if not np.any(bad):
        return None
    k = int(np.argmax(np.any(bad, axis=1)))
    i = int(np.argmax(np.where(bad[k], excess[k], -np.inf)))
    return PropertyStatus(VIOLATED, float(times[k]), i, float(values[k, i]))


def monitor(traj: Trajectory, tolerances: ToleranceSet, sync_tol: float = 1e-3) -> MonitorReport:
    """Check the six operating properties along a sampled trajectory.

    P1 (synchronization) is satisfied when ``V_D`` drops below
    ``sync_tol * sqrt(d_sum)`` and stays there over the final 10% of the
    horizon.  P2-P5 are checked sample by sample, P6 on the running energy
    integral.  Properties without a violation are ``satisfied`` only when P1
    converged; otherwise the horizon is too short to tell.
    """
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    model = traj.model
    times = traj.times
    vd = traj.v_d
    thresh = sync_tol * np.sqrt(model.d.sum())
    hold = times >= times[-1] - 0.1 * (times[-1] - times[0])
    converged = bool(np.all(vd[hold] < thresh))
    props = {"P1": PropertyStatus(SATISFIED if converged else UNDETERMINED)}
    absdev = np.abs(traj.freq_dev)
    pe = traj.power
    ramp = np.abs(_ramping_batch(model, traj.states, traj.freq_dev))
    power_dev = np.abs(pe - model.p_star)
    checks = {
        "P2": (absdev, tolerances.delta_bar),
        "P3": (traj.edge_diffs, tolerances.gamma_bar),
        "P4": (power_dev, tolerances.p_bar),
        "P5": (ramp, tolerances.r_bar),
        "P6": (np.abs(traj.energy_dev), tolerances.s_bar),
    }
    default = SATISFIED if converged else UNDETERMINED
    for key, (vals, lim) in checks.items():
        props[key] = _first_violation(vals, np.broadcast_to(lim, vals.shape[1:]), times) or PropertyStatus(default)
    worst = {
        "max_freq_dev_hz": float(absdev.max()),
        "max_angle_deg": float(np.degrees(traj.edge_diffs.max())) if traj.edge_diffs.size else 0.0,
        "max_power_dev_mw": float(power_dev.max()),
        "max_ramp_mw_s": float(ramp.max()),
        "max_energy_mws": float(np.abs(traj.energy_dev).max()),
        "final_v_d": float(vd[-1]),
    }
    return MonitorReport(props, worst)
