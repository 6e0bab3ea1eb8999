import numpy as np
import pytest
from scipy.integrate import solve_ivp

from droopcert.lyapunov import ToleranceSet
from droopcert.model import vector_field
from droopcert.simulate import (
    SATISFIED,
    UNDETERMINED,
    VIOLATED,
    detect_winding_escape,
    integrate,
    monitor,
    power_injections,
    ramping_rate,
)

from conftest import TRIANGLE, make_model


def _model():
    return make_model(TRIANGLE, p_star=[1.0, -0.4, -0.4], d=[1.0, 2.0, 1.5])


def test_matches_scipy_ode_solver():
    m = _model()
    th0 = np.array([0.3, -0.2, 0.1])
    traj = integrate(m, th0, 2.0, dt=1e-3, stride=100)
    # rotating-frame reference without wrapping

    ref = solve_ivp(lambda t, x: m.drift - m.coupling(x) / m.d, (0, 2.0), th0, rtol=1e-11, atol=1e-12)
    diff = np.angle(np.exp(1j * (traj.states[-1] - ref.y[:, -1])))
    assert np.abs(diff).max() < 1e-9


def test_sampling_grid():
    traj = integrate(_model(), np.zeros(3), 0.0105, dt=1e-3, stride=4)
    assert np.allclose(traj.times, [0.0, 0.004, 0.008, 0.010])


def test_input_validation():
    m = _model()
    with pytest.raises(ValueError):
        integrate(m, np.zeros(3), 1.0, dt=0.0)
    with pytest.raises(ValueError):
        integrate(m, np.zeros(2), 1.0)
    with pytest.raises(ValueError):
        integrate(m, np.zeros(3), 1.0, stride=0)


def test_converges_and_monitor_reports_satisfied():
    m = _model()
    traj = integrate(m, np.array([0.2, -0.1, 0.0]), 30.0, dt=1e-2)
    rep = monitor(traj, ToleranceSet.unconstrained(3, 3))
    assert rep["P1"].status == SATISFIED
    assert all(rep[k].status == SATISFIED for k in ("P2", "P3", "P4", "P5", "P6"))
    assert traj.v_d[-1] < 1e-6


def test_monitor_flags_first_violation():
    m = _model()
    traj = integrate(m, np.array([1.0, -1.0, 0.0]), 1.0, dt=1e-3)
    tol = ToleranceSet.broadcast(3, 3, delta_bar=0.05)
    rep = monitor(traj, tol)
    assert rep["P2"].status == VIOLATED
    assert rep["P2"].time == 0.0
    assert rep["P1"].status == UNDETERMINED
    assert "violated at t=0" in rep.summary()


def test_ramping_rate_matches_finite_difference():
    m = _model()
    th = np.array([0.4, -0.3, 0.2])
    traj = integrate(m, th, 2e-3, dt=1e-4)
    fd = (power_injections(m, traj.states[-1]) - power_injections(m, traj.states[0])) / traj.times[-1]
    mid = ramping_rate(m, traj.states[10])
    assert np.allclose(fd, mid, atol=1e-5)


def test_energy_integral_tracks_power_excess():
    m = _model()
    traj = integrate(m, np.array([0.4, -0.3, 0.2]), 1.0, dt=1e-3)
    excess = traj.power - m.p_star
    ref = np.trapezoid(excess, traj.times, axis=0) if hasattr(np, "trapezoid") else np.trapz(excess, traj.times, axis=0)
    assert np.allclose(traj.energy_dev[-1], ref, atol=1e-9)


def test_equilibrium_is_fixed_point(rts_model, theta_pre):
    traj = integrate(rts_model, theta_pre, 1.0, dt=1e-2)
    assert np.abs(traj.freq_dev).max() < 1e-9
    assert detect_winding_escape(traj, np.pi / 2) is None


def test_post_fault_escape(rts_post, theta_pre):
    traj = integrate(rts_post, theta_pre, 40.0, dt=1e-3, stride=10)
    t = detect_winding_escape(traj, np.pi / 2)
    assert t is not None and 5.0 < t < 20.0
    changed = np.any(traj.winding != traj.winding[0], axis=1)
    assert changed.any()
    assert traj.times[np.argmax(changed)] > t
