import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from droopcert.lyapunov import (
    ToleranceSet,
    energy_factor,
    freq_deviation,
    freq_deviation_batch,
    kappa,
    kappa_cert,
    metzler_sign_check,
    property_thresholds,
    v_d,
    v_inf,
)
from droopcert.model import model_lambda2, state_laplacian

from conftest import TRIANGLE, make_model


def test_deviation_vanishes_at_equilibrium(rts_model, theta_pre):
    assert v_inf(rts_model, theta_pre) < 1e-9
    assert v_d(rts_model, theta_pre) < 1e-8


def test_deviation_is_d_orthogonal(rts_model):
    th = np.random.default_rng(0).uniform(-np.pi, np.pi, rts_model.n)
    v = freq_deviation(rts_model, th)
    assert abs(rts_model.d @ v) < 1e-9
    assert np.allclose(freq_deviation_batch(rts_model, th[None])[0], v)


def test_norm_inequality(rts_model):
    rng = np.random.default_rng(1)
    for _ in range(20):
        th = rng.uniform(-np.pi, np.pi, rts_model.n)
        assert v_inf(rts_model, th) <= v_d(rts_model, th) / np.sqrt(rts_model.d.min()) + 1e-12


def test_kappa_values():
    m = make_model(TRIANGLE, d=[1.0, 2.0, 4.0])
    g = np.radians([30.0, 60.0, 45.0])
    assert kappa(m, g) == pytest.approx(0.5 * 3.0)
    assert kappa_cert(m, g) == pytest.approx(0.5 * 3.0 / 4.0)


def test_energy_factor_uses_natural_log():
    assert energy_factor(np.array([1.0, 1.0, 2.0])) == pytest.approx(1 + 0.5 * np.log(4.0))


def test_thresholds_formulas():
    m = make_model(TRIANGLE, d=[1.0, 2.0, 4.0])
    tol = ToleranceSet.broadcast(3, 3, delta_bar=0.2, gamma_bar=np.radians(50), p_bar=1.0, r_bar=3.0, s_bar=5.0)
    g = np.radians([30.0, 40.0, 50.0])
    th = property_thresholds(m, g, tol)
    assert np.allclose(th.power, 1.0 / m.d)
    assert np.allclose(th.ramping, 0.5 * 3.0 / 2.0)  # unit weights, degree 2
    assert np.allclose(th.energy, th.rate * 5.0 / m.d / energy_factor(m.d))
    assert th.rate == pytest.approx(np.cos(g.max()) * 3.0 / 4.0)
    assert th.admits(0.1) == {"P2": True, "P3": True, "P4": True, "P5": True, "P6": th.energy.min() >= 0.1}
    assert not property_thresholds(m, np.radians([30, 40, 51]), tol).admits(0.0)["P3"]
    with pytest.raises(ValueError):
        property_thresholds(m, g, tol, rate="other")


def test_tolerance_validation():
    with pytest.raises(ValueError):
        ToleranceSet.broadcast(2, 1, delta_bar=-1.0)
    with pytest.raises(ValueError):
        ToleranceSet.broadcast(2, 1, gamma_bar=2.0)
    t = ToleranceSet.broadcast(2, 3, gamma_bar=[0.1, 0.2, 0.3]).without_edges([1])
    assert np.allclose(t.gamma_bar, [0.1, 0.3])


def test_metzler_check_rejects_non_metzler():
    with pytest.raises(ValueError):
        metzler_sign_check(np.array([[0.0, -1.0], [1.0, 0.0]]), np.ones(2))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_metzler_sign_check_nonpositive_inside_half_pi(seed):
    rng = np.random.default_rng(seed)
    lines = [(a, b, w) for (a, b, _), w in zip(TRIANGLE, rng.uniform(0.5, 2.0, 3))]
    m = make_model(lines, d=rng.uniform(0.5, 3.0, 3))
    th = rng.uniform(-0.7, 0.7, 3)  # pairwise differences < pi/2
    x = rng.normal(size=3)
    M = -state_laplacian(m, th) / m.d[:, None]
    assert metzler_sign_check(M, x) <= 1e-12


def test_state_laplacian_kills_constants(rts_model):
    th = np.random.default_rng(2).uniform(-np.pi, np.pi, rts_model.n)
    assert np.allclose(state_laplacian(rts_model, th) @ np.ones(rts_model.n), 0)


def test_lambda2_never_increases_when_a_line_is_removed(rts_model):
    base = model_lambda2(rts_model)
    for e in range(rts_model.net.m):
        post = rts_model.remove_lines([e])
        if post.net.is_connected:
            assert model_lambda2(post) <= base + 1e-12


def test_unit_droop_rate_is_unscaled():
    m = make_model(TRIANGLE, d=[1.0, 2.0, 4.0])
    tol = ToleranceSet.broadcast(3, 3, s_bar=1.0)
    g = np.radians([30.0, 30.0, 30.0])
    assert property_thresholds(m, g, tol, rate="unit-droop").rate == pytest.approx(4 * property_thresholds(m, g, tol).rate)
