import numpy as np
import pytest

from setobs import SCENARIOS, builtin_scenario
from setobs.model import LpvSystemSpec
from setobs.monotone import elementwise_leq, is_cooperative
from setobs.scenarios import (AssumptionError, CrusherParams, DomainError, TankParams,
                              UnknownScenarioError, crusher_inverse_mass, crusher_model, saturate,
                              signed_sqrt, tank_controller, tank_reference, three_tank_a,
                              three_tank_lpv, three_tank_rhs)

P = TankParams()
A_COEF = np.array([P.a13, P.a32, P.a20])


@pytest.mark.parametrize("name", SCENARIOS)
def test_builtins_construct_with_check(name):
    sc = builtin_scenario(name)
    assert sc.name == name
    assert isinstance(sc.spec, LpvSystemSpec)


def test_unknown_scenario():
    with pytest.raises(UnknownScenarioError):
        builtin_scenario("example9")


def test_failed_assumption_raises():
    with pytest.raises(AssumptionError) as info:
        builtin_scenario("tank2", params=TankParams(ell=-50.0))
    assert not info.value.report.passed


def test_example1_values():
    sc = builtin_scenario("example1")
    np.testing.assert_array_equal(sc.gains.Gamma_lower, 5 * np.eye(2))
    np.testing.assert_array_equal(sc.truth.x0, [1, 1, 1])
    lo, hi = sc.truth.theta_schedule.box(0.0)
    assert lo.tolist() == [1, -4.5] and hi.tolist() == [3.5, 7]


def test_example2_values():
    sc = builtin_scenario("example2")
    assert sc.period == pytest.approx(2 * np.pi)
    assert sc.transient == 25.0
    np.testing.assert_array_equal(np.diag(sc.gains.Gamma_upper), [40, 180])


def test_tank_values():
    sc = builtin_scenario("tank1")
    prm = sc.params
    assert (prm["Sc"], prm["k"], prm["ell"], prm["period"]) == (0.0154, 1.329e-3, 3.0, 200.0)
    assert list(prm["x_lower"]) == [0.44, 0.04, 0.24] and list(prm["x_upper"]) == [0.56, 0.16, 0.36]


def test_signed_sqrt_and_saturation():
    assert signed_sqrt(4.0) == 2.0 and signed_sqrt(-4.0) == -2.0
    assert saturate(-1.0) == 0.0 and saturate(2.0) == 2.0


def test_tank_no_flow_between_equal_levels():
    dx = three_tank_rhs([0.5, 0.1, 0.5], [0, 0], [0, 0], A_COEF, P.Sc)
    assert dx[0] == 0.0


def test_factored_form_equals_nonlinear_rhs(rng):
    B = np.array([[1.0, 0], [0, 1], [0, 0]]) / P.Sc
    lo, hi = np.array(P.x_lower), np.array(P.x_upper)
    worst = 0.0
    for _ in range(1000):
        x = rng.uniform(lo, hi)
        u = rng.uniform(0, 1e-4, 2)
        th = rng.uniform(-1e-4, 1e-4, 3)
        lhs = three_tank_a(x, A_COEF, P.Sc) @ x + B @ u + th / P.Sc
        worst = max(worst, np.abs(lhs - three_tank_rhs(x, u, th, A_COEF, P.Sc)).max())
    assert worst <= 1e-12


def test_tank_reference_and_controller():
    np.testing.assert_allclose(tank_reference(0.0, P), [0.5, 0.1])
    y = np.array([0.5, 0.1])
    u = tank_controller(0.0, y, P)
    assert u[0] == 0.0
    assert u[1] == pytest.approx(P.a20 * np.sqrt(0.1), rel=1e-12)


def test_tank_lpv_scenario2_center():
    y = 0.5 * (np.array(P.x_lower) + np.array(P.x_upper))
    a_lo, a_hi, C, G, L, _ = three_tank_lpv(y, "scenario2", P)
    A = three_tank_a(y, A_COEF, P.Sc)
    assert elementwise_leq(a_lo, A) and elementwise_leq(A, a_hi)
    assert np.all(np.diag(a_lo) <= 0) and np.all(np.diag(a_hi) <= 0)
    np.testing.assert_array_equal(C, np.eye(3))
    np.testing.assert_allclose(G, np.eye(3) / P.Sc)
    np.testing.assert_array_equal(L, 3 * np.eye(3))


def test_tank_bounds_cooperative(rng):
    lo, hi = np.array(P.x_lower), np.array(P.x_upper)
    for which, p in (("scenario1", 2), ("scenario2", 3)):
        for _ in range(50):
            a_lo, a_hi, *_ = three_tank_lpv(rng.uniform(lo[:p], hi[:p]), which, P)
            assert is_cooperative(a_lo) and is_cooperative(a_hi)


def test_tank_scenario1_envelope(rng):
    lo, hi = np.array(P.x_lower), np.array(P.x_upper)
    for _ in range(500):
        x = rng.uniform(lo, hi)
        a_lo, a_hi, *_ = three_tank_lpv(x[:2], "scenario1", P)
        A = three_tank_a(x, A_COEF, P.Sc)
        assert elementwise_leq(a_lo, A) and elementwise_leq(A, a_hi)
    a_lo, a_hi, *_ = three_tank_lpv(np.array([0.5, 0.1]), "scenario1", P)
    assert np.all(np.isfinite(a_lo)) and np.all(np.isfinite(a_hi))


def test_tank_lpv_domain():
    with pytest.raises(DomainError):
        three_tank_lpv(np.array([0.9, 0.1]), "scenario1", P)
    with pytest.raises(ValueError):
        three_tank_lpv(np.array([0.5, 0.1]), "scenario3", P)


def test_tank_stays_in_box_fault_free():
    from setobs import simulate
    sc = builtin_scenario("tank2").with_options(horizon=200.0)
    res = simulate(sc, verify=False)
    assert np.all(res.x >= np.array(P.x_lower)) and np.all(res.x <= np.array(P.x_upper))


def test_crusher_structure():
    spec, truth, gains = crusher_model(CrusherParams())
    for A in (spec.A_lower(0, None), spec.A_upper(0, None)):
        np.testing.assert_array_equal(A[0], [0, 1, 0, 0])
        np.testing.assert_array_equal(A[2], [0, 0, 0, 1])
    for t in (0.3, 2.7, 4.1):
        G = spec.G(t, None)
        assert np.all(G[[0, 2]] == 0)


def test_crusher_inverse_mass_in_band():
    p = CrusherParams()
    for t in np.linspace(0, p.t_k, 501):
        im, iM = crusher_inverse_mass(t, p)
        assert 1 / p.m_max - 1e-9 <= im <= 1 / p.m_min + 1e-9
        assert 1 / p.m_max - 1e-9 <= iM <= 1 / p.m_min + 1e-9
    im, _ = crusher_inverse_mass(0.5 * p.t_k, p)
    drift_free = 0.5 * (1 / p.m_max - 1 / p.m_min) + 1 / p.m_min
    assert im == pytest.approx(drift_free + 0.05 * np.sin(1.5 * p.t_k), abs=1e-12)
