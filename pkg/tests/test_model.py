import numpy as np
import pytest

from setobs import builtin_scenario
from setobs.model import (LpvSystemSpec, ObserverGains, ThetaSchedule, TruthModel, constant_map,
                          plant_rhs, sample_output)
from setobs.monotone import elementwise_leq


def _spec(C, n=None):
    C = np.atleast_2d(np.asarray(C, float))
    n = n or C.shape[1]
    Z = np.zeros((n, n))
    return LpvSystemSpec(n, 1, C.shape[0], 1, C, constant_map(Z), constant_map(Z),
                         constant_map(np.zeros((n, 1))))


def test_sample_output_examples():
    _, yv = sample_output(_spec(np.eye(2)), [1, 2])
    np.testing.assert_array_equal(yv, [1, 2])
    _, yv = sample_output(_spec([[1, 0, 0], [0, 1, 0]]), [1, 1, 1])
    np.testing.assert_array_equal(yv, [1, 1])
    y, yv = sample_output(_spec([[1, 0, -1], [1, 1, 0]]), [1, 2, 3], [0.1, -0.1])
    np.testing.assert_array_equal(y, [-2, 3])
    np.testing.assert_allclose(yv, [-1.9, 2.9], atol=1e-15)


def test_plant_rhs_zero_state():
    spec = _spec(np.eye(2))
    truth = TruthModel(lambda t, x: np.eye(2), lambda t: np.zeros((2, 1)),
                       ThetaSchedule.constant([0.0], [-1.0], [1.0]), np.zeros(2),
                       lambda t, y: np.zeros(1))
    assert np.all(plant_rhs(spec, truth, 0.0, np.zeros(2)) == 0)


def test_plant_rhs_example1_at_origin_time():
    sc = builtin_scenario("example1")
    # A(0) x = [0, 0.8, -1.4] and G(0) theta = [1, 2, 1] for x = [1, 1, 1]
    np.testing.assert_allclose(plant_rhs(sc.spec, sc.truth, 0.0, np.ones(3)), [1, 2.8, -0.4],
                               atol=1e-12)


def test_schedule_switches():
    s = ThetaSchedule.build([[2, 1], [-1, -2]], [[1, -4.5], [-2.5, -9]], [[3.5, 7], [0, 4.5]], [300])
    np.testing.assert_array_equal(s(0.0), [2, 1])
    np.testing.assert_array_equal(s(300.0), [2, 1])
    np.testing.assert_array_equal(s(300.001), [-1, -2])
    assert s.box(400)[0].tolist() == [-2.5, -9]
    assert s.pieces(600) == [(0.0, 300.0, 0), (300.0, 600.0, 1)]
    assert s.pieces(100) == [(0.0, 100, 0)]


@pytest.mark.parametrize("kw", [dict(switch_times=()), dict(switch_times=(5, 3, 1))])
def test_schedule_rejects_inconsistent(kw):
    with pytest.raises(ValueError):
        ThetaSchedule.build([[0], [1], [2]], [[0]] * 3, [[1]] * 3, **kw)


def test_schedule_rejects_inverted_box():
    with pytest.raises(ValueError):
        ThetaSchedule.constant([0], [1], [-1])


def test_spec_validation():
    with pytest.raises(ValueError):
        LpvSystemSpec(3, 1, 2, 1, np.ones((3, 3)), constant_map(np.zeros((3, 3))),
                      constant_map(np.zeros((3, 3))), constant_map(np.zeros((3, 1))))
    with pytest.raises(ValueError):
        LpvSystemSpec(2, 1, 1, 1, np.ones((1, 2)), constant_map(np.zeros((2, 2))),
                      constant_map(np.zeros((2, 2))), constant_map(np.zeros((2, 1))),
                      x_lower=[np.nan, 0])


def test_gains_need_spd_gamma():
    with pytest.raises(ValueError):
        ObserverGains(np.zeros((2, 1)), np.zeros((2, 1)), -np.eye(1), np.eye(1))
    g = ObserverGains(np.zeros((2, 1)), np.zeros((2, 1)), 2 * np.eye(1), np.eye(1)).scaled(0.5)
    assert g.Gamma_lower[0, 0] == 1.0 and g.Gamma_upper[0, 0] == 0.5


@pytest.mark.parametrize("name", ["example1", "example2", "crusher"])
def test_truth_inside_envelope(name):
    sc = builtin_scenario(name)
    for t in np.linspace(0, 30, 301):
        A = sc.truth.A_true(t, None)
        assert elementwise_leq(sc.spec.A_lower(t, None), A)
        assert elementwise_leq(A, sc.spec.A_upper(t, None))
