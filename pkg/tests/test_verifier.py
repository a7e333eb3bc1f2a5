import numpy as np
import pytest

from setobs.model import LpvSystemSpec, ObserverGains, ThetaSchedule, TruthModel, constant_map
from setobs.numerics import integrate_fixed_step
from setobs.scenarios import PhaseClaim, Scenario
from setobs.verifier import (Accumulators, IdentifiabilityError, NoMatchError, NoOrderingError,
                             WindowError, averaged_oracle, averaging_agreement, check_theorem1,
                             check_theorem2, gamma_search, gramian_min_eig, lemma1_bound,
                             loop_kind, ordering_of_branch, pe_check, running_estimates,
                             solve_batch, theorem1_trace, theorem2_instant, theorem2_periodic,
                             theorem3_pairing, theta_bar_infty, update_accumulators)

H = 1e-3


def _feed(acc, CO_fn, r_fn, t1, h=H):
    for k in range(int(round(t1 / h)) + 1):
        t = k * h
        update_accumulators(acc, h, {"m": CO_fn(t), "M": CO_fn(t)}, {"m": r_fn(t), "M": r_fn(t)})
    return acc


def test_accumulators_zero_filter():
    acc = _feed(Accumulators(2), lambda t: np.zeros((1, 2)), lambda t: np.ones(1), 1.0)
    np.testing.assert_array_equal(acc.I_b["m"], 0)
    np.testing.assert_array_equal(acc.I_R["M"], 0)


def test_accumulators_scalar_unit_integral():
    acc = _feed(Accumulators(1), lambda t: np.ones((1, 1)), lambda t: np.ones(1), 1.0)
    assert acc.t == pytest.approx(1.0)
    assert acc.I_b["m"][0] == pytest.approx(1.0, abs=1e-6)
    assert acc.I_R["m"][0, 0] == pytest.approx(1.0, abs=1e-6)
    b, R = acc.estimates()
    assert b["m"][0] == pytest.approx(-1.0, abs=1e-6)


def test_estimates_need_elapsed_time():
    acc = Accumulators(1)
    acc.add_sample(0.0, {"m": np.ones((1, 1)), "M": np.ones((1, 1))}, {"m": [0.0], "M": [0.0]})
    with pytest.raises(WindowError):
        acc.estimates()


def test_accumulator_linearity_and_symmetry(rng):
    t = np.linspace(0, 3, 3001)
    CO = rng.normal(size=(len(t), 2, 3))
    r1 = rng.normal(size=(len(t), 2))
    r2 = rng.normal(size=(len(t), 2))
    a, c = 0.7, -2.3
    b1, R, _, _ = running_estimates(t, CO, r1)
    b2 = running_estimates(t, CO, r2)[0]
    b12 = running_estimates(t, CO, a * r1 + c * r2)[0]
    np.testing.assert_allclose(b12[1:], a * b1[1:] + c * b2[1:], atol=1e-12)
    np.testing.assert_allclose(R[1:], np.swapaxes(R[1:], 1, 2), atol=1e-12)


def test_incremental_matches_batch(rng):
    t = np.arange(2001) * H
    CO = rng.normal(size=(len(t), 1, 2))
    r = rng.normal(size=(len(t), 1))
    acc = Accumulators(2)
    for k in range(len(t)):
        update_accumulators(acc, H, {"m": CO[k], "M": CO[k]}, {"m": r[k], "M": r[k]})
    b, R, Ib, IR = running_estimates(t, CO, r)
    np.testing.assert_allclose(acc.I_b["m"], Ib[-1], atol=1e-12)
    np.testing.assert_allclose(acc.I_R["M"], IR[-1], atol=1e-12)


def test_pe_check_examples():
    acc = _feed(Accumulators(1, capacity=3.0), lambda t: np.ones((1, 1)), lambda t: np.zeros(1), 3.0)
    ok, val = pe_check(acc, 2.0)
    assert ok and val == pytest.approx(2.0, abs=1e-9)
    acc = _feed(Accumulators(1, capacity=3.0), lambda t: np.zeros((1, 1)), lambda t: np.zeros(1), 3.0)
    ok, val = pe_check(acc, 2.0)
    assert not ok and val == 0
    with pytest.raises(WindowError):
        pe_check(acc, 10.0)


def test_gramian_trace_matches_window_check():
    t = np.arange(4001) * H
    CO = np.stack([np.sin(t), np.cos(t)], axis=1)[:, None, :]
    IR = running_estimates(t, CO, np.zeros((len(t), 1)))[3]
    g = gramian_min_eig(t, IR, 2.0)
    assert np.isnan(g[0]) and g[-1] > 0
    acc = Accumulators(2, capacity=2.0)
    for k in range(len(t)):
        update_accumulators(acc, H, {"m": CO[k], "M": CO[k]}, {"m": [0.0], "M": [0.0]})
    assert pe_check(acc, 2.0)[1] == pytest.approx(g[-1], rel=1e-9)


def test_theta_bar_examples():
    np.testing.assert_allclose(theta_bar_infty([1, 2], np.eye(2)), [1, 2])
    assert theta_bar_infty(3.0, 2.0)[0] == 1.5
    with pytest.raises(IdentifiabilityError):
        theta_bar_infty([1, 1], np.zeros((2, 2)))
    out = solve_batch(np.array([np.eye(2), np.zeros((2, 2))]), np.array([[1.0, 2], [1, 1]]))
    np.testing.assert_allclose(out[0], [1, 2])
    assert np.all(np.isnan(out[1]))


def test_theorem1_examples():
    lo, hi = [1, -4.5], [3.5, 7]
    assert check_theorem1([5, 9], [-3, -7], lo, hi) == "ii.a"
    assert check_theorem1([-3, -7], [5, 9], lo, hi) == "ii.b"
    assert check_theorem1([2, 0], [3, 1], lo, hi) == "none"
    codes = theorem1_trace(np.array([[5.0, 9], [2, 0]]), np.array([[-3.0, -7], [3, 1]]),
                           np.array(lo), np.array(hi))
    assert codes.tolist() == [0, 2]
    assert ordering_of_branch("ii.a") == "M<=m"
    assert ordering_of_branch("ii.b") == "m<=M"
    with pytest.raises(NoOrderingError):
        ordering_of_branch("none")


def test_theorem2_scalar_toy():
    one = np.ones((1, 1))
    CO = -one
    assert theorem2_instant(one, one, CO, CO, np.array([-1.0]), np.array([2.0]), [0.0], [1.0])
    assert not theorem2_instant(one, one, CO, CO, np.array([0.5]), np.array([2.0]), [0.0], [1.0])
    # zero filters: every strict inequality degenerates
    z = np.zeros((1, 1))
    assert not theorem2_instant(one, one, z, z, np.array([-1.0]), np.array([2.0]), [0.0], [1.0])
    assert theorem2_periodic(np.array([-1.0]), one, np.array([2.0]), one, [0.0], [1.0])
    assert not theorem2_periodic(np.zeros(1), z, np.zeros(1), z, [0.0], [1.0])


def test_check_theorem2_from_window():
    acc = Accumulators(1, capacity=2.0)
    for k in range(3001):
        update_accumulators(acc, H, {"m": -np.ones((1, 1)), "M": -np.ones((1, 1))},
                            {"m": np.array([-1.0]), "M": np.array([2.0])})
    assert check_theorem2(acc, np.eye(1), np.eye(1), [0.0], [1.0], 2.0) == (True, True)
    with pytest.raises(WindowError):
        check_theorem2(acc, np.eye(1), np.eye(1), [0.0], [1.0], 5.0)


def test_pairing():
    assert theorem3_pairing("nonneg", "m<=M") == ("m", "M")
    assert theorem3_pairing("nonpos", "m<=M") == ("M", "m")
    assert theorem3_pairing("nonneg", "M<=m") == ("M", "m")
    with pytest.raises(NoOrderingError):
        theorem3_pairing("nonneg", None)
    with pytest.raises(ValueError):
        theorem3_pairing("mixed", "m<=M")


def test_loop_kind():
    assert loop_kind([[1, 0, 0], [0, 1, 0]]) == "competitive"
    assert loop_kind([[1, 0, -1], [1, 1, 0]]) == "cooperative"


def test_averaged_oracle():
    tr = averaged_oracle([0.0, 0.0], np.eye(2), np.eye(2), [0.0, 0.0], 2.0)
    assert np.all(tr.states == 0)
    tr = averaged_oracle(2.0, 1.0, 1.0, 0.0, 3.0, h=1e-3)
    np.testing.assert_allclose(tr.states[:, 0], 2 * (1 - np.exp(-tr.times)), atol=1e-9)


def test_lemma1_closed_form():
    assert lemma1_bound(1, 1, 1, 3.0, 0.0, 200.0) < 1e-20
    val = lemma1_bound(2.0, 0.5, 1.5, 3.0, 0.4, 1.5)
    assert val == pytest.approx(3.0 + (1 + 2 / (0.5 * 2.0) * np.exp(-0.5 * 0.5 * 2.0)) * 1.5 * 0.4,
                                abs=1e-14)
    with pytest.raises(ValueError):
        lemma1_bound(0, 1, 1, 1, 1, 1)


def _toy(theta=1.0, g=1.0, horizon=20.0):
    """Scalar plant x' = -x + g theta observed directly."""
    C = np.ones((1, 1))
    A = constant_map(-np.ones((1, 1)))
    spec = LpvSystemSpec(1, 1, 1, 1, C, A, A, constant_map(np.array([[g]])),
                         theta_lower=[0.0], theta_upper=[2.0])
    sched = ThetaSchedule.constant([theta], [0.0], [2.0])
    truth = TruthModel(lambda t, x: -np.ones((1, 1)), lambda t: np.zeros((1, 1)), sched,
                       np.zeros(1), lambda t, y: np.zeros(1))
    gains = ObserverGains(np.zeros((1, 1)), np.zeros((1, 1)), np.eye(1), np.eye(1))
    z = np.zeros(1)
    return Scenario("toy", spec, truth, gains, horizon, 1e-3, np.zeros(1),
                    (np.array([2.0]), np.array([0.0])), (z, z.copy()), (z.copy(), z.copy()),
                    [PhaseClaim("theorem1", "ii.a", "M<=m")])


def test_averaging_agreement_on_toy():
    agree = averaging_agreement(_toy(), transient=5.0)
    for o in ("m", "M"):
        assert agree[o]["theta_bar"][0] == pytest.approx(1.0, abs=1e-2)
        assert np.all(agree[o]["ratio"] < 0.5)


def test_gamma_search_immediate_match():
    k, Gl, Gu = gamma_search(_toy(), match_tol=0.5, transient=5.0)
    assert k == 0
    np.testing.assert_array_equal(Gl, np.eye(1))


def test_gamma_search_gives_up():
    with pytest.raises(NoMatchError):
        gamma_search(_toy(horizon=6.0), match_tol=1e-9, max_halvings=1, transient=5.0)


def test_gamma_search_unidentifiable():
    with pytest.raises(IdentifiabilityError):
        gamma_search(_toy(g=0.0, horizon=3.0), transient=1.0)
    with pytest.raises(ValueError):
        gamma_search(_toy(), shrink=1.5)


def test_lemma1_dominates_random_pe_systems(rng):
    gamma, ell, h, T = 1.0, 1.0, 1e-2, 8.0
    w = int(round(ell / h))
    for _ in range(50):
        amp = rng.uniform(0.5, 2.0, 2)
        phase = rng.uniform(0, 2 * np.pi, 2)
        freq = 2 * np.pi * rng.integers(1, 4, 2)
        Rf = lambda t: np.array([[amp[0] * np.sin(freq[0] * t + phase[0])],
                                 [amp[1] * np.cos(freq[1] * t + phase[1])]])
        bamp = rng.uniform(0, 0.5, 2)
        bf = lambda t: bamp * np.array([np.sin(3.1 * t), np.cos(1.7 * t)])
        tr = integrate_fixed_step(lambda t, p: -gamma * Rf(t) @ Rf(t).T @ p + bf(t),
                                  rng.uniform(-2, 2, 2), 0.0, T, h)
        ts = np.arange(len(tr.times)) * h
        RR = np.array([Rf(t) @ Rf(t).T for t in ts])
        IR = np.concatenate([[np.zeros((2, 2))],
                             np.cumsum(0.5 * h * (RR[1:] + RR[:-1]), axis=0)])
        vartheta = np.linalg.eigvalsh(IR[w:] - IR[:-w])[:, 0].min()
        assert vartheta > 0
        b_sup = np.abs(bamp).max() * np.sqrt(2)
        p0 = np.linalg.norm(tr.states[0])
        norms = np.linalg.norm(tr.states, axis=1)
        bound = np.array([lemma1_bound(gamma, vartheta, ell, p0, b_sup, t) for t in tr.times])
        assert np.all(norms <= bound + 1e-12)
