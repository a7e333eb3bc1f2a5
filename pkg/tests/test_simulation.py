import numpy as np
import pytest

from setobs import builtin_scenario, simulate
from setobs.numerics import DivergenceError
from setobs.simulation import verify_run


@pytest.mark.parametrize("name,horizon", [("example1", 2.0), ("example2", 2.0), ("crusher", 1.0),
                                          ("tank1", 20.0), ("tank2", 20.0)])
def test_kernel_matches_reference_path(name, horizon):
    sc = builtin_scenario(name).with_options(horizon=horizon)
    amp = sc.expected.get("noise", 0.0)
    fast = simulate(sc, seed=3, noise=amp, backend="kernel", verify=False)
    slow = simulate(sc, seed=3, noise=amp, backend="python", verify=False)
    scale = np.abs(slow.z).max(axis=0) + 1e-30
    assert np.max(np.abs(fast.z - slow.z) / scale) < 1e-10


def test_runs_are_deterministic():
    sc = builtin_scenario("example2").with_options(horizon=10.0)
    a = simulate(sc, seed=5, noise=0.5)
    b = simulate(sc, seed=5, noise=0.5)
    assert a.z.tobytes() == b.z.tobytes()
    c = simulate(sc, seed=6, noise=0.5)
    assert not np.array_equal(a.noise, c.noise)


def test_noise_bounded_and_held():
    sc = builtin_scenario("example1").with_options(horizon=1.0)
    res = simulate(sc, seed=2, noise=1.0, verify=False)
    assert np.abs(res.noise).max() <= 1.0
    np.testing.assert_allclose(res.y_v - res.y, res.noise, atol=1e-14)


def test_zero_horizon():
    res = simulate(builtin_scenario("example1").with_options(horizon=0.0))
    assert len(res.t) == 0 and res.report.phases == []


def test_horizon_must_fit_grid():
    with pytest.raises(ValueError):
        simulate(builtin_scenario("example1").with_options(horizon=1.0005))


def test_divergence_is_reported():
    sc = builtin_scenario("example1").with_options(horizon=5.0)
    g = sc.gains
    bad = type(g)(g.L_lower - 40.0, g.L_upper, g.Gamma_lower, g.Gamma_upper)
    with pytest.raises(DivergenceError):
        simulate(sc.with_options(gains=bad), verify=False)


def test_phase_bookkeeping():
    sc = builtin_scenario("example1").with_options(horizon=310.0)
    res = simulate(sc, verify=False)
    assert res.phase[0] == 0 and res.phase[-1] == 1
    assert res.t[np.argmax(res.phase == 1)] == pytest.approx(300.001)
    np.testing.assert_array_equal(res.theta[-1], [-1, -2])
    assert len(res.pairings) == 2
    rep = verify_run(res)
    assert [p.index for p in rep.phases] == [0, 1]


def test_lower_upper_respects_claim(ex1_run):
    lo, hi = ex1_run.lower_upper()
    first = ex1_run.phase == 0
    np.testing.assert_array_equal(lo[first], ex1_run.block("theta_M")[first])
    np.testing.assert_array_equal(hi[~first], ex1_run.block("theta_M")[~first])
