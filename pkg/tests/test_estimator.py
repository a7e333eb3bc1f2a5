import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from setobs import builtin_scenario, simulate
from setobs.estimator import AdaptiveSetObserver


@pytest.fixture(scope="module")
def record():
    sc = builtin_scenario("example2").with_options(horizon=40.0, step=1e-2)
    res = simulate(sc, verify=False)
    return res.t, res.y_v, res.x


def test_params_roundtrip():
    est = AdaptiveSetObserver(scenario="example2", period=2 * np.pi)
    params = est.get_params()
    assert params["scenario"] == "example2" and params["step"] == 1e-2
    twin = clone(est)
    assert twin.get_params() == params
    est.set_params(step=0.5)
    assert est.step == 0.5


def test_unfitted_transform_raises(record):
    t, y, _ = record
    with pytest.raises(NotFittedError):
        AdaptiveSetObserver(scenario="example2").transform(y, t=t)


def test_fit_transform_predict(record):
    t, y, x = record
    est = AdaptiveSetObserver(scenario="example2", period=2 * np.pi).fit(y, t=t)
    assert est.loop_kind_ == "cooperative"
    assert est.ordering_ == "m<=M" and est.certified_
    assert np.all(est.theta_lower_ <= [-0.5, -1] + np.array(1e-6))
    assert np.all(est.theta_upper_ >= [-0.5, -1] - np.array(1e-6))
    env = est.transform(y, t=t)
    assert env.shape == (len(t), 6)
    late = t >= 25
    inside = np.all((env[late, :3] <= x[late] + 1e-6) & (x[late] <= env[late, 3:] + 1e-6), axis=1)
    assert inside.mean() == 1.0
    assert est.predict(y, t=t)[late].sum() == 0


def test_input_validation(record):
    t, y, _ = record
    est = AdaptiveSetObserver(scenario="example2")
    with pytest.raises(ValueError):
        est.fit(y[:, :1])
    with pytest.raises(ValueError):
        est.fit(y, t=t[::-1])
    with pytest.raises(ValueError):
        AdaptiveSetObserver().fit(y)
    with pytest.raises(ValueError):
        AdaptiveSetObserver(scenario="example2", sign_case="both").fit(y)


def test_custom_spec_path(record):
    t, y, _ = record
    sc = builtin_scenario("example2")
    est = AdaptiveSetObserver(spec=sc.spec, gains=sc.gains, theta_hat0=sc.theta_hat0,
                              zeta0=sc.zeta0, xi0=sc.xi0, sign_case="nonpos",
                              period=2 * np.pi).fit(y[:1000], t=t[:1000])
    assert est.n_features_in_ == 2
    assert est.trajectory_.shape[0] == 1000
