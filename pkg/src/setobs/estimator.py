"""Scikit-learn style wrapper around the set observer for recorded data.

The simulation API drives plant and observers together. This estimator
instead replays a measured record ``(t, y_v, u)`` through the observers,
holding each sample constant over its interval, which is the usual offline
use of an estimator object::

    est = AdaptiveSetObserver(scenario="example2").fit(Y, t=t)
    est.theta_lower_, est.theta_upper_
    env = est.transform(Y, t=t)        # state envelope, shape (k, 2 n)
    flags = est.predict(Y, t=t)        # 1 where y leaves the output envelope
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import verifier as V
from .model import LpvSystemSpec, ObserverGains
from .numerics import rk4_step
from .observers import AdaptiveObserverState, set_observer_rhs, state_observer_rhs
from .scenarios import builtin_scenario


def _flat(state: AdaptiveObserverState) -> np.ndarray:
    return np.concatenate([state.zeta_m, state.Omega_m.ravel(), state.theta_hat_m,
                           state.zeta_M, state.Omega_M.ravel(), state.theta_hat_M,
                           state.xi_m, state.xi_M])


def _split(z, n, q) -> AdaptiveObserverState:
    parts, k = [], 0
    for size, shape in ((n, None), (n * q, (n, q)), (q, None)) * 2 + ((n, None), (n, None)):
        blk = z[k:k + size]
        parts.append(blk.reshape(shape) if shape else blk)
        k += size
    return AdaptiveObserverState(*parts)


class AdaptiveSetObserver(BaseEstimator, TransformerMixin):
    """Interval estimates of ``theta`` and ``x`` from recorded outputs.

    Give either ``scenario`` (a built-in name) or ``spec`` and ``gains``.
    ``step`` is the sample spacing used when ``t`` is not passed to
    :meth:`fit`. ``period`` enables the windowed sign test for cooperative
    adaptation loops. ``sign_case`` (``"nonneg"`` or ``"nonpos"``) tells
    :meth:`transform` which parameter endpoint drives which state bound; a
    built-in scenario supplies its own.
    """

    def __init__(self, scenario: Optional[str] = None, spec: Optional[LpvSystemSpec] = None,
                 gains: Optional[ObserverGains] = None, theta_hat0=None, zeta0=None,
                 xi0=None, step: float = 1e-2, period: Optional[float] = None,
                 sign_case: Optional[str] = None):
        self.scenario = scenario
        self.spec = spec
        self.gains = gains
        self.theta_hat0 = theta_hat0
        self.zeta0 = zeta0
        self.xi0 = xi0
        self.step = step
        self.period = period
        self.sign_case = sign_case

    # -- helpers -----------------------------------------------------------

    def _resolve(self):
        if self.scenario is not None:
            sc = builtin_scenario(self.scenario, check=False)
            spec, gains = sc.spec, sc.gains
            th0, z0, x0 = sc.theta_hat0, sc.zeta0, sc.xi0
            sign = sc.phases[0].sign_case
        else:
            if self.spec is None or self.gains is None:
                raise ValueError("give scenario, or both spec and gains")
            spec, gains = self.spec, self.gains
            box = lambda a: np.where(np.isfinite(a), a, 0.0)
            th0 = (box(spec.theta_lower), box(spec.theta_upper))
            z0 = x0 = (box(spec.x_lower), box(spec.x_upper))
            sign = None
        sign = self.sign_case or sign or "nonneg"
        if sign not in ("nonneg", "nonpos"):
            raise ValueError("sign_case must be 'nonneg' or 'nonpos'")
        th0 = th0 if self.theta_hat0 is None else self.theta_hat0
        z0 = z0 if self.zeta0 is None else self.zeta0
        x0 = x0 if self.xi0 is None else self.xi0
        return spec, gains, th0, z0, x0, sign

    def _inputs(self, X, t, u, spec):
        Y = check_array(X, ensure_min_samples=2)
        if Y.shape[1] != spec.p:
            raise ValueError(f"expected {spec.p} output columns, got {Y.shape[1]}")
        t = np.arange(len(Y)) * self.step if t is None else np.asarray(t, dtype=float)
        if t.shape != (len(Y),) or np.any(np.diff(t) <= 0):
            raise ValueError("t must be strictly increasing with one entry per sample")
        U = np.zeros((len(Y), spec.m)) if u is None else check_array(u, ensure_2d=False)
        U = U.reshape(len(Y), spec.m)
        return Y, t, U

    def _replay(self, spec, gains, Y, t, U, state, pairing=("m", "M"), adapt=True):
        n, q = spec.n, spec.q
        out = np.empty((len(t), len(_flat(state))))
        z = _flat(state)
        out[0] = z

        def rhs(tt, zz, yv, uu):
            st = _split(zz, n, q)
            lower, upper = set_observer_rhs(st, spec, gains, uu, yv, tt)
            xm, xM = state_observer_rhs(st, spec, gains, uu, yv, pairing, tt)
            d = AdaptiveObserverState(*lower, *upper, xm, xM)
            if not adapt:
                d.theta_hat_m = np.zeros(q)
                d.theta_hat_M = np.zeros(q)
            return _flat(d)

        for k in range(len(t) - 1):
            z = rk4_step(lambda tt, zz: rhs(tt, zz, Y[k], U[k]), t[k], z, t[k + 1] - t[k])
            out[k + 1] = z
        return out

    # -- estimator API -----------------------------------------------------

    def fit(self, X, y=None, t=None, u=None):
        """Run both adaptive observers over the record and certify the ordering."""
        spec, gains, th0, z0, x0, sign = self._resolve()
        Y, t, U = self._inputs(X, t, u, spec)
        n, q = spec.n, spec.q
        st = AdaptiveObserverState(np.array(z0[0], float), np.zeros((n, q)), np.array(th0[0], float),
                                   np.array(z0[1], float), np.zeros((n, q)), np.array(th0[1], float),
                                   np.array(x0[0], float), np.array(x0[1], float))
        traj = self._replay(spec, gains, Y, t, U, st)
        states = [_split(row, n, q) for row in traj]
        CO = {o: np.array([spec.C @ getattr(s, "Omega_" + o) for s in states]) for o in ("m", "M")}
        r = {o: Y - np.array([spec.C @ getattr(s, "zeta_" + o) for s in states]) for o in ("m", "M")}
        est = {}
        for o in ("m", "M"):
            b, R, Ib, IR = V.running_estimates(t, CO[o], r[o])
            est[o] = (b, R, Ib, IR, V.solve_batch(R, b))
        lo, hi = spec.theta_lower, spec.theta_upper
        self.loop_kind_ = V.loop_kind(spec.C)
        self.branch_ = "none"
        self.ordering_ = None
        if self.loop_kind_ == "competitive" and np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)):
            code = V.theorem1_trace(est["m"][4], est["M"][4], lo, hi)[-1]
            self.branch_ = V.BRANCHES[code]
            if code != 2:
                self.ordering_ = V.ordering_of_branch(self.branch_)
        elif self.period is not None:
            bm, Rm = V.window_estimates(t, est["m"][2], est["m"][3], self.period)
            bM, RM = V.window_estimates(t, est["M"][2], est["M"][3], self.period)
            if V.theorem2_periodic_trace(bm, Rm, bM, RM, lo, hi)[-1]:
                self.ordering_ = "m<=M"
        self.theta_bar_inf_ = {o: est[o][4][-1] for o in ("m", "M")}
        tm, tM = states[-1].theta_hat_m, states[-1].theta_hat_M
        if self.ordering_ == "M<=m":
            self.theta_lower_, self.theta_upper_ = tM.copy(), tm.copy()
        elif self.ordering_ == "m<=M":
            self.theta_lower_, self.theta_upper_ = tm.copy(), tM.copy()
        else:
            self.theta_lower_, self.theta_upper_ = np.minimum(tm, tM), np.maximum(tm, tM)
        self.certified_ = self.ordering_ is not None
        self.times_ = t
        self.trajectory_ = traj
        self.n_features_in_ = spec.p
        self._resolved = (spec, gains, x0, V.theorem3_pairing(sign, "m<=M"))
        return self

    def transform(self, X, t=None, u=None):
        """State envelope ``[x_lower | x_upper]`` with the fitted parameter interval frozen."""
        check_is_fitted(self, "theta_lower_")
        spec, gains, x0, pairing = self._resolved
        Y, t, U = self._inputs(X, t, u, spec)
        n, q = spec.n, spec.q
        # slot m holds the lower endpoint, slot M the upper one; the adaptive
        # part is frozen so only the xi block evolves meaningfully
        st = AdaptiveObserverState(np.zeros(n), np.zeros((n, q)), self.theta_lower_.copy(),
                                   np.zeros(n), np.zeros((n, q)), self.theta_upper_.copy(),
                                   np.array(x0[0], float), np.array(x0[1], float))
        traj = self._replay(spec, gains, Y, t, U, st, pairing, adapt=False)
        xi_m = traj[:, -2 * n:-n]
        xi_M = traj[:, -n:]
        return np.hstack([np.minimum(xi_m, xi_M), np.maximum(xi_m, xi_M)])

    def predict(self, X, t=None, u=None):
        """1 where a measured output leaves the envelope implied by :meth:`transform`."""
        env = self.transform(X, t, u)
        spec = self._resolved[0]
        Y = check_array(X)
        n = spec.n
        C = spec.C
        Cp, Cn = np.clip(C, 0, None), np.clip(C, None, 0)
        lo = env[:, :n] @ Cp.T + env[:, n:] @ Cn.T
        hi = env[:, n:] @ Cp.T + env[:, :n] @ Cn.T
        return np.any((Y < lo) | (Y > hi), axis=1).astype(int)
