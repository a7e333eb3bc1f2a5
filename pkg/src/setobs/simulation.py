"""Coupled plant + observer simulation and post-run verification."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _models as K
from ._kernel import layout, run_chunk
from .faults import FaultIndicatorTrace, fault_indicators
from .model import LpvSystemSpec, TruthModel
from .numerics import DivergenceError, noise_block, rk4_step
from .observers import AdaptiveObserverState, IdealObserverState, coupled_rhs, pack
from .scenarios import Scenario
from . import verifier as V

ENDPOINT = {"m": 0, "M": 1}


def _pairing_for(claim) -> tuple:
    sign = claim.sign_case if claim.sign_case in ("nonneg", "nonpos") else "nonneg"
    return V.theorem3_pairing(sign, claim.ordering)


def constant_kernel_par(spec: LpvSystemSpec, truth: TruthModel) -> Optional[np.ndarray]:
    """Parameter vector for the constant-matrix kernel family, if applicable."""
    if not spec.is_constant or truth.rhs is not None:
        return None
    probes = [(0.0, truth.x0), (1.37, truth.x0 + 1.0), (5.1, -truth.x0)]
    A = truth.A_true(0.0, truth.x0)
    B = truth.B_true(0.0)
    u = truth.u(0.0, spec.C @ truth.x0)
    for t, x in probes:
        if (not np.array_equal(truth.A_true(t, x), A) or not np.array_equal(truth.B_true(t), B)
                or not np.array_equal(truth.u(t, spec.C @ x), u)):
            return None
    parts = [spec.A_lower.constant, spec.A_upper.constant, spec.B_lower, spec.B_upper,
             spec.G.constant, spec.phi.constant, A, B, np.atleast_1d(u)]
    return np.concatenate([np.asarray(p, float).ravel() for p in parts])


@dataclass
class SimulationResult:
    scenario: Scenario
    t: np.ndarray
    z: np.ndarray
    noise: np.ndarray
    theta: np.ndarray
    phase: np.ndarray
    pairings: list
    ideal: bool
    seed: int
    wall_time: float = 0.0
    report: Optional[V.ConditionReport] = None
    indicators: Optional[FaultIndicatorTrace] = None
    traces: dict = field(default_factory=dict)

    @property
    def off(self) -> dict:
        return layout(self.scenario.spec.n, self.scenario.spec.q, self.ideal)

    def block(self, key: str) -> np.ndarray:
        n, q = self.scenario.spec.n, self.scenario.spec.q
        size = {"x": n, "zeta_m": n, "zeta_M": n, "xi_m": n, "xi_M": n, "zeta": n,
                "theta_m": q, "theta_M": q, "theta": q}.get(key)
        o = self.off[key]
        if size is None:
            return self.z[:, o:o + n * q].reshape(-1, n, q)
        return self.z[:, o:o + size]

    @property
    def x(self):
        return self.block("x")

    @property
    def y(self):
        return self.x @ self.scenario.spec.C.T

    @property
    def y_v(self):
        return self.y + self.noise

    def inputs(self) -> np.ndarray:
        u = self.scenario.truth.u
        return np.array([u(t, yv) for t, yv in zip(self.t, self.y_v)]) if len(self.t) else \
            np.zeros((0, self.scenario.spec.m))

    def lower_upper(self):
        """Parameter endpoints in the claimed order at every sample."""
        tm, tM = self.block("theta_m"), self.block("theta_M")
        swap = np.array([self.scenario.phases[k].ordering == "M<=m" for k in self.phase])
        lo = np.where(swap[:, None], tM, tm)
        hi = np.where(swap[:, None], tm, tM)
        return lo, hi

    def state_envelope(self):
        """``(lower, upper)`` state bounds from the state observers."""
        xm, xM = self.block("xi_m"), self.block("xi_M")
        return np.minimum(xm, xM), np.maximum(xm, xM)


def _initial_state(sc: Scenario, ideal: bool) -> np.ndarray:
    spec = sc.spec
    st = AdaptiveObserverState(np.array(sc.zeta0[0], float), np.zeros((spec.n, spec.q)),
                               np.array(sc.theta_hat0[0], float), np.array(sc.zeta0[1], float),
                               np.zeros((spec.n, spec.q)), np.array(sc.theta_hat0[1], float),
                               np.array(sc.xi0[0], float), np.array(sc.xi0[1], float))
    ist = None
    if ideal:
        ist = IdealObserverState(sc.truth.x0.copy(), np.zeros((spec.n, spec.q)),
                                 np.array(sc.theta_hat0[1], float))
    return pack(sc.truth.x0, st, ist)


def _python_chunk(sc, t0, h, nsteps, z0, noise, theta, pair, ideal, out):
    names = ("m", "M")
    pairing = (names[pair[0]], names[pair[1]])
    z = z0.copy()
    out[0] = z
    for s in range(nsteps):
        t = t0 + s * h
        v = noise[s]
        f = lambda tt, zz: coupled_rhs(sc.spec, sc.truth, sc.gains, tt, zz, v, theta, pairing, ideal)
        z = rk4_step(f, t, z, h)
        if not np.all(np.isfinite(z)) or z @ z > 1e18:
            return s
        out[s + 1] = z
    return nsteps


def simulate(sc: Scenario, seed: int = 0, noise=None, ideal: Optional[bool] = None,
             verify: bool = True, backend: str = "auto") -> SimulationResult:
    """Integrate plant and observers over the scenario horizon.

    ``noise`` overrides the scenario amplitude (a scalar or one value per
    output). The run is split at parameter switches so each piece carries its
    own state-observer pairing.
    """
    spec, truth, gains = sc.spec, sc.truth, sc.gains
    ideal = sc.ideal if ideal is None else ideal
    h = float(sc.step)
    amp = sc.noise_amplitude if noise is None else np.broadcast_to(np.asarray(noise, float), (spec.p,))
    if sc.horizon < 0 or h <= 0:
        raise ValueError("horizon must be >= 0 and step > 0")
    nsteps = int(round(sc.horizon / h))
    if abs(nsteps * h - sc.horizon) > 1e-9 * max(1.0, sc.horizon):
        raise ValueError("horizon must be a whole number of steps")
    off = layout(spec.n, spec.q, ideal)
    started = time.perf_counter()
    if nsteps == 0:
        empty = np.zeros((0, off["size"]))
        res = SimulationResult(sc, np.zeros(0), empty, np.zeros((0, spec.p)),
                               np.zeros((0, spec.q)), np.zeros(0, int), [], ideal, seed)
        res.report = V.ConditionReport([], V.loop_kind(spec.C))
        res.indicators = fault_indicators(res)
        return res

    kind, par = spec.kernel_kind, spec.kernel_par
    if par is None:
        par = constant_kernel_par(spec, truth)
        kind = K.CONSTANT
    use_kernel = par is not None and backend != "python"
    if backend == "kernel" and not use_kernel:
        raise ValueError("this scenario has no compiled kernel binding")

    z = np.empty((nsteps + 1, off["size"]))
    z[0] = _initial_state(sc, ideal)
    noise_all = noise_block(seed, amp, 0, nsteps + 1)
    theta = np.empty((nsteps + 1, spec.q))
    phase = np.empty(nsteps + 1, dtype=int)
    pairings = []
    sched = truth.theta_schedule
    theta[0] = sched(0.0)
    phase[0] = 0
    for t_a, t_b, k in sched.pieces(sc.horizon):
        i0 = int(round(t_a / h))
        i1 = int(round(t_b / h))
        if i1 <= i0:
            continue
        claim = sc.phases[min(k, len(sc.phases) - 1)]
        pair = _pairing_for(claim)
        pairings.append(pair)
        pair_idx = np.array([ENDPOINT[pair[0]], ENDPOINT[pair[1]]])
        th = np.asarray(sched.values[k], float)
        chunk = np.empty((i1 - i0 + 1, off["size"]))
        args = (i0 * h, h, i1 - i0, z[i0].copy(), noise_all[i0:i1])
        if use_kernel:
            mats = [np.ascontiguousarray(a, dtype=float) for a in
                    (spec.C, gains.L_lower, gains.L_upper, gains.Gamma_lower, gains.Gamma_upper)]
            done = run_chunk(kind, np.ascontiguousarray(par, dtype=float), *args, th, *mats,
                             pair_idx, ideal, spec.n, spec.m, spec.p, spec.q, chunk)
        else:
            done = _python_chunk(sc, *args, th, pair_idx, ideal, chunk)
        if done < i1 - i0:
            raise DivergenceError((i0 + done + 1) * h)
        z[i0 + 1:i1 + 1] = chunk[1:]
        theta[i0 + 1:i1 + 1] = th
        phase[i0 + 1:i1 + 1] = k
    t = np.arange(nsteps + 1) * h
    res = SimulationResult(sc, t, z, noise_all, theta, phase, pairings, ideal, seed)
    if verify:
        res.report = verify_run(res)
    res.indicators = fault_indicators(res)
    res.wall_time = time.perf_counter() - started
    return res


def verify_run(res: SimulationResult) -> V.ConditionReport:
    """Evaluate every applicability check phase by phase on a finished run."""
    sc = res.scenario
    spec, gains = sc.spec, sc.gains
    C = spec.C
    kind = V.loop_kind(C)
    yv = res.y_v
    CO = {o: C @ res.block("Omega_" + o) for o in ("m", "M")}
    r = {o: yv - res.block("zeta_" + o) @ C.T for o in ("m", "M")}
    sched = sc.truth.theta_schedule
    phases = []
    traces = {"theta_bar_m": np.full(res.theta.shape, np.nan),
              "theta_bar_M": np.full(res.theta.shape, np.nan),
              "branch": np.full(len(res.t), "none", dtype=object),
              "pe_m": np.zeros(len(res.t), bool), "pe_M": np.zeros(len(res.t), bool)}
    lo_all, hi_all = res.lower_upper()
    x = res.x
    env_lo, env_hi = res.state_envelope()
    u_all = res.inputs() if any(c.sign_case for c in sc.phases) else None
    for (t_a, t_b, k), pair in zip(sched.pieces(sc.horizon), res.pairings):
        sel = (res.phase == k)
        idx = np.nonzero(sel)[0]
        if k > 0:
            # the switch sample closes the previous piece; accumulate from it
            idx = np.concatenate([[idx[0] - 1], idx])
        t = res.t[idx]
        lo, hi = sched.lower[k], sched.upper[k]
        claim = sc.phases[min(k, len(sc.phases) - 1)]
        pr = V.PhaseReport(k, float(t[0]), float(t[-1]), lo, hi, claim, pairing=pair)
        est = {}
        for o in ("m", "M"):
            b, R, Ib, IR = V.running_estimates(t, CO[o][idx], r[o][idx])
            tb = V.solve_batch(R, b)
            est[o] = (b, R, Ib, IR, tb)
            traces["theta_bar_" + o][idx] = tb
            pr.b_hat[o] = b[-1]
            pr.R_hat[o] = R[-1]
            pr.theta_bar_inf[o] = tb[-1]
            ell = sc.pe_window or min(2 * np.pi, t[-1] - t[0])
            gram = V.gramian_min_eig(t, IR, ell)
            pe = gram >= V.THETA_MIN
            traces["pe_" + o][idx] = pe
            setattr(pr, "pe_value_" + o, float(gram[-1]) if np.isfinite(gram[-1]) else float("nan"))
            setattr(pr, "pe_ok_" + o, bool(pe[-1]))
        code = V.theorem1_trace(est["m"][4], est["M"][4], lo, hi)
        traces["branch"][idx] = np.array(V.BRANCHES)[code]
        pr.theorem1_branch = V.BRANCHES[code[-1]]
        pr.branch_since = _since(t, code == code[-1]) if code[-1] != 2 else None
        if sc.period is not None:
            bm, Rm = V.window_estimates(t, est["m"][2], est["m"][3], sc.period)
            bM, RM = V.window_estimates(t, est["M"][2], est["M"][3], sc.period)
            per = V.theorem2_periodic_trace(bm, Rm, bM, RM, lo, hi)
            pr.theorem2_periodic_ok = bool(per[-1])
            pr.periodic_since = _since(t, per) if per[-1] else None
            traces.setdefault("theorem2_periodic", np.zeros(len(res.t), bool))[idx] = per
        after = t >= t[0] + sc.transient
        inst = V.theorem2_instant_trace(gains.Gamma_lower, gains.Gamma_upper, CO["m"][idx],
                                        CO["M"][idx], r["m"][idx], r["M"][idx], lo, hi)
        pr.theorem2_instant_ok = bool(np.any(after) and np.all(inst[after]))
        if kind == "competitive" and pr.theorem1_branch != "none":
            pr.ordering = V.ordering_of_branch(pr.theorem1_branch)
        elif pr.theorem2_periodic_ok or pr.theorem2_instant_ok:
            pr.ordering = "m<=M"
        th = res.theta[idx]
        tol = 1e-9
        cont = np.all((lo_all[idx] <= th + tol) & (th <= hi_all[idx] + tol), axis=1)
        pr.theta_containment = float(cont[after].mean()) if np.any(after) else float("nan")
        sc_ok = np.all((env_lo[idx] <= x[idx] + tol) & (x[idx] <= env_hi[idx] + tol), axis=1)
        pr.state_containment = float(sc_ok[after].mean()) if np.any(after) else float("nan")
        if claim.sign_case is not None:
            u = u_all[idx]
            if claim.sign_case == "nonneg":
                pr.sign_condition_held = bool(np.all(x[idx] >= -tol) and np.all(u >= -tol))
            else:
                pr.sign_condition_held = bool(np.all(x[idx] <= tol) and np.all(u <= tol))
        certified = pr.ordering is not None and pr.ordering == claim.ordering
        pr.valid = bool(certified and pr.pe_ok_m and pr.pe_ok_M)
        phases.append(pr)
    res.traces = traces
    return V.ConditionReport(phases, kind)


def _since(t, flags) -> Optional[float]:
    """Earliest time after which ``flags`` stays true to the end."""
    if not flags[-1]:
        return None
    bad = np.nonzero(~flags)[0]
    return float(t[0] if len(bad) == 0 else t[min(bad[-1] + 1, len(t) - 1)])
