"""On-line applicability checks for the adaptive set observer.

Two views of the same quantities are provided. :class:`Accumulators` is the
incremental form a streaming loop would use; the ``*_trace`` functions compute
the identical integrals over a whole recorded trace with cumulative
trapezoids, which is what the simulator uses after each run.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from .numerics import integrate_fixed_step

MARGIN = 1e-9
THETA_MIN = 1e-6
BRANCHES = ("ii.a", "ii.b", "none")


class IdentifiabilityError(ValueError):
    """The averaged Gramian is still singular, so R^-1 b is undefined."""


class WindowError(ValueError):
    """Not enough history for the requested window."""


class NoOrderingError(ValueError):
    pass


# ---------------------------------------------------------------------------
# incremental accumulators


@dataclass
class Accumulators:
    q: int
    capacity: float = np.inf
    t: float = 0.0
    I_b: dict = field(default_factory=dict)
    I_R: dict = field(default_factory=dict)
    window: deque = field(default_factory=deque)
    _last: Optional[dict] = None

    def __post_init__(self):
        for o in ("m", "M"):
            self.I_b.setdefault(o, np.zeros(self.q))
            self.I_R.setdefault(o, np.zeros((self.q, self.q)))

    @staticmethod
    def _integrands(CO, r):
        CO = np.atleast_2d(np.asarray(CO, dtype=float))
        r = np.atleast_1d(np.asarray(r, dtype=float))
        return CO.T @ r, CO.T @ CO

    def add_sample(self, t: float, C_Omega: dict, residual: dict):
        """Append a grid sample; ``C_Omega[o]`` is ``C Omega_o`` and ``residual[o]`` is ``y_v - C zeta_o``."""
        cur = {o: self._integrands(C_Omega[o], residual[o]) for o in ("m", "M")}
        if self._last is not None:
            dt = t - self.t
            for o in ("m", "M"):
                self.I_b[o] = self.I_b[o] + 0.5 * dt * (cur[o][0] + self._last[o][0])
                self.I_R[o] = self.I_R[o] + 0.5 * dt * (cur[o][1] + self._last[o][1])
        self.t = t
        self._last = cur
        self.window.append((t, {o: np.array(C_Omega[o], float) for o in ("m", "M")},
                            {o: np.array(residual[o], float) for o in ("m", "M")}))
        while self.window and t - self.window[0][0] > self.capacity + 1e-12:
            self.window.popleft()
        return self

    def estimates(self, t0: float = 0.0):
        """``(b_hat, R_hat)`` per observer, averaged since ``t0``."""
        span = self.t - t0
        if span <= 0:
            raise WindowError("no elapsed time to average over")
        return ({o: -self.I_b[o] / span for o in ("m", "M")},
                {o: self.I_R[o] / span for o in ("m", "M")})


def update_accumulators(acc: Accumulators, h: float, C_Omega: dict, residual: dict) -> Accumulators:
    """Advance by one uniform step ``h`` and fold in the new sample."""
    t = acc.t + h if acc._last is not None else acc.t
    return acc.add_sample(t, C_Omega, residual)


def pe_check(acc: Accumulators, ell: float, theta_min: float = THETA_MIN, o: str = "m"):
    """Gramian of ``Omega^T C^T`` over the trailing window of length ``ell``."""
    if not acc.window or acc.window[-1][0] - acc.window[0][0] < ell - 1e-9:
        raise WindowError("window shorter than the PE length")
    t_end = acc.window[-1][0]
    samples = [(t, CO[o]) for t, CO, _ in acc.window if t >= t_end - ell - 1e-12]
    ts = np.array([s[0] for s in samples])
    mats = np.array([np.atleast_2d(s[1]).T @ np.atleast_2d(s[1]) for s in samples])
    gram = trapezoid(mats, ts, axis=0)
    value = float(np.linalg.eigvalsh(0.5 * (gram + gram.T)).min())
    return value >= theta_min, value


def theta_bar_infty(b_hat, R_hat, cond_max: float = 1e12) -> np.ndarray:
    R_hat = np.atleast_2d(np.asarray(R_hat, dtype=float))
    b_hat = np.atleast_1d(np.asarray(b_hat, dtype=float))
    if not np.all(np.isfinite(R_hat)) or np.linalg.cond(R_hat) > cond_max:
        raise IdentifiabilityError("averaged Gramian is singular")
    return np.linalg.solve(R_hat, b_hat)


def check_theorem1(theta_bar_m, theta_bar_M, theta_lower, theta_upper, margin: float = MARGIN) -> str:
    """Branch of the competitive-case test, or ``"none"``."""
    tbm = np.asarray(theta_bar_m, dtype=float)
    tbM = np.asarray(theta_bar_M, dtype=float)
    lo = np.asarray(theta_lower, dtype=float)
    hi = np.asarray(theta_upper, dtype=float)
    if np.all(hi + margin < tbm) and np.all(tbM + margin < lo):
        return "ii.a"
    if np.all(hi + margin < tbM) and np.all(tbm + margin < lo):
        return "ii.b"
    return "none"


def ordering_of_branch(branch: str) -> str:
    """Which endpoint is the lower one once a branch is certified."""
    if branch == "ii.a":
        return "M<=m"
    if branch == "ii.b":
        return "m<=M"
    raise NoOrderingError(f"branch {branch!r} certifies no ordering")


def gain_matrix_cooperative(Gamma, C_Omega) -> bool:
    """Is ``-Gamma Omega^T C^T C Omega`` cooperative (nonnegative off-diagonal)?"""
    M = -np.asarray(Gamma) @ np.asarray(C_Omega).T @ np.asarray(C_Omega)
    off = M[~np.eye(M.shape[0], dtype=bool)]
    return bool(np.all(off >= 0))


def theorem2_instant(Gamma_m, Gamma_M, CO_m, CO_M, r_m, r_M, theta_lower, theta_upper,
                     margin: float = MARGIN) -> bool:
    """Sign conditions of the instantaneous cooperative-case test at one sample.

    Observer ``m`` is the lower endpoint and ``M`` the upper one. The
    residuals ``r_o = y_v - C zeta_o`` stand in for ``C eps_o``.
    """
    lo = np.asarray(theta_lower, float)
    hi = np.asarray(theta_upper, float)
    if not (gain_matrix_cooperative(Gamma_m, CO_m) and gain_matrix_cooperative(Gamma_M, CO_M)):
        return False
    Wm = np.asarray(Gamma_m) @ np.asarray(CO_m).T
    WM = np.asarray(Gamma_M) @ np.asarray(CO_M).T
    ok = np.all(Wm @ (r_m + CO_m @ lo) > margin)
    ok &= np.all(Wm @ CO_m @ (hi - lo) > margin)
    ok &= np.all(WM @ (r_M + CO_M @ hi) < -margin)
    ok &= np.all(WM @ CO_M @ (lo - hi) < -margin)
    return bool(ok)


def theorem2_periodic(b_m, R_m, b_M, R_M, theta_lower, theta_upper, margin: float = MARGIN) -> bool:
    lo = np.asarray(theta_lower, float)
    hi = np.asarray(theta_upper, float)
    ok = np.all(b_m < R_m @ lo - margin)
    ok &= np.all(R_m @ (hi - lo) > margin)
    ok &= np.all(b_M > R_M @ hi + margin)
    ok &= np.all(R_M @ (lo - hi) < -margin)
    return bool(ok)


def check_theorem2(acc: Accumulators, Gamma_m, Gamma_M, theta_lower, theta_upper, T: float):
    """``(instant_ok, periodic_ok)`` from the samples held in ``acc``.

    The instantaneous flag requires the sign conditions at every buffered
    sample; the periodic flag uses the trailing window of length ``T``.
    """
    if not acc.window or acc.window[-1][0] - acc.window[0][0] < T - 1e-9:
        raise WindowError("window shorter than the period")
    instant = all(theorem2_instant(Gamma_m, Gamma_M, np.atleast_2d(CO["m"]), np.atleast_2d(CO["M"]),
                                   r["m"], r["M"], theta_lower, theta_upper)
                  for _, CO, r in acc.window)
    t_end = acc.window[-1][0]
    rows = [(t, CO, r) for t, CO, r in acc.window if t >= t_end - T - 1e-12]
    ts = np.array([row[0] for row in rows])
    est = {}
    for o in ("m", "M"):
        bi = np.array([np.atleast_2d(CO[o]).T @ r[o] for _, CO, r in rows])
        Ri = np.array([np.atleast_2d(CO[o]).T @ np.atleast_2d(CO[o]) for _, CO, _ in rows])
        span = ts[-1] - ts[0]
        est[o] = (-trapezoid(bi, ts, axis=0) / span, trapezoid(Ri, ts, axis=0) / span)
    periodic = theorem2_periodic(est["m"][0], est["m"][1], est["M"][0], est["M"][1],
                                 theta_lower, theta_upper)
    return bool(instant), bool(periodic)


def theorem3_pairing(sign_case: str, ordering: Optional[str]):
    """Endpoints ``(O_m, O_M)`` driving the two state observers."""
    if ordering is None:
        raise NoOrderingError("no certified parameter ordering")
    lower, upper = ("m", "M") if ordering == "m<=M" else ("M", "m")
    if sign_case == "nonneg":
        return lower, upper
    if sign_case == "nonpos":
        return upper, lower
    raise ValueError(f"unknown sign case {sign_case!r}")


def averaged_oracle(b, R, Gamma, theta0, horizon: float, h: float = 1e-2):
    """Trajectory of ``theta' = Gamma (b - R theta)``."""
    b = np.atleast_1d(np.asarray(b, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    Gamma = np.atleast_2d(np.asarray(Gamma, dtype=float))
    return integrate_fixed_step(lambda t, th: Gamma @ (b - R @ th),
                                np.atleast_1d(np.asarray(theta0, float)), 0.0, horizon, h)


def lemma1_bound(gamma: float, vartheta: float, ell: float, p0_norm: float, b_sup: float,
                 t: float) -> float:
    if gamma <= 0 or vartheta <= 0 or ell <= 0:
        raise ValueError("gamma, vartheta and ell must be positive")
    decay = p0_norm * np.exp(-0.5 * gamma * vartheta / ell * (t - ell))
    return float(decay + (1 + 2 / (vartheta * gamma) * np.exp(-0.5 * vartheta * gamma)) * ell * b_sup)


class NoMatchError(RuntimeError):
    """No tested gain made the observer follow its averaged system."""


def averaging_agreement(sc, transient: float = 10.0, oracle_step: float = 1e-2, seed: int = 0):
    """Compare each adaptive observer with its averaged system on the first phase.

    ``b`` and ``R`` are the end-of-phase running estimates. Returns, per
    observer, the worst deviation per component after ``transient``, the scale
    ``|R^-1 b - theta_hat(0)|`` and their ratio.
    """
    from .simulation import simulate  # local: simulation imports this module

    sched = sc.truth.theta_schedule
    t_end = min(sc.horizon, sched.switch_times[0]) if len(sched.switch_times) else sc.horizon
    res = simulate(sc.with_options(horizon=t_end), seed=seed, ideal=False)
    every = max(1, int(round(oracle_step / sc.step)))
    out = {}
    for o, Gamma in (("m", sc.gains.Gamma_lower), ("M", sc.gains.Gamma_upper)):
        pr = res.report.phases[0]
        b, R = pr.b_hat[o], pr.R_hat[o]
        target = theta_bar_infty(b, R)
        th = res.block("theta_" + o)
        traj = averaged_oracle(b, R, Gamma, th[0], t_end, every * sc.step)
        obs = th[::every][:len(traj.times)]
        keep = traj.times >= transient
        dev = np.abs(obs[keep] - traj.states[keep]).max(axis=0)
        scale = np.abs(target - th[0])
        out[o] = {"deviation": dev, "scale": scale, "ratio": dev / scale,
                  "theta_bar": target, "times": traj.times, "observer": obs,
                  "oracle": traj.states}
    return out


def gamma_search(sc, shrink: float = 0.5, match_tol: float = 0.1, max_halvings: int = 10,
                 transient: float = 10.0):
    """Largest ``shrink**k`` scaling of the scenario gains that follows the averaged system.

    Returns ``(k, Gamma_lower, Gamma_upper)``. A singular ``R`` surfaces as
    :class:`IdentifiabilityError`.
    """
    if not 0 < shrink < 1:
        raise ValueError("shrink must lie in (0, 1)")
    for k in range(max_halvings + 1):
        gains = sc.gains.scaled(shrink ** k)
        agree = averaging_agreement(sc.with_options(gains=gains), transient)
        if all(np.all(v["ratio"] <= match_tol) for v in agree.values()):
            return k, gains.Gamma_lower, gains.Gamma_upper
    raise NoMatchError(f"no match within {max_halvings} reductions")


# ---------------------------------------------------------------------------
# whole-trace versions


def trace_integrands(C_Omega, residual):
    """Per-sample ``Omega^T C^T r`` and ``Omega^T C^T C Omega``."""
    COt = np.swapaxes(C_Omega, 1, 2)
    fb = (COt @ residual[..., None])[..., 0]
    fR = COt @ C_Omega
    return fb, fR


def running_estimates(t, C_Omega, residual):
    """``b_hat(t), R_hat(t)`` averaged from the first sample, at every sample."""
    fb, fR = trace_integrands(C_Omega, residual)
    Ib = cumulative_trapezoid(fb, t, axis=0, initial=0)
    IR = cumulative_trapezoid(fR, t, axis=0, initial=0)
    span = (t - t[0])
    with np.errstate(invalid="ignore", divide="ignore"):
        b = -Ib / span[:, None]
        R = IR / span[:, None, None]
    b[0] = np.nan
    R[0] = np.nan
    return b, R, Ib, IR


def window_estimates(t, Ib, IR, T: float):
    """Trailing-window averages of length ``T``; NaN before the window fills."""
    h = t[1] - t[0] if len(t) > 1 else 1.0
    w = int(round(T / h))
    b = np.full(Ib.shape, np.nan)
    R = np.full(IR.shape, np.nan)
    if 0 < w < len(t):
        span = t[w:] - t[:-w]
        b[w:] = -(Ib[w:] - Ib[:-w]) / span[:, None]
        R[w:] = (IR[w:] - IR[:-w]) / span[:, None, None]
    return b, R


def _sym_eig_range(S):
    """Smallest and largest eigenvalue of each symmetric matrix in a stack."""
    if S.shape[-1] == 2:
        a, b, d = S[:, 0, 0], 0.5 * (S[:, 0, 1] + S[:, 1, 0]), S[:, 1, 1]
        mid = 0.5 * (a + d)
        rad = np.hypot(0.5 * (a - d), b)
        return mid - rad, mid + rad
    ev = np.linalg.eigvalsh(0.5 * (S + np.swapaxes(S, 1, 2)))
    return ev[:, 0], ev[:, -1]


def gramian_min_eig(t, IR, ell: float):
    """Smallest eigenvalue of the trailing ``ell`` Gramian at every sample."""
    h = t[1] - t[0] if len(t) > 1 else 1.0
    w = int(round(ell / h))
    out = np.full(len(t), np.nan)
    if 0 < w < len(t):
        out[w:] = _sym_eig_range(IR[w:] - IR[:-w])[0]
    return out


def solve_batch(R, b, cond_max: float = 1e12):
    out = np.full(b.shape, np.nan)
    ok = np.all(np.isfinite(R), axis=(1, 2)) & np.all(np.isfinite(b), axis=1)
    if np.any(ok):
        # R is symmetric positive semidefinite, so its condition number is
        # the eigenvalue ratio
        c = np.full(len(R), np.inf)
        lo, hi = _sym_eig_range(R[ok])
        with np.errstate(divide="ignore", invalid="ignore"):
            c[ok] = np.where(lo > 0, hi / lo, np.inf)
        ok &= c < cond_max
        out[ok] = np.linalg.solve(R[ok], b[ok][..., None])[..., 0]
    return out


def theorem1_trace(tb_m, tb_M, lo, hi, margin: float = MARGIN):
    """Branch code per sample: 0 = ii.a, 1 = ii.b, 2 = none."""
    a = np.all(hi + margin < tb_m, axis=1) & np.all(tb_M + margin < lo, axis=1)
    b = np.all(hi + margin < tb_M, axis=1) & np.all(tb_m + margin < lo, axis=1)
    code = np.full(len(tb_m), 2)
    code[b] = 1
    code[a] = 0
    return code


def theorem2_periodic_trace(b_m, R_m, b_M, R_M, lo, hi, margin: float = MARGIN):
    ok = np.all(b_m < R_m @ lo - margin, axis=1)
    ok &= np.all(R_m @ (hi - lo) > margin, axis=1)
    ok &= np.all(b_M > R_M @ hi + margin, axis=1)
    ok &= np.all(R_M @ (lo - hi) < -margin, axis=1)
    return ok & np.all(np.isfinite(b_m), axis=1) & np.all(np.isfinite(b_M), axis=1)


def theorem2_instant_trace(Gamma_m, Gamma_M, CO_m, CO_M, r_m, r_M, lo, hi, margin: float = MARGIN):
    def coop(Gamma, CO):
        M = -(Gamma @ (np.swapaxes(CO, 1, 2) @ CO))
        q = M.shape[1]
        off = ~np.eye(q, dtype=bool)
        return np.all(M[:, off] >= 0, axis=1)

    Wm = Gamma_m @ np.swapaxes(CO_m, 1, 2)
    WM = Gamma_M @ np.swapaxes(CO_M, 1, 2)
    apply = lambda W, v: (W @ v[..., None])[..., 0]
    vm = apply(Wm, r_m + CO_m @ lo)
    vM = apply(WM, r_M + CO_M @ hi)
    gm = apply(Wm, CO_m @ (hi - lo))
    gM = apply(WM, CO_M @ (lo - hi))
    ok = coop(Gamma_m, CO_m) & coop(Gamma_M, CO_M)
    ok &= np.all(vm > margin, axis=1) & np.all(gm > margin, axis=1)
    ok &= np.all(vM < -margin, axis=1) & np.all(gM < -margin, axis=1)
    return ok


@dataclass
class PhaseReport:
    index: int
    t_start: float
    t_end: float
    theta_lower: np.ndarray
    theta_upper: np.ndarray
    claim: object
    theorem1_branch: str = "none"
    branch_since: Optional[float] = None
    theorem2_instant_ok: bool = False
    theorem2_periodic_ok: bool = False
    periodic_since: Optional[float] = None
    pe_ok_m: bool = False
    pe_ok_M: bool = False
    pe_value_m: float = float("nan")
    pe_value_M: float = float("nan")
    b_hat: dict = field(default_factory=dict)
    R_hat: dict = field(default_factory=dict)
    theta_bar_inf: dict = field(default_factory=dict)
    ordering: Optional[str] = None
    pairing: Optional[tuple] = None
    sign_condition_held: Optional[bool] = None
    theta_containment: float = float("nan")
    state_containment: float = float("nan")
    valid: bool = False


@dataclass
class ConditionReport:
    """Final verdicts, one :class:`PhaseReport` per constant-parameter piece."""

    phases: list
    adaptation_loop_kind: str

    @property
    def last(self) -> PhaseReport:
        return self.phases[-1]

    @property
    def valid(self) -> bool:
        return bool(self.phases) and all(p.valid for p in self.phases)

    @property
    def theorem1_branch(self) -> str:
        return self.last.theorem1_branch if self.phases else "none"

    def to_dict(self) -> dict:
        def conv(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, dict):
                return {k: conv(x) for k, x in v.items()}
            if isinstance(v, (np.floating, np.integer, np.bool_)):
                return v.item()
            if hasattr(v, "__dataclass_fields__"):
                return {k: conv(getattr(v, k)) for k in v.__dataclass_fields__}
            if isinstance(v, tuple):
                return list(v)
            return v
        return {"adaptation_loop_kind": self.adaptation_loop_kind, "valid": self.valid,
                "phases": [conv(p) for p in self.phases]}


def loop_kind(C) -> str:
    """Competitive when every entry of ``C`` is nonnegative."""
    return "competitive" if np.all(np.asarray(C) >= 0) else "cooperative"
