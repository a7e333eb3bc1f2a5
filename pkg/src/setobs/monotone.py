"""Cooperativity, Hurwitz and order checks for the observer error dynamics."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, asdict
from typing import Callable

import numpy as np

from .model import LpvSystemSpec, ObserverGains
from .numerics import eig_real_parts, integrate_fixed_step

HURWITZ_TOL = 1e-9
SIGN_TOL = 1e-9


def is_cooperative(M, tol: float = 0.0) -> bool:
    """True when every off-diagonal entry is >= -tol (Metzler matrix)."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    off = M[~np.eye(M.shape[0], dtype=bool)]
    return bool(np.all(off >= -tol))


def is_hurwitz(M, tol: float = HURWITZ_TOL) -> bool:
    return bool(eig_real_parts(M).max() < -tol)


def elementwise_leq(A, B, tol: float = 1e-12) -> bool:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch {A.shape} vs {B.shape}")
    return bool(np.all(A <= B + tol))


@dataclass
class Assumption2Report:
    cooperative_lower: bool
    cooperative_upper: bool
    hurwitz_lower: bool
    hurwitz_upper: bool
    G_nonnegative: bool
    worst_offdiag_entry: float
    max_eig_realpart: float
    samples_used: int
    failure: str = ""

    @property
    def passed(self) -> bool:
        return (self.cooperative_lower and self.cooperative_upper and self.hurwitz_lower
                and self.hurwitz_upper and self.G_nonnegative)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d

    def lines(self):
        yield f"assumption2 {'PASS' if self.passed else 'FAIL'}"
        for key, val in self.to_dict().items():
            if key != "passed":
                yield f"  {key} = {val}"


def default_y_samples(spec: LpvSystemSpec, points: int = 11, mc: int = 2000, seed: int = 0):
    """Grid (or random) samples of the output box ``C [x_lower, x_upper]``."""
    lo, hi = output_box(spec)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        return [np.zeros(spec.p)]
    if spec.p <= 3:
        axes = [np.linspace(a, b, points) for a, b in zip(lo, hi)]
        return [np.array(c) for c in itertools.product(*axes)]
    rng = np.random.default_rng(seed)
    return list(rng.uniform(lo, hi, size=(mc, spec.p)))


def default_v_samples(spec: LpvSystemSpec):
    if not np.any(spec.v_max):
        return [np.zeros(spec.p)]
    if spec.p <= 3:
        levels = [(-v, 0.0, v) for v in spec.v_max]
        return [np.array(c) for c in itertools.product(*levels)]
    return [-spec.v_max, np.zeros(spec.p), spec.v_max]


def output_box(spec: LpvSystemSpec):
    """Interval image of the state box through ``C``."""
    Cp = np.clip(spec.C, 0, None)
    Cn = np.clip(spec.C, None, 0)
    with np.errstate(invalid="ignore"):
        lo = np.nan_to_num(Cp @ spec.x_lower + Cn @ spec.x_upper, nan=-np.inf)
        hi = np.nan_to_num(Cp @ spec.x_upper + Cn @ spec.x_lower, nan=np.inf)
    return lo, hi


def verify_assumption2(spec: LpvSystemSpec, gains: ObserverGains, y_samples=None,
                       v_samples=None, t: float = 0.0) -> Assumption2Report:
    """Check cooperativity and stability of ``A_o(y) - L_o C`` and ``G >= 0``.

    ``G`` is checked at ``y + v``; for the time-varying examples it is also
    swept over one period grid of ``t``.
    """
    if y_samples is None:
        y_samples = default_y_samples(spec)
    if v_samples is None:
        v_samples = default_v_samples(spec)
    if len(y_samples) == 0:
        raise ValueError("need at least one output sample")
    coop = [True, True]
    hurw = [True, True]
    g_ok = True
    worst_off = np.inf
    max_eig = -np.inf
    failure = ""
    count = 0
    g_const = hasattr(spec.G, "constant")
    times = [t] if g_const else np.linspace(t, t + 2 * np.pi, 64)
    a_samples = y_samples[:1] if spec.is_constant else y_samples
    for y in a_samples:
        y = np.asarray(y, dtype=float)
        for k, (Af, L) in enumerate(((spec.A_lower, gains.L_lower), (spec.A_upper, gains.L_upper))):
            M = Af(t, y) - L @ spec.C
            count += 1
            off = M[~np.eye(M.shape[0], dtype=bool)]
            if off.size:
                worst_off = min(worst_off, off.min())
            side = "lower" if k == 0 else "upper"
            if not is_cooperative(M):
                if coop[k]:
                    i, j = _first_negative_offdiag(M)
                    failure = failure or f"A_{side} - L C entry ({i},{j}) = {M[i, j]:.6g} < 0 at y = {y.tolist()}"
                coop[k] = False
            re = eig_real_parts(M).max()
            max_eig = max(max_eig, re)
            if not re < -HURWITZ_TOL:
                if hurw[k]:
                    failure = failure or f"A_{side} - L C not Hurwitz (max Re = {re:.6g}) at y = {y.tolist()}"
                hurw[k] = False
    for y in (y_samples[:1] if g_const else y_samples):
        y = np.asarray(y, dtype=float)
        for v in v_samples:
            for tt in times:
                if np.any(spec.G(tt, y + np.asarray(v)) < 0):
                    if g_ok:
                        failure = failure or f"G has a negative entry at y + v = {(y + v).tolist()}"
                    g_ok = False
    return Assumption2Report(coop[0], coop[1], hurw[0], hurw[1], g_ok,
                             float(worst_off if np.isfinite(worst_off) else 0.0),
                             float(max_eig), count, failure)


def _first_negative_offdiag(M):
    n = M.shape[0]
    for i in range(n):
        for j in range(n):
            if i != j and M[i, j] < 0:
                return i, j
    return -1, -1


def cooperative_flow_sign_oracle(M, r: Callable, s0, horizon: float, h: float = 1e-3,
                                 tol_sign: float = SIGN_TOL) -> bool:
    """Simulate ``s' = M s + r(t)`` and report whether ``s`` stayed >= 0."""
    M = np.asarray(M, dtype=float)
    traj = integrate_fixed_step(lambda t, s: M @ s + r(t), np.asarray(s0, float), 0.0, horizon, h)
    return bool(traj.states.min() >= -tol_sign)


def random_cooperative_hurwitz(n: int, rng: np.random.Generator, scale: float = 1.0):
    """Random Metzler matrix shifted along the diagonal until Hurwitz."""
    M = rng.uniform(0, scale, (n, n))
    np.fill_diagonal(M, rng.uniform(-scale, scale, n))
    shift = max(eig_real_parts(M).max(), 0.0) + rng.uniform(0.1, 1.0)
    return M - shift * np.eye(n)
