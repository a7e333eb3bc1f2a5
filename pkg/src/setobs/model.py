"""System description, ground-truth plant and observer gains."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .numerics import is_spd


def _mat(a, shape=None, name="matrix", allow_inf=False):
    a = np.array(a, dtype=float)
    if a.ndim == 1 and shape is not None and len(shape) == 2:
        a = a.reshape(shape)
    if shape is not None and a.shape != tuple(shape):
        raise ValueError(f"{name} has shape {a.shape}, expected {tuple(shape)}")
    if np.any(np.isnan(a)) or (not allow_inf and not np.all(np.isfinite(a))):
        raise ValueError(f"{name} has non-finite entries")
    return a


def constant_map(value):
    value = np.array(value, dtype=float)

    def f(t, y):
        return value.copy()

    f.constant = value
    return f


@dataclass(frozen=True)
class ThetaSchedule:
    """Piecewise-constant parameter with its own admissible box on each piece.

    Piece ``k`` is active on ``(switch_times[k-1], switch_times[k]]``; the first
    piece also covers ``t = 0``.
    """

    values: tuple
    lower: tuple
    upper: tuple
    switch_times: tuple = ()

    def __post_init__(self):
        k = len(self.values)
        if len(self.lower) != k or len(self.upper) != k or len(self.switch_times) != k - 1:
            raise ValueError("inconsistent schedule lengths")
        if any(b <= a for a, b in zip(self.switch_times, self.switch_times[1:])):
            raise ValueError("switch times must be increasing")
        for v, lo, hi in zip(self.values, self.lower, self.upper):
            if np.any(np.asarray(lo) > np.asarray(hi)):
                raise ValueError("theta box has lower > upper")

    @classmethod
    def constant(cls, value, lower, upper):
        return cls((np.asarray(value, float),), (np.asarray(lower, float),),
                   (np.asarray(upper, float),), ())

    @classmethod
    def build(cls, values, lower, upper, switch_times=()):
        arr = lambda seq: tuple(np.asarray(v, float) for v in seq)
        return cls(arr(values), arr(lower), arr(upper), tuple(float(s) for s in switch_times))

    @property
    def q(self) -> int:
        return len(self.values[0])

    def index(self, t: float) -> int:
        return int(np.searchsorted(np.asarray(self.switch_times), t, side="left"))

    def __call__(self, t: float) -> np.ndarray:
        return self.values[self.index(t)]

    def box(self, t: float):
        k = self.index(t)
        return self.lower[k], self.upper[k]

    def pieces(self, horizon: float):
        """(start, end, index) for every piece intersecting ``[0, horizon]``."""
        edges = [0.0] + [s for s in self.switch_times if s < horizon] + [horizon]
        return [(a, b, k) for k, (a, b) in enumerate(zip(edges[:-1], edges[1:]))]


@dataclass
class LpvSystemSpec:
    """Bounded LPV description used by the observers.

    ``phi``, ``G``, ``A_lower`` and ``A_upper`` are called as ``f(t, y)``;
    constant bounds use :func:`constant_map`. The time argument covers
    measured time-varying data such as the examples' ``G(t)``.
    """

    n: int
    m: int
    p: int
    q: int
    C: np.ndarray
    A_lower: Callable
    A_upper: Callable
    G: Callable
    B_lower: np.ndarray = None
    B_upper: np.ndarray = None
    phi: Callable = None
    theta_lower: np.ndarray = None
    theta_upper: np.ndarray = None
    x_lower: np.ndarray = None
    x_upper: np.ndarray = None
    v_max: np.ndarray = None
    kernel_kind: int = 0
    kernel_par: Optional[np.ndarray] = None

    def __post_init__(self):
        n, m, p, q = self.n, self.m, self.p, self.q
        self.C = _mat(self.C, (p, n), "C")
        self.B_lower = np.zeros((n, m)) if self.B_lower is None else _mat(self.B_lower, (n, m), "B_lower")
        self.B_upper = np.zeros((n, m)) if self.B_upper is None else _mat(self.B_upper, (n, m), "B_upper")
        if np.any(self.B_lower > self.B_upper):
            raise ValueError("B_lower must not exceed B_upper")
        if self.phi is None:
            self.phi = constant_map(np.zeros(n))
        for name, size in (("theta_lower", q), ("theta_upper", q), ("x_lower", n),
                           ("x_upper", n), ("v_max", p)):
            val = getattr(self, name)
            if val is None:
                fill = -np.inf if name.endswith("lower") else np.inf
                val = np.zeros(p) if name == "v_max" else np.full(size, fill)
            setattr(self, name, _mat(val, (size,), name, allow_inf=name != "v_max"))
        if np.any(self.theta_lower > self.theta_upper) or np.any(self.x_lower > self.x_upper):
            raise ValueError("box has lower > upper")

    @property
    def is_constant(self) -> bool:
        return all(hasattr(f, "constant") for f in (self.A_lower, self.A_upper, self.G, self.phi))

    @property
    def competitive_output(self) -> bool:
        return bool(np.all(self.C >= 0))


@dataclass
class TruthModel:
    """Ground-truth plant: realized ``A(t, x)``, ``B(t)``, schedule and input."""

    A_true: Callable
    B_true: Callable
    theta_schedule: ThetaSchedule
    x0: np.ndarray
    u: Callable
    rhs: Optional[Callable] = None

    def __post_init__(self):
        self.x0 = np.array(self.x0, dtype=float)


@dataclass
class ObserverGains:
    L_lower: np.ndarray
    L_upper: np.ndarray
    Gamma_lower: np.ndarray
    Gamma_upper: np.ndarray

    def __post_init__(self):
        self.L_lower = np.array(self.L_lower, dtype=float)
        self.L_upper = np.array(self.L_upper, dtype=float)
        self.Gamma_lower = np.atleast_2d(np.array(self.Gamma_lower, dtype=float))
        self.Gamma_upper = np.atleast_2d(np.array(self.Gamma_upper, dtype=float))
        for name in ("Gamma_lower", "Gamma_upper"):
            if not is_spd(getattr(self, name)):
                raise ValueError(f"{name} must be symmetric positive definite")

    def scaled(self, factor: float) -> "ObserverGains":
        return replace(self, Gamma_lower=self.Gamma_lower * factor,
                       Gamma_upper=self.Gamma_upper * factor)


def sample_output(spec: LpvSystemSpec, x, noise=None):
    y = spec.C @ np.asarray(x, dtype=float)
    yv = y if noise is None else y + np.asarray(noise, dtype=float)
    return y, yv


def plant_rhs(spec: LpvSystemSpec, truth: TruthModel, t: float, x, u=None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = spec.C @ x
    if u is None:
        u = truth.u(t, y)
    theta = truth.theta_schedule(t)
    if truth.rhs is not None:
        return truth.rhs(t, x, u, theta)
    return (truth.A_true(t, x) @ x + truth.B_true(t) @ np.asarray(u, float)
            + spec.phi(t, y) + spec.G(t, y) @ theta)
