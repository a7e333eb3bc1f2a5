"""Fixed-step integration, reproducible bounded noise and small dense helpers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

DIVERGENCE_NORM = 1e9


class DivergenceError(RuntimeError):
    """Raised when an integrated state stops being finite or blows up."""

    def __init__(self, time: float, message: str | None = None):
        self.time = float(time)
        super().__init__(message or f"state diverged at t = {self.time:.6g}")


class NumericError(RuntimeError):
    pass


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray

    def __len__(self):
        return len(self.times)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _check_state(x, t):
    if not np.all(np.isfinite(x)) or np.linalg.norm(x) > DIVERGENCE_NORM:
        raise DivergenceError(t)


def rk4_step(rhs: Callable, t: float, x: np.ndarray, h: float) -> np.ndarray:
    k1 = rhs(t, x)
    k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2)
    k4 = rhs(t + h, x + h * k3)
    return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_fixed_step(rhs: Callable, state0, t0: float, t1: float, h: float) -> Trajectory:
    """Classical RK4 on a uniform grid from ``t0`` to ``t1``.

    The last step is shortened so the trace lands exactly on ``t1``.
    """
    if not h > 0:
        raise ValueError("step h must be positive")
    if not t1 > t0:
        raise ValueError("t1 must be larger than t0")
    x = np.array(state0, dtype=float)
    _check_state(x, t0)
    nfull = int(np.floor((t1 - t0) / h + 1e-9))
    times = [t0 + k * h for k in range(nfull + 1)]
    if t1 - times[-1] > 1e-12 * max(1.0, abs(t1)):
        times.append(t1)
    else:
        times[-1] = t1
    states = np.empty((len(times),) + x.shape)
    states[0] = x
    for k in range(1, len(times)):
        t = times[k - 1]
        x = rk4_step(rhs, t, x, times[k] - t)
        _check_state(x, times[k])
        states[k] = x
    return Trajectory(np.asarray(times), states)


def _noise_width(p: int) -> int:
    return -(-p // 4)


def noise_block(seed: int, amplitude, start: int, count: int) -> np.ndarray:
    """Rows ``start .. start+count-1`` of the uniform noise sequence.

    Each row is drawn from its own block of a counter-based generator, so any
    row can be regenerated from ``(seed, index)`` alone.
    """
    amp = np.atleast_1d(np.asarray(amplitude, dtype=float))
    if np.any(amp < 0):
        raise ValueError("noise amplitude must be nonnegative")
    p = amp.size
    if count <= 0:
        return np.zeros((0, p))
    if not np.any(amp):
        return np.zeros((count, p))
    w = _noise_width(p)
    bitgen = np.random.Philox(key=int(seed)).advance(int(start) * w)
    raw = np.random.Generator(bitgen).random((count, 4 * w))[:, :p]
    return amp * (2.0 * raw - 1.0)


def bounded_noise(seed: int, amplitude, t_index: int) -> np.ndarray:
    """Noise sample held over integration step ``t_index``."""
    return noise_block(seed, amplitude, t_index, 1)[0]


def eig_real_parts(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    if not np.all(np.isfinite(M)):
        raise NumericError("matrix has non-finite entries")
    try:
        return np.linalg.eigvals(M).real
    except np.linalg.LinAlgError as exc:
        raise NumericError(str(exc)) from exc


def is_spd(M, tol: float = 0.0) -> bool:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        return False
    if not np.allclose(M, M.T, atol=1e-12):
        return False
    return bool(np.linalg.eigvalsh(M).min() > tol)


def solve(M, b) -> np.ndarray:
    try:
        return np.linalg.solve(np.asarray(M, float), np.asarray(b, float))
    except np.linalg.LinAlgError as exc:
        raise NumericError(str(exc)) from exc
