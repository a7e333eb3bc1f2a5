"""Interval-based fault indicators S, D, Z and detection-delay measurement."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


def _outside(y, lo, hi, tol: float = 0.0) -> np.ndarray:
    y, lo, hi = (np.asarray(a, dtype=float) for a in (y, lo, hi))
    return ((y < lo - tol) | (y > hi + tol)).astype(np.int8)


def indicator_S(y, y_hat_m, y_hat_M):
    """``s_i = 0`` iff ``y_i`` lies between the two observer outputs.

    Works on a single sample or on stacked samples (last axis = outputs).
    """
    s = _outside(y, np.minimum(y_hat_m, y_hat_M), np.maximum(y_hat_m, y_hat_M))
    return s, s.max(axis=-1) if s.size else np.zeros(s.shape[:-1], np.int8)


def indicator_D(theta_lower, theta_upper):
    """``d_j = 0`` iff zero lies in ``[theta_lower_j, theta_upper_j]``."""
    lo = np.asarray(theta_lower, dtype=float)
    d = _outside(np.zeros_like(lo), lo, theta_upper)
    return d, d.max(axis=-1) if d.size else np.zeros(d.shape[:-1], np.int8)


def indicator_Z(y, psi_m, psi_M):
    """Same test as S against the state-observer envelope ``C xi``."""
    return indicator_S(y, psi_m, psi_M)


def debounce(flags, samples: int) -> np.ndarray:
    """Keep a 1 only once it has held for ``samples`` consecutive samples."""
    flags = np.asarray(flags, dtype=np.int8)
    if samples <= 1:
        return flags.copy()
    run = np.zeros(len(flags), dtype=int)
    c = 0
    for k, f in enumerate(flags):
        c = c + 1 if f else 0
        run[k] = c
    return (run >= samples).astype(np.int8)


def first_latch(t, flags, t0: float) -> Optional[float]:
    """First time at or after ``t0`` where ``flags`` is 1, or ``None``."""
    t = np.asarray(t)
    hit = np.nonzero((t >= t0 - 1e-12) & (np.asarray(flags) != 0))[0]
    return float(t[hit[0]]) if len(hit) else None


@dataclass
class FaultIndicatorTrace:
    t: np.ndarray
    s: np.ndarray
    d: np.ndarray
    z: np.ndarray
    S: np.ndarray
    D: np.ndarray
    Z: np.ndarray
    d_applicable: bool = True
    fault_times: list = field(default_factory=list)
    detection_times: dict = field(default_factory=dict)

    def signal(self, name: str) -> np.ndarray:
        """``"S"``, ``"D"``, ``"Z"`` or a channel such as ``"s2"`` (1-based)."""
        if name in ("S", "D", "Z"):
            return getattr(self, name)
        return getattr(self, name[0])[:, int(name[1:]) - 1]

    def false_alarms(self, t_from: float = 0.0, t_to: Optional[float] = None) -> dict:
        """Samples with each indicator raised inside a fault-free window."""
        if t_to is None:
            t_to = self.fault_times[0] if self.fault_times else np.inf
        sel = (self.t >= t_from) & (self.t < t_to)
        return {k: int(np.count_nonzero(getattr(self, k)[sel])) for k in ("S", "D", "Z")}


def detection_delay(trace: FaultIndicatorTrace, fault_times: Sequence[float],
                    indicators: Sequence[str] = ("S", "D", "Z")) -> dict:
    """Per indicator, first raw latch after each fault minus the fault time."""
    if list(fault_times) != sorted(fault_times):
        raise ValueError("fault_times must be sorted")
    out = {}
    for name in indicators:
        sig = trace.signal(name)
        delays = []
        for tf in fault_times:
            hit = first_latch(trace.t, sig, tf)
            delays.append(None if hit is None else round(hit - tf, 9))
        out[name] = delays
    return out


def channel_delays(trace: FaultIndicatorTrace, fault_times: Sequence[float],
                   channels: Sequence[int], family: str = "s") -> list:
    """Delay of fault ``k`` measured on its own output channel ``channels[k]`` (0-based)."""
    res = []
    for tf, ch in zip(fault_times, channels):
        hit = first_latch(trace.t, getattr(trace, family)[:, ch], tf)
        res.append(None if hit is None else round(hit - tf, 9))
    return res


def build_trace(t, y, y_hat_m, y_hat_M, theta_lower, theta_upper, psi_m, psi_M,
                fault_times=(), d_applicable: bool = True) -> FaultIndicatorTrace:
    s, S = indicator_S(y, y_hat_m, y_hat_M)
    d, D = indicator_D(theta_lower, theta_upper)
    z, Z = indicator_Z(y, psi_m, psi_M)
    tr = FaultIndicatorTrace(np.asarray(t, float), s, d, z, S, D, Z, d_applicable,
                             list(fault_times))
    if len(tr.fault_times):
        tr.detection_times = detection_delay(tr, tr.fault_times)
    return tr


def fault_indicators(res) -> FaultIndicatorTrace:
    """Indicator trace of a finished simulation, using the measured outputs."""
    sc = res.scenario
    C = sc.spec.C
    lo, hi = res.lower_upper()
    d_ok = res.report is None or all(p.ordering is not None for p in res.report.phases)
    return build_trace(res.t, res.y_v, res.block("zeta_m") @ C.T, res.block("zeta_M") @ C.T,
                       lo, hi, res.block("xi_m") @ C.T, res.block("xi_M") @ C.T,
                       [tf for tf in sc.fault_times if tf <= sc.horizon], d_ok)
