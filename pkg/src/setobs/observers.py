"""Observer right-hand sides, state containers and error diagnostics.

These NumPy versions are the readable reference. Long simulations use the
compiled kernel in :mod:`setobs._kernel`, which follows the same equations
and is cross-checked against :func:`coupled_rhs` in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._kernel import layout
from .model import LpvSystemSpec, ObserverGains, TruthModel


@dataclass
class IdealObserverState:
    zeta: np.ndarray
    Omega: np.ndarray
    theta_hat: np.ndarray


@dataclass
class AdaptiveObserverState:
    zeta_m: np.ndarray
    Omega_m: np.ndarray
    theta_hat_m: np.ndarray
    zeta_M: np.ndarray
    Omega_M: np.ndarray
    theta_hat_M: np.ndarray
    xi_m: np.ndarray
    xi_M: np.ndarray

    @classmethod
    def initial(cls, spec: LpvSystemSpec, theta_hat_m0, theta_hat_M0, zeta_m0=None,
                zeta_M0=None, xi_m0=None, xi_M0=None):
        """Zero filters, endpoints as supplied, state estimates at the box edges."""
        n, q = spec.n, spec.q
        pick = lambda v, d: np.array(d if v is None else v, dtype=float)
        lo = np.where(np.isfinite(spec.x_lower), spec.x_lower, 0.0)
        hi = np.where(np.isfinite(spec.x_upper), spec.x_upper, 0.0)
        return cls(pick(zeta_m0, lo), np.zeros((n, q)), pick(theta_hat_m0, None),
                   pick(zeta_M0, hi), np.zeros((n, q)), pick(theta_hat_M0, None),
                   pick(xi_m0, lo), pick(xi_M0, hi))


@dataclass
class ErrorDiagnostics:
    eps_m: np.ndarray
    eps_M: np.ndarray
    delta_m: np.ndarray
    delta_M: np.ndarray
    e_m: np.ndarray
    e_M: np.ndarray
    p_m: np.ndarray
    p_M: np.ndarray
    d_v: np.ndarray


def _adaptive_terms(A, B, L, Gamma, spec, t, u, yv, zeta, Omega, theta_hat):
    C = spec.C
    G = spec.G(t, yv)
    r = yv - C @ zeta
    dzeta = A @ zeta + B @ u + spec.phi(t, yv) + L @ r
    dOmega = (A - L @ C) @ Omega - G
    dtheta = -Gamma @ Omega.T @ C.T @ (r + C @ Omega @ theta_hat)
    return dzeta, dOmega, dtheta


def ideal_observer_rhs(state: IdealObserverState, spec: LpvSystemSpec, A_true, B_true,
                       u, y_v, L, Gamma, t: float = 0.0) -> IdealObserverState:
    dz, dO, dth = _adaptive_terms(np.asarray(A_true), np.asarray(B_true), np.asarray(L),
                                  np.asarray(Gamma), spec, t, np.asarray(u, float),
                                  np.asarray(y_v, float), state.zeta, state.Omega,
                                  state.theta_hat)
    return IdealObserverState(dz, dO, dth)


def set_observer_rhs(state: AdaptiveObserverState, spec: LpvSystemSpec, gains: ObserverGains,
                     u, y_v, t: float = 0.0):
    """Derivatives of ``(zeta, Omega, theta_hat)`` for both observers.

    Returns two tuples, the first for the lower model ``m``.
    """
    u = np.asarray(u, dtype=float)
    y_v = np.asarray(y_v, dtype=float)
    lower = _adaptive_terms(spec.A_lower(t, y_v), spec.B_lower, gains.L_lower,
                            gains.Gamma_lower, spec, t, u, y_v,
                            state.zeta_m, state.Omega_m, state.theta_hat_m)
    upper = _adaptive_terms(spec.A_upper(t, y_v), spec.B_upper, gains.L_upper,
                            gains.Gamma_upper, spec, t, u, y_v,
                            state.zeta_M, state.Omega_M, state.theta_hat_M)
    return lower, upper


def state_observer_rhs(state: AdaptiveObserverState, spec: LpvSystemSpec, gains: ObserverGains,
                       u, y_v, pairing=("m", "M"), t: float = 0.0):
    """Derivatives of ``(xi_m, xi_M)``; ``pairing`` names the endpoint driving each."""
    u = np.asarray(u, dtype=float)
    y_v = np.asarray(y_v, dtype=float)
    C = spec.C
    G = spec.G(t, y_v)
    phi = spec.phi(t, y_v)
    theta = {"m": state.theta_hat_m, "M": state.theta_hat_M}
    out = []
    for A, B, L, xi, o in ((spec.A_lower(t, y_v), spec.B_lower, gains.L_lower, state.xi_m, pairing[0]),
                           (spec.A_upper(t, y_v), spec.B_upper, gains.L_upper, state.xi_M, pairing[1])):
        out.append(A @ xi + B @ u + phi + G @ theta[o] + L @ (y_v - C @ xi))
    return out[0], out[1]


def compute_error_diagnostics(spec: LpvSystemSpec, x, state: AdaptiveObserverState,
                              theta, A_true, B_true, u, y, y_v, L_lower=None, L_upper=None,
                              t: float = 0.0) -> ErrorDiagnostics:
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    u = np.asarray(u, dtype=float)
    y = np.asarray(y, dtype=float)
    y_v = np.asarray(y_v, dtype=float)
    eps_m = x - state.zeta_m
    eps_M = x - state.zeta_M
    p_m = (A_true - spec.A_lower(t, y_v)) @ x + (B_true - spec.B_lower) @ u
    p_M = (A_true - spec.A_upper(t, y_v)) @ x + (B_true - spec.B_upper) @ u
    v = y_v - y
    d_v = spec.phi(t, y) - spec.phi(t, y_v) + (spec.G(t, y) - spec.G(t, y_v)) @ theta
    if L_lower is not None:
        d_v = d_v - np.asarray(L_lower) @ v
    return ErrorDiagnostics(eps_m, eps_M, eps_m + state.Omega_m @ theta,
                            eps_M + state.Omega_M @ theta, x - state.xi_m, x - state.xi_M,
                            p_m, p_M, d_v)


# ---------------------------------------------------------------------------
# flat augmented state, same layout as the compiled kernel


def pack(x, state: AdaptiveObserverState, ideal: Optional[IdealObserverState] = None) -> np.ndarray:
    n, q = state.Omega_m.shape
    off = layout(n, q, ideal is not None)
    z = np.zeros(off["size"])
    z[:n] = x
    for o in ("m", "M"):
        z[off["zeta_" + o]:off["zeta_" + o] + n] = getattr(state, "zeta_" + o)
        z[off["Omega_" + o]:off["Omega_" + o] + n * q] = getattr(state, "Omega_" + o).ravel()
        z[off["theta_" + o]:off["theta_" + o] + q] = getattr(state, "theta_hat_" + o)
        z[off["xi_" + o]:off["xi_" + o] + n] = getattr(state, "xi_" + o)
    if ideal is not None:
        z[off["zeta"]:off["zeta"] + n] = ideal.zeta
        z[off["Omega"]:off["Omega"] + n * q] = ideal.Omega.ravel()
        z[off["theta"]:off["theta"] + q] = ideal.theta_hat
    return z


def unpack(z, n: int, q: int, ideal: bool = False):
    off = layout(n, q, ideal)
    z = np.asarray(z)
    blk = lambda key, size: z[..., off[key]:off[key] + size]
    mat = lambda key: blk(key, n * q).reshape(z.shape[:-1] + (n, q))
    state = AdaptiveObserverState(blk("zeta_m", n), mat("Omega_m"), blk("theta_m", q),
                                  blk("zeta_M", n), mat("Omega_M"), blk("theta_M", q),
                                  blk("xi_m", n), blk("xi_M", n))
    ideal_state = None
    if ideal:
        ideal_state = IdealObserverState(blk("zeta", n), mat("Omega"), blk("theta", q))
    return z[..., :n], state, ideal_state


def coupled_rhs(spec: LpvSystemSpec, truth: TruthModel, gains: ObserverGains, t: float, z,
                noise, theta, pairing=("m", "M"), ideal: bool = False) -> np.ndarray:
    """Plant plus every observer, evaluated with NumPy (reference path)."""
    n, q = spec.n, spec.q
    x, state, ist = unpack(z, n, q, ideal)
    y = spec.C @ x
    yv = y + np.asarray(noise, dtype=float)
    u = truth.u(t, yv)
    if truth.rhs is not None:
        dx = truth.rhs(t, x, u, theta)
    else:
        dx = (truth.A_true(t, x) @ x + truth.B_true(t) @ u + spec.phi(t, y)
              + spec.G(t, y) @ theta)
    (dzm, dOm, dthm), (dzM, dOM, dthM) = set_observer_rhs(state, spec, gains, u, yv, t)
    dxim, dxiM = state_observer_rhs(state, spec, gains, u, yv, pairing, t)
    d = AdaptiveObserverState(dzm, dOm, dthm, dzM, dOM, dthM, dxim, dxiM)
    dist = None
    if ideal:
        dist = ideal_observer_rhs(ist, spec, truth.A_true(t, x), truth.B_true(t), u, yv,
                                  gains.L_lower, gains.Gamma_lower, t)
    return pack(dx, d, dist)
