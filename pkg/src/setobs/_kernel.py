"""Fused RK4 kernel for the plant together with every observer.

The augmented state is laid out as::

    x | zeta_m Omega_m theta_m | zeta_M Omega_M theta_M | xi_m xi_M | [zeta Omega theta]

(``Omega`` row-major, the bracketed ideal-observer block is optional). The
kernel mirrors :func:`setobs.observers.coupled_rhs`; the test-suite checks
that both routes agree.
"""

import numpy as np
from numba import njit

from ._models import eval_model


def layout(n, q, ideal):
    """Offsets of every block in the augmented state."""
    block = n + n * q + q
    off = {"x": 0}
    for i, o in enumerate(("m", "M")):
        base = n + i * block
        off["zeta_" + o] = base
        off["Omega_" + o] = base + n
        off["theta_" + o] = base + n + n * q
    off["xi_m"] = n + 2 * block
    off["xi_M"] = n + 2 * block + n
    size = n + 2 * block + 2 * n
    if ideal:
        off["zeta"] = size
        off["Omega"] = size + n
        off["theta"] = size + n + n * q
        size += block
    off["size"] = size
    return off


@njit(cache=True)
def _observer_block(base, z, dz, a, b, lo, gam, c, g, u, phi, yv, n, p, q,
                    r, e, w, aux):
    # zeta' = A zeta + B u + phi + L (yv - C zeta)
    zo = base
    om = base + n
    to = base + n + n * q
    for i in range(p):
        acc = yv[i]
        for j in range(n):
            acc -= c[i, j] * z[zo + j]
        r[i] = acc
    for i in range(n):
        acc = phi[i]
        for j in range(n):
            acc += a[i, j] * z[zo + j]
        for j in range(u.shape[0]):
            acc += b[i, j] * u[j]
        for j in range(p):
            acc += lo[i, j] * r[j]
        dz[zo + i] = acc
    # Omega' = (A - L C) Omega - G
    for i in range(n):
        for j in range(n):
            acc = a[i, j]
            for k in range(p):
                acc -= lo[i, k] * c[k, j]
            aux[i, j] = acc
    for i in range(n):
        for j in range(q):
            acc = -g[i, j]
            for k in range(n):
                acc += aux[i, k] * z[om + k * q + j]
            dz[om + i * q + j] = acc
    # theta' = -Gamma Omega^T C^T (yv - C zeta + C Omega theta)
    for i in range(p):
        acc = r[i]
        for k in range(n):
            co = 0.0
            for j in range(q):
                co += z[om + k * q + j] * z[to + j]
            acc += c[i, k] * co
        e[i] = acc
    for j in range(q):
        acc = 0.0
        for k in range(n):
            ce = 0.0
            for i in range(p):
                ce += c[i, k] * e[i]
            acc += z[om + k * q + j] * ce
        w[j] = acc
    for i in range(q):
        acc = 0.0
        for j in range(q):
            acc -= gam[i, j] * w[j]
        dz[to + i] = acc


@njit(cache=True)
def _state_block(xo, to, z, dz, a, b, lo, c, g, u, phi, yv, n, p, q, r):
    # xi' = A xi + B u + phi + G theta_hat + L (yv - C xi)
    for i in range(p):
        acc = yv[i]
        for j in range(n):
            acc -= c[i, j] * z[xo + j]
        r[i] = acc
    for i in range(n):
        acc = phi[i]
        for j in range(n):
            acc += a[i, j] * z[xo + j]
        for j in range(u.shape[0]):
            acc += b[i, j] * u[j]
        for j in range(q):
            acc += g[i, j] * z[to + j]
        for j in range(p):
            acc += lo[i, j] * r[j]
        dz[xo + i] = acc


@njit(cache=True)
def _rhs(kind, par, t, z, v, theta, c, l_lo, l_hi, gam_lo, gam_hi, pair,
         ideal, n, m, p, q, dz, ws):
    (y, yv, f, u, a_lo, a_hi, b_lo, b_hi, phi, g, a_true, b_true,
     r, e, w, aux) = ws
    x = z[:n]
    for i in range(p):
        acc = 0.0
        for j in range(n):
            acc += c[i, j] * x[j]
        y[i] = acc
        yv[i] = acc + v[i]
    eval_model(kind, par, t, x, y, yv, theta,
               f, u, a_lo, a_hi, b_lo, b_hi, phi, g, a_true, b_true)
    for i in range(n):
        dz[i] = f[i]
    block = n + n * q + q
    base_m = n
    base_M = n + block
    _observer_block(base_m, z, dz, a_lo, b_lo, l_lo, gam_lo, c, g, u, phi, yv,
                    n, p, q, r, e, w, aux)
    _observer_block(base_M, z, dz, a_hi, b_hi, l_hi, gam_hi, c, g, u, phi, yv,
                    n, p, q, r, e, w, aux)
    xi_m = n + 2 * block
    xi_M = xi_m + n
    th_m = base_m + n + n * q
    th_M = base_M + n + n * q
    _state_block(xi_m, th_m if pair[0] == 0 else th_M, z, dz, a_lo, b_lo, l_lo,
                 c, g, u, phi, yv, n, p, q, r)
    _state_block(xi_M, th_m if pair[1] == 0 else th_M, z, dz, a_hi, b_hi, l_hi,
                 c, g, u, phi, yv, n, p, q, r)
    if ideal:
        _observer_block(xi_M + n, z, dz, a_true, b_true, l_lo, gam_lo, c, g, u,
                        phi, yv, n, p, q, r, e, w, aux)


@njit(cache=True)
def run_chunk(kind, par, t_start, h, nsteps, z0, noise, theta, c, l_lo, l_hi,
              gam_lo, gam_hi, pair, ideal, n, m, p, q, out):
    """Advance ``nsteps`` RK4 steps and store every grid state in ``out``.

    Returns the number of completed steps; a value below ``nsteps`` marks
    divergence (non-finite entry or norm above 1e9) at that step.
    """
    size = z0.shape[0]
    ws = (np.zeros(p), np.zeros(p), np.zeros(n), np.zeros(m),
          np.zeros((n, n)), np.zeros((n, n)), np.zeros((n, m)), np.zeros((n, m)),
          np.zeros(n), np.zeros((n, q)), np.zeros((n, n)), np.zeros((n, m)),
          np.zeros(p), np.zeros(p), np.zeros(q), np.zeros((n, n)))
    k1 = np.zeros(size)
    k2 = np.zeros(size)
    k3 = np.zeros(size)
    k4 = np.zeros(size)
    zt = np.zeros(size)
    z = z0.copy()
    out[0, :] = z
    for s in range(nsteps):
        t = t_start + s * h
        v = noise[s]
        _rhs(kind, par, t, z, v, theta, c, l_lo, l_hi, gam_lo, gam_hi, pair,
             ideal, n, m, p, q, k1, ws)
        for i in range(size):
            zt[i] = z[i] + 0.5 * h * k1[i]
        _rhs(kind, par, t + 0.5 * h, zt, v, theta, c, l_lo, l_hi, gam_lo,
             gam_hi, pair, ideal, n, m, p, q, k2, ws)
        for i in range(size):
            zt[i] = z[i] + 0.5 * h * k2[i]
        _rhs(kind, par, t + 0.5 * h, zt, v, theta, c, l_lo, l_hi, gam_lo,
             gam_hi, pair, ideal, n, m, p, q, k3, ws)
        for i in range(size):
            zt[i] = z[i] + h * k3[i]
        _rhs(kind, par, t + h, zt, v, theta, c, l_lo, l_hi, gam_lo, gam_hi,
             pair, ideal, n, m, p, q, k4, ws)
        norm2 = 0.0
        ok = True
        for i in range(size):
            z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if not np.isfinite(z[i]):
                ok = False
            norm2 += z[i] * z[i]
        if not ok or norm2 > 1e18:
            return s
        out[s + 1, :] = z
    return nsteps
