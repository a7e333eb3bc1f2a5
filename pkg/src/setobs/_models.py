"""Compiled right-hand-side pieces for the built-in plant families.

Every family is evaluated through :func:`eval_model`, which fills the
pre-allocated output buffers for one time instant. The scenario builders wrap
the same functions for the Python-level API, so the fast simulation kernel and
the reference path share one set of formulas.
"""

import numpy as np
from numba import njit

CONSTANT = 0
EXAMPLE1 = 1
EXAMPLE2 = 2
CRUSHER = 3
TANK1 = 4
TANK2 = 5

KIND_NAMES = {
    CONSTANT: "constant",
    EXAMPLE1: "example1",
    EXAMPLE2: "example2",
    CRUSHER: "crusher",
    TANK1: "tank1",
    TANK2: "tank2",
}

# tank parameter vector layout
T_A13, T_A32, T_A20, T_SC, T_K, T_XM3, T_XMAX3, T_PERIOD, T_EPS = range(9)
T_R1B, T_R1A, T_R2B, T_R2A = 9, 10, 11, 12
T_RM, T_RMAX, T_TA13, T_TA32, T_TA20 = 13, 14, 15, 16, 17
TANK_NPAR = 18

# crusher parameter vector layout
C_BETA1, C_BETA2, C_C0, C_C, C_CM, C_CMAX, C_MM, C_MMAX, C_TK, C_P1, C_P2 = range(11)
CRUSHER_NPAR = 11


# --------------------------------------------------------------------------
# example1 and example2 scenarios: time-varying A(t), G(t), no input, phi = 0


@njit(cache=True)
def example1_a_true(t, out):
    out[:] = 0.0
    out[0, 0] = -1.0 + 0.5 * np.sin(t)
    out[0, 1] = 1.0
    out[1, 0] = 1.2
    out[1, 1] = -2.0 + 0.3 * np.cos(3.0 * t)
    out[1, 2] = 1.3
    out[2, 1] = 1.0
    out[2, 2] = -3.0 + 0.6 * np.cos(2.0 * t)


@njit(cache=True)
def example1_g(t, out):
    out[:] = 0.0
    out[0, 1] = 1.0
    out[1, 0] = 1.0 - 0.2 * np.sin(2.0 * t)
    out[2, 1] = 1.0 + 0.3 * np.sin(3.0 * t)


@njit(cache=True)
def example2_a_true(t, out):
    out[0, 0] = -1.0 + 0.1 * np.sin(3.0 * t)
    out[0, 1] = 1.0
    out[0, 2] = 0.4 + 0.2 * np.sin(3.0 * t)
    out[1, 0] = 0.0
    out[1, 1] = -1.0 + 0.3 * np.cos(t)
    out[1, 2] = 1.0
    out[2, 0] = 0.5 + 0.1 * np.cos(2.0 * t)
    out[2, 1] = 1.0
    out[2, 2] = -2.0 + 0.2 * np.cos(2.0 * t)


@njit(cache=True)
def example2_g(t, out):
    out[:] = 0.0
    out[0, 0] = 1.0
    out[1, 0] = 0.3 + 0.3 * np.sin(2.0 * t)
    out[2, 1] = 0.3 + 0.2 * np.sin(3.0 * t)


# --------------------------------------------------------------------------
# vibration crusher


@njit(cache=True)
def square_pulse(t, period):
    """1 on the first half of every period, 0 on the second."""
    return 1.0 if (t % period) < 0.5 * period else 0.0


@njit(cache=True)
def crusher_inverse_masses(t, par):
    inv_lo = 1.0 / par[C_MMAX]
    inv_hi = 1.0 / par[C_MM]
    s = t - 0.5 * par[C_TK]
    mu = 0.5 * (inv_lo - inv_hi) * (1.0 + 0.1 * s / (1.0 + 0.1 * abs(s))) + inv_hi
    mu += 0.05 * np.sin(3.0 * t)
    return mu, inv_lo + inv_hi - mu


@njit(cache=True)
def crusher_a_true(t, par, out):
    mu, eta = crusher_inverse_masses(t, par)
    c = par[C_C]
    out[:] = 0.0
    out[0, 1] = 1.0
    out[1, 0] = -(par[C_BETA1] + c) * mu
    out[1, 1] = -par[C_C0] * mu
    out[1, 2] = c * mu
    out[2, 3] = 1.0
    out[3, 0] = c * eta
    out[3, 2] = -(par[C_BETA2] + c) * eta
    out[3, 3] = -par[C_C0] * eta


@njit(cache=True)
def crusher_bounds(par, a_lo, a_hi):
    inv_lo = 1.0 / par[C_MMAX]
    inv_hi = 1.0 / par[C_MM]
    cm, cM = par[C_CM], par[C_CMAX]
    c0 = par[C_C0]
    for a in (a_lo, a_hi):
        a[:] = 0.0
        a[0, 1] = 1.0
        a[2, 3] = 1.0
    a_lo[1, 0] = -(par[C_BETA1] + cM) * inv_hi
    a_lo[1, 1] = -c0 * inv_hi
    a_lo[1, 2] = cm * inv_lo
    a_lo[3, 0] = cm * inv_lo
    a_lo[3, 2] = -(par[C_BETA2] + cM) * inv_hi
    a_lo[3, 3] = -c0 * inv_hi
    a_hi[1, 0] = -(par[C_BETA1] + cm) * inv_lo
    a_hi[1, 1] = -c0 * inv_lo
    a_hi[1, 2] = cM * inv_hi
    a_hi[3, 0] = cM * inv_hi
    a_hi[3, 2] = -(par[C_BETA2] + cm) * inv_lo
    a_hi[3, 3] = -c0 * inv_lo


@njit(cache=True)
def crusher_g(t, par, out):
    u1 = square_pulse(t, par[C_P1])
    u2 = square_pulse(t, par[C_P2])
    out[:] = 0.0
    out[1, 0] = u1
    out[1, 1] = u2
    out[3, 2] = u1
    out[3, 3] = u2


# --------------------------------------------------------------------------
# three-tank system


@njit(cache=True)
def signed_sqrt(x):
    return np.sign(x) * np.sqrt(abs(x))


@njit(cache=True)
def lam(x, eps):
    """|x|^-1/2 with the argument floored at ``eps``."""
    ax = abs(x)
    if ax < eps:
        ax = eps
    return 1.0 / np.sqrt(ax)


@njit(cache=True)
def lam_range(lo, hi, eps):
    """(min, max) of ``lam`` over the interval [lo, hi]."""
    if lo <= 0.0 <= hi:
        dmin = 0.0
    else:
        dmin = min(abs(lo), abs(hi))
    dmax = max(abs(lo), abs(hi))
    return lam(dmax, eps), lam(dmin, eps)


@njit(cache=True)
def tank_rhs(x, u, theta, a13, a32, a20, sc, out):
    q13 = a13 * signed_sqrt(x[0] - x[2])
    q32 = a32 * signed_sqrt(x[2] - x[1])
    q20 = a20 * signed_sqrt(x[1])
    out[0] = (-q13 + u[0] + theta[0]) / sc
    out[1] = (q32 - q20 + u[1] + theta[1]) / sc
    out[2] = (q13 - q32 + theta[2]) / sc


@njit(cache=True)
def tank_a_matrix(x, a13, a32, a20, sc, eps, out):
    l13 = a13 * lam(x[0] - x[2], eps)
    l32 = a32 * lam(x[2] - x[1], eps)
    l20 = a20 * lam(x[1], eps)
    out[0, 0] = -l13 / sc
    out[0, 1] = 0.0
    out[0, 2] = l13 / sc
    out[1, 0] = 0.0
    out[1, 1] = -(l32 + l20) / sc
    out[1, 2] = l32 / sc
    out[2, 0] = l13 / sc
    out[2, 1] = l32 / sc
    out[2, 2] = -(l32 + l13) / sc


@njit(cache=True)
def tank_reference(t, par):
    period = par[T_PERIOD]
    mu = 0.0 if (t % period) <= 0.5 * period else 1.0
    return (par[T_R1B] * (1.0 + par[T_R1A] * mu),
            par[T_R2B] * (1.0 + par[T_R2A] * mu))


@njit(cache=True)
def saturate(v):
    return v if v > 0.0 else 0.0


@njit(cache=True)
def tank_control(t, y1, y2, par, out):
    r1, r2 = tank_reference(t, par)
    k = par[T_K]
    out[0] = saturate(-k * signed_sqrt(y1 - r1))
    out[1] = saturate(-k * signed_sqrt(y2 - r2) + par[T_A20] * signed_sqrt(y2))


@njit(cache=True)
def tank1_bounds(y, par, a_lo, a_hi):
    sc, eps = par[T_SC], par[T_EPS]
    a13, a32, a20 = par[T_A13], par[T_A32], par[T_A20]
    xm3, xM3 = par[T_XM3], par[T_XMAX3]
    l13min, l13max = lam_range(y[0] - xM3, y[0] - xm3, eps)
    l32min, l32max = lam_range(xm3 - y[1], xM3 - y[1], eps)
    l20 = lam(y[1], eps)
    for a, s in ((a_lo, 0), (a_hi, 1)):
        # s == 0: entrywise minimum, s == 1: entrywise maximum
        big13 = l13max if s == 0 else l13min
        small13 = l13min if s == 0 else l13max
        big32 = l32max if s == 0 else l32min
        small32 = l32min if s == 0 else l32max
        a[0, 0] = -a13 * big13 / sc
        a[0, 1] = 0.0
        a[0, 2] = a13 * small13 / sc
        a[1, 0] = 0.0
        a[1, 1] = -(a32 * big32 + a20 * l20) / sc
        a[1, 2] = a32 * small32 / sc
        a[2, 0] = a13 * small13 / sc
        a[2, 1] = a32 * small32 / sc
        a[2, 2] = -(a32 * big32 + a13 * big13) / sc


@njit(cache=True)
def tank2_bounds(y, par, a_lo, a_hi):
    sc, eps = par[T_SC], par[T_EPS]
    l13 = par[T_A13] * lam(y[0] - y[2], eps)
    l32 = par[T_A32] * lam(y[2] - y[1], eps)
    l20 = par[T_A20] * lam(y[1], eps)
    for a, diag_r, off_r in ((a_lo, par[T_RMAX], par[T_RM]),
                             (a_hi, par[T_RM], par[T_RMAX])):
        a[0, 0] = -diag_r * l13 / sc
        a[0, 1] = 0.0
        a[0, 2] = off_r * l13 / sc
        a[1, 0] = 0.0
        a[1, 1] = -diag_r * (l32 + l20) / sc
        a[1, 2] = off_r * l32 / sc
        a[2, 0] = off_r * l13 / sc
        a[2, 1] = off_r * l32 / sc
        a[2, 2] = -diag_r * (l32 + l13) / sc


# --------------------------------------------------------------------------
# dispatcher


@njit(cache=True)
def _unpack(par, start, rows, cols, out):
    k = start
    for i in range(rows):
        for j in range(cols):
            out[i, j] = par[k]
            k += 1
    return k


@njit(cache=True)
def eval_model(kind, par, t, x, y, yv, theta,
               f, u, a_lo, a_hi, b_lo, b_hi, phi, g, a_true, b_true):
    """Evaluate one family at time ``t``.

    ``x`` and ``y = Cx`` are the true state and output (they drive the plant),
    ``yv`` is the measured output (it drives the bound maps, phi, G and the
    controller). Every output buffer is overwritten.
    """
    n = x.shape[0]
    if kind == CONSTANT:
        nm = b_lo.shape[1]
        nq = g.shape[1]
        k = _unpack(par, 0, n, n, a_lo)
        k = _unpack(par, k, n, n, a_hi)
        k = _unpack(par, k, n, nm, b_lo)
        k = _unpack(par, k, n, nm, b_hi)
        k = _unpack(par, k, n, nq, g)
        for i in range(n):
            phi[i] = par[k + i]
        k += n
        k = _unpack(par, k, n, n, a_true)
        k = _unpack(par, k, n, nm, b_true)
        for i in range(nm):
            u[i] = par[k + i]
    elif kind == EXAMPLE1 or kind == EXAMPLE2:
        _unpack(par, _unpack(par, 0, n, n, a_lo), n, n, a_hi)
        if kind == EXAMPLE1:
            example1_a_true(t, a_true)
            example1_g(t, g)
        else:
            example2_a_true(t, a_true)
            example2_g(t, g)
        b_lo[:] = 0.0
        b_hi[:] = 0.0
        b_true[:] = 0.0
        phi[:] = 0.0
        u[:] = 0.0
    elif kind == CRUSHER:
        crusher_bounds(par, a_lo, a_hi)
        crusher_a_true(t, par, a_true)
        crusher_g(t, par, g)
        b_lo[:] = 0.0
        b_hi[:] = 0.0
        b_true[:] = 0.0
        phi[:] = 0.0
        u[0] = square_pulse(t, par[C_P1])
        u[1] = square_pulse(t, par[C_P2])
    else:
        sc = par[T_SC]
        tank_control(t, yv[0], yv[1], par, u)
        b_lo[:] = 0.0
        b_lo[0, 0] = 1.0 / sc
        b_lo[1, 1] = 1.0 / sc
        b_hi[:] = b_lo
        b_true[:] = b_lo
        phi[:] = 0.0
        g[:] = 0.0
        for j in range(g.shape[1]):
            g[j, j] = 1.0 / sc
        if kind == TANK1:
            tank1_bounds(yv, par, a_lo, a_hi)
        else:
            tank2_bounds(yv, par, a_lo, a_hi)
        ta13, ta32, ta20 = par[T_TA13], par[T_TA32], par[T_TA20]
        tank_a_matrix(x, ta13, ta32, ta20, sc, par[T_EPS], a_true)
        th = np.zeros(3)
        for j in range(theta.shape[0]):
            th[j] = theta[j]
        tank_rhs(x, u, th, ta13, ta32, ta20, sc, f)
        return
    # linear families: f = A x + B u + phi(y) + G(y) theta
    for i in range(n):
        acc = phi[i]
        for j in range(n):
            acc += a_true[i, j] * x[j]
        for j in range(u.shape[0]):
            acc += b_true[i, j] * u[j]
        for j in range(theta.shape[0]):
            acc += g[i, j] * theta[j]
        f[i] = acc
