"""Built-in benchmark systems: two academic examples, a vibration crusher and a
three-tank plant in two measurement configurations."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict, replace
from typing import Optional

import numpy as np

from . import _models as K
from .model import (LpvSystemSpec, ObserverGains, ThetaSchedule, TruthModel,
                    constant_map)
from .monotone import verify_assumption2

SCENARIOS = ("example1", "example2", "crusher", "tank1", "tank2")


class UnknownScenarioError(KeyError):
    pass


class DomainError(ValueError):
    pass


class AssumptionError(RuntimeError):
    """Raised when the cooperativity/stability check fails for a scenario."""

    def __init__(self, report):
        self.report = report
        super().__init__(report.failure or "assumption check failed")


@dataclass
class PhaseClaim:
    """What the run is expected to certify on one constant-parameter piece.

    ``ordering`` is ``"m<=M"`` when ``theta_hat_m`` is the lower endpoint and
    ``"M<=m"`` otherwise. ``sign_case`` selects the state-observer pairing:
    ``"nonneg"`` (x >= 0, u >= 0), ``"nonpos"`` or ``None`` when neither sign
    condition is claimed.
    """

    theorem: str
    branch: str
    ordering: str
    sign_case: Optional[str] = None


@dataclass
class Scenario:
    name: str
    spec: LpvSystemSpec
    truth: TruthModel
    gains: ObserverGains
    horizon: float
    step: float
    noise_amplitude: np.ndarray
    theta_hat0: tuple
    zeta0: tuple
    xi0: tuple
    phases: list
    fault_times: list = field(default_factory=list)
    period: Optional[float] = None
    pe_window: Optional[float] = None
    transient: float = 0.0
    ideal: bool = False
    expected: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def with_options(self, **kw) -> "Scenario":
        return replace(self, **kw)


def _phase_schedule(values, lower, upper, switch_times=()):
    return ThetaSchedule.build(values, lower, upper, switch_times)


def _noise_off(p):
    return np.zeros(p)


# ---------------------------------------------------------------------------
# example1: competitive case, two parameter phases


EX1_A_LOWER = np.array([[-1.5, 1, 0], [1.2, -2.3, 1.3], [0, 1, -3.6]])
EX1_A_UPPER = np.array([[-0.5, 1, 0], [1.2, -1.7, 1.3], [0, 1, -2.4]])
EX1_L = np.array([[2.0, 0, 0], [0, 3, 1]]).T


def example1_a_true(t):
    out = np.zeros((3, 3))
    K.example1_a_true(t, out)
    return out


def example1_g(t):
    out = np.zeros((3, 2))
    K.example1_g(t, out)
    return out


def _example1(gamma: float = 5.0, horizon: float = 600.0) -> Scenario:
    C = np.array([[1.0, 0, 0], [0, 1, 0]])
    t_theta = 300.0
    sched = _phase_schedule([[2, 1], [-1, -2]], [[1, -4.5], [-2.5, -9]],
                            [[3.5, 7], [0, 4.5]], [t_theta])
    spec = LpvSystemSpec(3, 1, 2, 2, C, constant_map(EX1_A_LOWER), constant_map(EX1_A_UPPER),
                         lambda t, y: example1_g(t),
                         theta_lower=[-2.5, -9], theta_upper=[3.5, 7], v_max=[1.0, 1.0],
                         kernel_kind=K.EXAMPLE1,
                         kernel_par=np.concatenate([EX1_A_LOWER.ravel(), EX1_A_UPPER.ravel()]))
    x0 = np.ones(3)
    truth = TruthModel(lambda t, x: example1_a_true(t), lambda t: np.zeros((3, 1)), sched, x0,
                       lambda t, y: np.zeros(1))
    gains = ObserverGains(EX1_L, EX1_L, gamma * np.eye(2), gamma * np.eye(2))
    phases = [PhaseClaim("theorem1", "ii.a", "M<=m"), PhaseClaim("theorem1", "ii.b", "m<=M")]
    return Scenario("example1", spec, truth, gains, horizon, 1e-3, _noise_off(2),
                    theta_hat0=(np.array([3.5, 7.0]), np.array([1.0, -4.5])),
                    zeta0=(x0.copy(), x0.copy()), xi0=(x0.copy(), x0.copy()),
                    phases=phases, transient=50.0, ideal=True,
                    expected={"branches": ["ii.a", "ii.b"], "containment_after": 50.0,
                              "containment_fraction": 0.95, "noise": 1.0},
                    params={"gamma": gamma, "t_theta": t_theta})


# ---------------------------------------------------------------------------
# example2: cooperative case, periodic window


# entrywise lower and upper envelopes of A(t)
EX2_A_LOWER = np.array([[-1.1, 1, 0.2], [0, -1.3, 1], [0.4, 1, -2.2]])
EX2_A_UPPER = np.array([[-0.9, 1, 0.6], [0, -0.7, 1], [0.6, 1, -1.8]])
EX2_L_LOWER = np.array([[0.0, -1, 0], [0.5, 1, -1]]).T
EX2_L_UPPER = np.array([[0.0, -1, 0], [1, 1, 0.6]]).T


def example2_a_true(t):
    out = np.zeros((3, 3))
    K.example2_a_true(t, out)
    return out


def example2_g(t):
    out = np.zeros((3, 2))
    K.example2_g(t, out)
    return out


def _example2(gamma=(40.0, 180.0), horizon: float = 600.0) -> Scenario:
    C = np.array([[1.0, 0, -1], [1, 1, 0]])
    t_theta = 300.0
    box_lo, box_hi = [-1, -2.5], [0.5, 0]
    sched = _phase_schedule([[-0.5, -1], [0, -2]], [box_lo, box_lo], [box_hi, box_hi], [t_theta])
    spec = LpvSystemSpec(3, 1, 2, 2, C, constant_map(EX2_A_LOWER), constant_map(EX2_A_UPPER),
                         lambda t, y: example2_g(t),
                         theta_lower=box_lo, theta_upper=box_hi, v_max=[0.5, 0.5],
                         kernel_kind=K.EXAMPLE2,
                         kernel_par=np.concatenate([EX2_A_LOWER.ravel(), EX2_A_UPPER.ravel()]))
    x0 = np.zeros(3)
    truth = TruthModel(lambda t, x: example2_a_true(t), lambda t: np.zeros((3, 1)), sched, x0,
                       lambda t, y: np.zeros(1))
    G = np.diag(np.asarray(gamma, dtype=float))
    gains = ObserverGains(EX2_L_LOWER, EX2_L_UPPER, G, G)
    claim = PhaseClaim("theorem2", "ii.b", "m<=M", "nonpos")
    return Scenario("example2", spec, truth, gains, horizon, 1e-3, _noise_off(2),
                    theta_hat0=(np.array(box_lo, float), np.array(box_hi, float)),
                    zeta0=(x0.copy(), x0.copy()), xi0=(x0.copy(), x0.copy()),
                    phases=[claim, claim], period=2 * np.pi, pe_window=2 * np.pi, transient=25.0,
                    expected={"containment_after": 25.0, "containment_fraction": 1.0,
                              "noisy_fraction": 0.90, "noise": 0.5},
                    params={"gamma": list(gamma), "t_theta": t_theta})


# ---------------------------------------------------------------------------
# vibration crusher


@dataclass
class CrusherParams:
    beta1: float = 0.05
    beta2: float = 0.05
    c0: float = 0.5
    c: float = 0.1
    c_min: float = 0.08
    c_max: float = 0.12
    m_min: float = 0.25
    m_max: float = 0.33
    t_k: float = 100.0
    period1: float = 5.0
    period2: float = 6.0

    def vector(self) -> np.ndarray:
        par = np.zeros(K.CRUSHER_NPAR)
        par[[K.C_BETA1, K.C_BETA2, K.C_C0, K.C_C, K.C_CM, K.C_CMAX, K.C_MM, K.C_MMAX,
             K.C_TK, K.C_P1, K.C_P2]] = [self.beta1, self.beta2, self.c0, self.c, self.c_min,
                                         self.c_max, self.m_min, self.m_max, self.t_k,
                                         self.period1, self.period2]
        return par


def crusher_inverse_mass(t: float, params: CrusherParams):
    """Inverse masses ``(1/m(t), 1/M(t))`` of the two platforms."""
    return K.crusher_inverse_masses(t, params.vector())


def crusher_model(params: CrusherParams = None, gamma: float = 1.0):
    params = params or CrusherParams()
    par = params.vector()
    a_lo = np.zeros((4, 4))
    a_hi = np.zeros((4, 4))
    K.crusher_bounds(par, a_lo, a_hi)
    inv_lo, inv_hi = 1.0 / params.m_max, 1.0 / params.m_min

    def a_true(t, x=None):
        out = np.zeros((4, 4))
        K.crusher_a_true(t, par, out)
        return out

    def g(t, y=None):
        out = np.zeros((4, 4))
        K.crusher_g(t, par, out)
        return out

    # envelope holds for every admissible mass, checked on a dense time grid
    for t in np.linspace(0, params.t_k, 2001):
        A = a_true(t)
        if np.any(A < a_lo - 1e-12) or np.any(A > a_hi + 1e-12):
            raise AssertionError(f"crusher truth leaves the envelope at t = {t}")
    C = np.array([[1.0, 0, 0, 0], [0, 0, 1, 0]])
    L_lo = np.array([[1, 0], [-(params.beta1 + params.c_max) * inv_hi, 0],
                     [0, 1], [0, -(params.beta2 + params.c_max) * inv_hi]])
    L_hi = np.array([[1, 0], [-(params.beta1 + params.c_min) * inv_lo, 0],
                     [0, 1], [0, -(params.beta2 + params.c_min) * inv_lo]])
    theta_lo = np.array([0.5, 0, 0, 0.5])
    theta_hi = np.array([2.0, 1, 1, 2])
    spec = LpvSystemSpec(4, 2, 2, 4, C, constant_map(a_lo), constant_map(a_hi), g,
                         theta_lower=theta_lo, theta_upper=theta_hi,
                         kernel_kind=K.CRUSHER, kernel_par=par)
    sched = ThetaSchedule.constant([1, 0.5, 0.5, 1.3], theta_lo, theta_hi)
    truth = TruthModel(a_true, lambda t: np.zeros((4, 2)), sched, np.zeros(4),
                       lambda t, y: np.array([K.square_pulse(t, params.period1),
                                              K.square_pulse(t, params.period2)]))
    gains = ObserverGains(L_lo, L_hi, gamma * np.eye(4), gamma * np.eye(4))
    return spec, truth, gains


def _crusher(gamma: float = 1.0, params: CrusherParams = None) -> Scenario:
    params = params or CrusherParams()
    spec, truth, gains = crusher_model(params, gamma)
    z = np.zeros(4)
    return Scenario("crusher", spec, truth, gains, params.t_k, 1e-3, _noise_off(2),
                    theta_hat0=(spec.theta_upper.copy(), spec.theta_lower.copy()),
                    zeta0=(z, z.copy()), xi0=(z.copy(), z.copy()),
                    phases=[PhaseClaim("theorem1", "ii.a", "M<=m")], transient=20.0,
                    expected={"containment_after": 20.0},
                    params={"gamma": gamma, **asdict(params)})


# ---------------------------------------------------------------------------
# three-tank system


@dataclass
class TankParams:
    a13: float = 1.329e-4
    a32: float = 1.329e-4
    a20: float = 1.772e-4
    Sc: float = 0.0154
    k: float = 1.329e-3
    ell: float = 3.0
    x_lower: tuple = (0.44, 0.04, 0.24)
    x_upper: tuple = (0.56, 0.16, 0.36)
    period: float = 200.0
    ref1: tuple = (0.5, 0.07)
    ref2: tuple = (0.1, 0.5)
    r_min: float = 0.75
    r_max: float = 1.25
    true_scale: tuple = (1.0, 1.0, 1.0)
    eps: float = 1e-6

    def vector(self) -> np.ndarray:
        par = np.zeros(K.TANK_NPAR)
        par[K.T_A13], par[K.T_A32], par[K.T_A20] = self.a13, self.a32, self.a20
        par[K.T_SC], par[K.T_K] = self.Sc, self.k
        par[K.T_XM3], par[K.T_XMAX3] = self.x_lower[2], self.x_upper[2]
        par[K.T_PERIOD], par[K.T_EPS] = self.period, self.eps
        par[K.T_R1B], par[K.T_R1A] = self.ref1
        par[K.T_R2B], par[K.T_R2A] = self.ref2
        par[K.T_RM], par[K.T_RMAX] = self.r_min, self.r_max
        par[K.T_TA13] = self.a13 * self.true_scale[0]
        par[K.T_TA32] = self.a32 * self.true_scale[1]
        par[K.T_TA20] = self.a20 * self.true_scale[2]
        return par


def signed_sqrt(x):
    return np.sign(x) * np.sqrt(np.abs(x))


def three_tank_rhs(x, u, theta, a, Sc) -> np.ndarray:
    """Nonlinear level dynamics with ``a = (a13, a32, a20)``."""
    x = np.asarray(x, dtype=float)
    th = np.zeros(3)
    th[:len(theta)] = theta
    out = np.zeros(3)
    K.tank_rhs(x, np.asarray(u, dtype=float), th, a[0], a[1], a[2], Sc, out)
    return out


def three_tank_a(x, a, Sc, eps: float = 1e-6) -> np.ndarray:
    """Factored matrix ``A(x, a)`` with ``rho(s) = lambda(s) s``."""
    out = np.zeros((3, 3))
    K.tank_a_matrix(np.asarray(x, dtype=float), a[0], a[1], a[2], Sc, eps, out)
    return out


def tank_reference(t: float, params: TankParams):
    return np.array(K.tank_reference(t, params.vector()))


def saturate(v: float) -> float:
    return K.saturate(v)


def tank_controller(t: float, y, params: TankParams) -> np.ndarray:
    out = np.zeros(2)
    K.tank_control(t, float(y[0]), float(y[1]), params.vector(), out)
    return out


def _tank_bounds(y, which, par):
    a_lo = np.zeros((3, 3))
    a_hi = np.zeros((3, 3))
    y = np.asarray(y, dtype=float)
    if which == "scenario1":
        K.tank1_bounds(y, par, a_lo, a_hi)
    else:
        K.tank2_bounds(y, par, a_lo, a_hi)
    return a_lo, a_hi


def three_tank_lpv(y, which: str, params: TankParams = None):
    """Output-dependent envelope, ``C``, ``G`` and gains for one configuration."""
    params = params or TankParams()
    if which not in ("scenario1", "scenario2"):
        raise ValueError(f"unknown tank configuration {which!r}")
    y = np.asarray(y, dtype=float)
    xl, xu = np.array(params.x_lower), np.array(params.x_upper)
    p = 2 if which == "scenario1" else 3
    if y.shape != (p,) or np.any(y < xl[:p]) or np.any(y > xu[:p]):
        raise DomainError(f"output {y.tolist()} outside the operating box")
    a_lo, a_hi = _tank_bounds(y, which, params.vector())
    if which == "scenario1":
        C = np.array([[1.0, 0, 0], [0, 1, 0]])
        G = np.array([[1.0, 0], [0, 1], [0, 0]]) / params.Sc
        L = params.ell * np.array([[1.0, 0], [0, 1], [0, 0]])
    else:
        C = np.eye(3)
        G = np.eye(3) / params.Sc
        L = params.ell * np.eye(3)
    return a_lo, a_hi, C, G, L, L.copy()


def _tank(which: str, gamma: float = 1e-4, theta_box: float = 1.5e-4,
          params: TankParams = None, horizon: float = 330.0) -> Scenario:
    params = params or TankParams()
    par = params.vector()
    s1 = which == "scenario1"
    q = 2 if s1 else 3
    a_lo0, a_hi0, C, G, L, _ = three_tank_lpv(
        0.5 * (np.array(params.x_lower) + np.array(params.x_upper))[:(2 if s1 else 3)],
        which, params)
    B = np.array([[1.0, 0], [0, 1], [0, 0]]) / params.Sc
    a_true = np.array([par[K.T_TA13], par[K.T_TA32], par[K.T_TA20]])

    spec = LpvSystemSpec(3, 2, C.shape[0], q, C,
                         lambda t, y: _tank_bounds(y, which, par)[0],
                         lambda t, y: _tank_bounds(y, which, par)[1],
                         constant_map(G), B_lower=B, B_upper=B,
                         theta_lower=np.full(q, -theta_box), theta_upper=np.full(q, theta_box),
                         x_lower=params.x_lower, x_upper=params.x_upper,
                         v_max=np.full(C.shape[0], 4.5e-3),
                         kernel_kind=K.TANK1 if s1 else K.TANK2, kernel_par=par)
    if s1:
        values = [[0, 0], [8e-5, 0], [8e-5, 6e-5]]
        switches = [200.0, 300.0]
    else:
        values = [[0, 0, 0], [8e-5, 0, 0], [8e-5, 6e-5, 9e-5]]
        switches = [200.0, 300.0]
    lo = [spec.theta_lower] * 3
    hi = [spec.theta_upper] * 3
    sched = _phase_schedule(values, lo, hi, switches)
    x0 = 0.5 * (np.array(params.x_lower) + np.array(params.x_upper))

    def rhs(t, x, u, theta):
        return three_tank_rhs(x, u, theta, a_true, params.Sc)

    truth = TruthModel(lambda t, x: three_tank_a(x, a_true, params.Sc, params.eps),
                       lambda t: B, sched, x0,
                       lambda t, y: tank_controller(t, y, params), rhs=rhs)
    Gm = gamma * np.eye(q)
    gains = ObserverGains(L, L.copy(), Gm, Gm.copy())
    claim = PhaseClaim("theorem1", "ii.a", "M<=m", "nonneg")
    xl, xu = np.array(params.x_lower, float), np.array(params.x_upper, float)
    name = "tank1" if s1 else "tank2"
    delays = [0.35, 0.45] if s1 else [0.52, 0.55, 7.61]
    fault_channels = [0, 1] if s1 else [0, 1, 2]
    fault_times = [200.0, 300.0] if s1 else [200.0, 300.0, 300.0]
    return Scenario(name, spec, truth, gains, horizon, 1e-2, _noise_off(C.shape[0]),
                    theta_hat0=(spec.theta_upper.copy(), spec.theta_lower.copy()),
                    zeta0=(xl.copy(), xu.copy()), xi0=(xl.copy(), xu.copy()),
                    phases=[claim] * 3, fault_times=fault_times, transient=20.0,
                    expected={"delays": delays, "fault_channels": fault_channels,
                              "noise": 4.5e-3},
                    params={"gamma": gamma, "theta_box": theta_box, **asdict(params)})


def builtin_scenario(name: str, check: bool = True, **overrides) -> Scenario:
    """Construct a named scenario; keyword overrides go to its builder."""
    builders = {
        "example1": _example1,
        "example2": _example2,
        "crusher": _crusher,
        "tank1": lambda **kw: _tank("scenario1", **kw),
        "tank2": lambda **kw: _tank("scenario2", **kw),
    }
    if name not in builders:
        raise UnknownScenarioError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    sc = builders[name](**overrides)
    if check:
        report = verify_assumption2(sc.spec, sc.gains)
        if not report.passed:
            raise AssumptionError(report)
    return sc
