"""Run configuration: a small YAML schema layered over the built-in scenarios.

Example file::

    scenario: example2
    horizon: 120          # seconds, must be a whole number of steps
    step: 0.001
    seed: 3
    noise: on             # on/off; "on" alone uses the scenario's reference level
    noise_amplitude: 0.5  # scalar or one value per output; ignored when noise is off
    gamma: [40, 180]      # forwarded to the scenario builder
    builder:              # any other builder keyword, e.g. theta_box for tanks
      theta_box: 1.5e-4
    params:               # fields of CrusherParams / TankParams
      Sc: 0.0154
    overrides:            # replace scenario fields after building
      L_lower: [[...]]
      Gamma_lower: [[...]]
      theta_hat0: [[...], [...]]
      transient: 25
    out: runs/example2
    plots: true
    checks: [theorem, pe]
    force: false
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .scenarios import (SCENARIOS, CrusherParams, Scenario, TankParams, UnknownScenarioError,
                        builtin_scenario)

CHECKS = ("assumption2", "theorem", "pe", "containment", "z")
DEFAULT_CHECKS = ("assumption2", "theorem", "pe")
GAIN_KEYS = ("L_lower", "L_upper", "Gamma_lower", "Gamma_upper")
SCENARIO_KEYS = ("theta_hat0", "zeta0", "xi0", "transient", "period", "pe_window", "ideal")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    scenario: str = "example1"
    horizon: Optional[float] = None
    step: Optional[float] = None
    seed: int = 0
    noise: Optional[bool] = None
    noise_amplitude: Optional[object] = None
    gamma: Optional[object] = None
    builder: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    overrides: dict = field(default_factory=dict)
    out: str = "runs"
    plots: bool = False
    checks: tuple = DEFAULT_CHECKS
    containment_min: float = 0.95
    force: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.scenario not in SCENARIOS:
            raise UnknownScenarioError(
                f"unknown scenario {self.scenario!r}; choose from {', '.join(SCENARIOS)}")
        if self.step is not None and not self.step > 0:
            raise ConfigError("step must be > 0")
        if self.horizon is not None and not self.horizon >= 0:
            raise ConfigError("horizon must be >= 0")
        bad = set(self.checks) - set(CHECKS)
        if bad:
            raise ConfigError(f"unknown checks {sorted(bad)}; known: {', '.join(CHECKS)}")
        bad = set(self.overrides) - set(GAIN_KEYS) - set(SCENARIO_KEYS)
        if bad:
            raise ConfigError(f"unknown override keys {sorted(bad)}")
        self.checks = tuple(self.checks)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        data = dict(data or {})
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        if data.get("noise") is not None:
            data["noise"] = _on_off(data["noise"])
        return cls(**data)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
        if data is not None and not isinstance(data, dict):
            raise ConfigError("config root must be a mapping")
        return cls.from_dict(data or {})

    def merged(self, **kw) -> "RunConfig":
        """Copy with the non-``None`` keyword values applied (CLI flags)."""
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def _on_off(value) -> bool:
    # YAML 1.1 already maps on/off to booleans; strings come from the CLI
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("on", "true", "yes", "1"):
        return True
    if text in ("off", "false", "no", "0"):
        return False
    raise ConfigError(f"noise must be on or off, got {value!r}")


def _params_object(name: str, params: dict):
    if not params:
        return None
    cls = CrusherParams if name == "crusher" else TankParams if name.startswith("tank") else None
    if cls is None:
        raise ConfigError(f"scenario {name} takes no params block")
    known = {f.name for f in fields(cls)}
    bad = set(params) - known
    if bad:
        raise ConfigError(f"unknown {cls.__name__} fields {sorted(bad)}")
    conv = {k: tuple(v) if isinstance(v, list) else v for k, v in params.items()}
    return cls(**conv)


def build_scenario(cfg: RunConfig) -> Scenario:
    """Scenario for ``cfg`` without running the assumption check."""
    kw = dict(cfg.builder)
    if cfg.gamma is not None:
        kw["gamma"] = tuple(cfg.gamma) if isinstance(cfg.gamma, list) else cfg.gamma
    p = _params_object(cfg.scenario, cfg.params)
    if p is not None:
        kw["params"] = p
    try:
        sc = builtin_scenario(cfg.scenario, check=False, **kw)
    except TypeError as exc:
        raise ConfigError(f"bad builder options for {cfg.scenario}: {exc}") from exc

    changes = {}
    if cfg.horizon is not None:
        changes["horizon"] = float(cfg.horizon)
    if cfg.step is not None:
        changes["step"] = float(cfg.step)
    if cfg.noise is False:
        changes["noise_amplitude"] = np.zeros(sc.spec.p)
    elif cfg.noise_amplitude is not None:
        changes["noise_amplitude"] = np.broadcast_to(
            np.asarray(cfg.noise_amplitude, float), (sc.spec.p,)).copy()
    elif cfg.noise:
        level = sc.expected.get("noise")
        if level is None:
            raise ConfigError(f"{cfg.scenario} has no reference noise level; set noise_amplitude")
        changes["noise_amplitude"] = np.full(sc.spec.p, float(level))
    gains = {k: np.asarray(v, float) for k, v in cfg.overrides.items() if k in GAIN_KEYS}
    if gains:
        try:
            changes["gains"] = replace(sc.gains, **gains)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    for key in SCENARIO_KEYS:
        if key in cfg.overrides:
            val = cfg.overrides[key]
            if key in ("theta_hat0", "zeta0", "xi0"):
                val = tuple(np.asarray(v, float) for v in val)
            changes[key] = val
    if changes:
        sc = sc.with_options(**changes)
    if sc.step <= 0 or sc.horizon < 0:
        raise ConfigError("step must be > 0 and horizon >= 0")
    n = round(sc.horizon / sc.step)
    if abs(n * sc.step - sc.horizon) > 1e-9 * max(1.0, sc.horizon):
        raise ConfigError("horizon must be a whole number of steps")
    return sc
