"""Command line entry point: ``setobs run | verify | batch``.

Exit codes: 0 when every enabled check passed, 2 when a check failed,
1 on an execution error (bad config, unknown scenario, divergence, I/O).
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .config import ConfigError, RunConfig, build_scenario
from .faults import channel_delays
from .monotone import Assumption2Report, verify_assumption2
from .numerics import DivergenceError
from .outputs import write_plots, write_report, write_trace
from .scenarios import AssumptionError, UnknownScenarioError
from .simulation import SimulationResult, simulate

log = logging.getLogger("setobs")

EXIT_OK, EXIT_ERROR, EXIT_FAILED = 0, 1, 2


@dataclass
class RunReport:
    scenario: str
    seed: int
    condition: dict
    containment: dict
    detection_delays: dict
    channel_delays: list
    false_alarms: dict
    wall_time: float
    assumption2: dict
    checks: dict = field(default_factory=dict)

    @property
    def valid(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["valid"] = self.valid
        return d


def _containment(res: SimulationResult) -> dict:
    phases = res.report.phases if res.report else []
    per = [{"phase": p.index, "theta": p.theta_containment, "state": p.state_containment}
           for p in phases]
    return {"per_phase": per,
            "theta_min": min((p.theta_containment for p in phases), default=float("nan")),
            "state_min": min((p.state_containment for p in phases), default=float("nan"))}


def evaluate_checks(res: SimulationResult, a2: Assumption2Report, cfg: RunConfig) -> dict:
    """Pass/fail per enabled check."""
    phases = res.report.phases if res.report else []
    out = {}
    for name in cfg.checks:
        if name == "assumption2":
            out[name] = a2.passed
        elif name == "theorem":
            out[name] = all(p.ordering is not None and p.ordering == p.claim.ordering for p in phases)
        elif name == "pe":
            out[name] = all(p.pe_ok_m and p.pe_ok_M for p in phases)
        elif name == "containment":
            out[name] = all(p.theta_containment >= cfg.containment_min for p in phases)
        elif name == "z":
            sel = res.t >= res.scenario.transient
            out[name] = not np.any(res.indicators.Z[sel])
    return out


def build_run_report(res: SimulationResult, a2: Assumption2Report, cfg: RunConfig) -> RunReport:
    sc = res.scenario
    ind = res.indicators
    chans = sc.expected.get("fault_channels")
    faults = ind.fault_times
    cd = channel_delays(ind, faults, chans) if chans else []
    return RunReport(sc.name, res.seed, res.report.to_dict(), _containment(res),
                     ind.detection_times, cd, ind.false_alarms(sc.transient),
                     res.wall_time, a2.to_dict(), evaluate_checks(res, a2, cfg))


def run(cfg: RunConfig, write: bool = True):
    """Full procedure for one config; returns ``(report, result)``.

    Raises :class:`AssumptionError` when the cooperativity/stability check
    fails and ``cfg.force`` is not set.
    """
    sc = build_scenario(cfg)
    a2 = verify_assumption2(sc.spec, sc.gains)
    if not a2.passed and not cfg.force and "assumption2" in cfg.checks:
        raise AssumptionError(a2)
    res = simulate(sc, seed=cfg.seed)
    report = build_run_report(res, a2, cfg)
    if write:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        write_trace(res, out / "trace.csv")
        write_report(report.to_dict(), out / "report.json")
        if cfg.plots:
            write_plots(res, out)
    return report, res


def _summary_lines(report: RunReport):
    yield f"scenario {report.scenario} seed {report.seed}"
    for p in report.condition["phases"]:
        yield (f"  phase {p['index']} [{p['t_start']:g}, {p['t_end']:g}] "
               f"branch {p['theorem1_branch']} ordering {p['ordering']} "
               f"periodic {p['theorem2_periodic_ok']} pe {p['pe_ok_m']}/{p['pe_ok_M']} "
               f"theta-containment {p['theta_containment']:.4f} valid {p['valid']}")
    if report.detection_delays:
        yield f"  delays {report.detection_delays}"
    if report.channel_delays:
        yield f"  per-channel delays {report.channel_delays}"
    yield f"  false alarms {report.false_alarms}"
    for k, v in report.checks.items():
        yield f"  check {k}: {'pass' if v else 'FAIL'}"
    yield f"  wall time {report.wall_time:.2f} s"


def _config_from_args(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else None
    flags = dict(scenario=args.scenario, seed=getattr(args, "seed", None),
                 step=getattr(args, "step", None), horizon=getattr(args, "horizon", None),
                 out=getattr(args, "out", None))
    if getattr(args, "noise", None) is not None:
        flags["noise"] = args.noise == "on"
    if getattr(args, "plots", False):
        flags["plots"] = True
    if getattr(args, "force", False):
        flags["force"] = True
    if cfg is None:
        if args.scenario is None:
            raise ConfigError("give --scenario or --config")
        flags.setdefault("out", None)
        if flags["out"] is None:
            flags["out"] = str(Path("runs") / args.scenario)
        return RunConfig(**{k: v for k, v in flags.items() if v is not None})
    cfg = cfg.merged(**flags)
    cfg.validate()
    return cfg


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    report, _ = run(cfg)
    for line in _summary_lines(report):
        print(line)
    print(f"outputs in {cfg.out}")
    return EXIT_OK if report.valid else EXIT_FAILED


def cmd_verify(args) -> int:
    cfg = _config_from_args(args)
    sc = build_scenario(cfg)
    rep = verify_assumption2(sc.spec, sc.gains)
    for line in rep.lines():
        print(line)
    sched = sc.truth.theta_schedule
    print(f"adaptation loop: {'competitive' if np.all(sc.spec.C >= 0) else 'cooperative'}")
    for k, claim in enumerate(sc.phases[:len(sched.values)]):
        print(f"phase {k}: box {sched.lower[k].tolist()} .. {sched.upper[k].tolist()}, "
              f"claim {claim.theorem} {claim.branch} ({claim.ordering}), sign case {claim.sign_case}")
    if args.json:
        write_report(rep.to_dict(), args.json)
    return EXIT_OK if rep.passed else EXIT_FAILED


def _batch_one(path: str, out_root: str):
    try:
        cfg = RunConfig.load(path)
        cfg = cfg.merged(out=str(Path(out_root) / Path(path).stem))
        report, _ = run(cfg)
        return path, (EXIT_OK if report.valid else EXIT_FAILED), ""
    except AssumptionError as exc:
        return path, EXIT_FAILED, str(exc)
    except Exception as exc:  # reported per config, the batch carries on
        return path, EXIT_ERROR, f"{type(exc).__name__}: {exc}"


def cmd_batch(args) -> int:
    paths = sorted(str(p) for p in Path(args.configs).iterdir()
                   if p.suffix in (".yaml", ".yml")) if Path(args.configs).is_dir() else []
    if not paths:
        raise ConfigError(f"no .yaml configs found in {args.configs}")
    workers = max(1, args.jobs)
    if workers == 1:
        results = [_batch_one(p, args.out) for p in paths]
    else:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_batch_one, paths, [args.out] * len(paths)))
    worst = EXIT_OK
    for path, code, msg in results:
        status = {EXIT_OK: "valid", EXIT_FAILED: "checks failed", EXIT_ERROR: "error"}[code]
        print(f"{path}: {status}{' - ' + msg if msg else ''}")
        if code == EXIT_ERROR or (code == EXIT_FAILED and worst == EXIT_OK):
            worst = code
    return worst


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="setobs", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate a scenario and write trace, report and plots")
    r.add_argument("--scenario")
    r.add_argument("--config")
    r.add_argument("--seed", type=int)
    r.add_argument("--noise", choices=("on", "off"))
    r.add_argument("--step", type=float)
    r.add_argument("--horizon", type=float)
    r.add_argument("--out")
    r.add_argument("--plots", action="store_true")
    r.add_argument("--force", action="store_true", help="run even if the assumption check fails")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="check gains and bounds without simulating")
    v.add_argument("--scenario")
    v.add_argument("--config")
    v.add_argument("--json", help="also write the report to this file")
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("batch", help="run every .yaml config in a directory")
    b.add_argument("--configs", required=True)
    b.add_argument("--out", default="runs")
    b.add_argument("--jobs", type=int, default=1)
    b.set_defaults(func=cmd_batch)
    return ap


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except AssumptionError as exc:
        print(f"assumption check failed: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except (ConfigError, UnknownScenarioError, DivergenceError, OSError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
