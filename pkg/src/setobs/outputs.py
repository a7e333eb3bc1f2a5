"""CSV trace, JSON report and static plots for a finished run."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FLOAT_FMT = "%.16e"


def trace_columns(n: int, p: int, q: int) -> list:
    """Documented column order of ``trace.csv``."""
    idx = lambda name, k: [f"{name}_{i + 1}" for i in range(k)]
    cols = ["t"] + idx("x", n) + idx("y", p) + idx("y_v", p)
    for name, k in (("zeta_m", n), ("zeta_M", n), ("xi_m", n), ("xi_M", n),
                    ("theta_hat_m", q), ("theta_hat_M", q),
                    ("theta_bar_inf_m", q), ("theta_bar_inf_M", q)):
        cols += idx(name, k)
    cols += ["pe_m", "pe_M", "branch"] + idx("s", p) + idx("d", q) + idx("z", p) + ["S", "D", "Z"]
    return cols


def _numeric_blocks(res):
    spec = res.scenario.spec
    k = len(res.t)
    tr = res.traces
    nan = np.full((k, spec.q), np.nan)
    ind = res.indicators
    floats = np.column_stack([res.t, res.x, res.y, res.y_v, res.block("zeta_m"), res.block("zeta_M"),
                              res.block("xi_m"), res.block("xi_M"), res.block("theta_m"),
                              res.block("theta_M"), tr.get("theta_bar_m", nan),
                              tr.get("theta_bar_M", nan)]) if k else np.zeros((0, 0))
    flags_pe = np.column_stack([tr.get("pe_m", np.zeros(k, bool)),
                                tr.get("pe_M", np.zeros(k, bool))]).astype(int)
    branch = tr.get("branch", np.full(k, "none", dtype=object))
    flags_ind = np.column_stack([ind.s, ind.d, ind.z, ind.S, ind.D, ind.Z]).astype(int) \
        if k else np.zeros((0, 0), int)
    return floats, flags_pe, branch, flags_ind


def write_trace(res, path) -> Path:
    """Write ``trace.csv``; one row per grid sample, 17 significant digits."""
    spec = res.scenario.spec
    cols = trace_columns(spec.n, spec.p, spec.q)
    path = Path(path)
    floats, pe, branch, ind = _numeric_blocks(res)
    nf = floats.shape[1] if floats.size else 0
    row_fmt = ",".join([FLOAT_FMT] * nf + ["%d", "%d", "%s"] + ["%d"] * ind.shape[1]) + "\n" \
        if len(res.t) else ""
    with path.open("w", newline="") as fh:
        fh.write(",".join(cols) + "\n")
        chunk = 20000
        for a in range(0, len(res.t), chunk):
            b = min(a + chunk, len(res.t))
            rows = [tuple(f) + (p0, p1, br) + tuple(i) for f, (p0, p1), br, i in
                    zip(floats[a:b].tolist(), pe[a:b].tolist(), branch[a:b], ind[a:b].tolist())]
            fh.write("".join(row_fmt % r for r in rows))
    return path


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, float) and not np.isfinite(v):
        return None
    return v


def write_report(report: dict, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")
    return path


def _thin(k: int, limit: int = 4000) -> slice:
    return slice(None, None, max(1, k // limit))


def write_plots(res, out_dir) -> list:
    """Static line plots: parameter intervals, condition estimates, state envelopes, indicators."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    spec = res.scenario.spec
    if len(res.t) == 0:
        return []
    sl = _thin(len(res.t))
    t = res.t[sl]
    files = []

    def save(fig, name):
        fig.tight_layout()
        f = out_dir / name
        fig.savefig(f, dpi=110)
        plt.close(fig)
        files.append(f)

    fig, axes = plt.subplots(spec.q, 1, figsize=(8, 2.4 * spec.q), sharex=True, squeeze=False)
    for j, ax in enumerate(axes[:, 0]):
        ax.plot(t, res.theta[sl, j], "k", lw=1.2, label="theta")
        ax.plot(t, res.block("theta_m")[sl, j], lw=0.9, label="theta_hat_m")
        ax.plot(t, res.block("theta_M")[sl, j], lw=0.9, label="theta_hat_M")
        if res.ideal:
            ax.plot(t, res.block("theta")[sl, j], ":", lw=0.9, label="ideal")
        ax.set_ylabel(f"theta_{j + 1}")
    axes[0, 0].legend(loc="upper right", fontsize=7)
    axes[-1, 0].set_xlabel("t [s]")
    save(fig, "theta_intervals.png")

    if "theta_bar_m" in res.traces:
        fig, axes = plt.subplots(spec.q, 1, figsize=(8, 2.4 * spec.q), sharex=True, squeeze=False)
        sched = res.scenario.truth.theta_schedule
        box_lo = np.array([sched.lower[k] for k in res.phase[sl]])
        box_hi = np.array([sched.upper[k] for k in res.phase[sl]])
        for j, ax in enumerate(axes[:, 0]):
            ax.plot(t, res.traces["theta_bar_m"][sl, j], lw=0.9, label="R_m^-1 b_m")
            ax.plot(t, res.traces["theta_bar_M"][sl, j], lw=0.9, label="R_M^-1 b_M")
            ax.plot(t, box_lo[:, j], "k--", lw=0.8, label="box")
            ax.plot(t, box_hi[:, j], "k--", lw=0.8)
            ax.set_ylabel(f"component {j + 1}")
        axes[0, 0].legend(loc="upper right", fontsize=7)
        axes[-1, 0].set_xlabel("t [s]")
        save(fig, "theta_bar_inf.png")

    fig, axes = plt.subplots(spec.n, 1, figsize=(8, 2.0 * spec.n), sharex=True, squeeze=False)
    for i, ax in enumerate(axes[:, 0]):
        ax.plot(t, res.x[sl, i], "k", lw=1.2, label="x")
        ax.plot(t, res.block("xi_m")[sl, i], lw=0.9, label="xi_m")
        ax.plot(t, res.block("xi_M")[sl, i], lw=0.9, label="xi_M")
        ax.set_ylabel(f"x_{i + 1}")
    axes[0, 0].legend(loc="upper right", fontsize=7)
    axes[-1, 0].set_xlabel("t [s]")
    save(fig, "state_envelopes.png")

    ind = res.indicators
    fig, axes = plt.subplots(3, 1, figsize=(8, 6), sharex=True)
    for ax, fam, name in zip(axes, (ind.s, ind.d, ind.z), ("s", "d", "z")):
        for j in range(fam.shape[1]):
            ax.step(t, fam[sl, j] * (1 - 0.1 * j), where="post", lw=0.9, label=f"{name}_{j + 1}")
        ax.set_ylim(-0.1, 1.2)
        ax.set_ylabel(name)
        ax.legend(loc="upper left", fontsize=7)
    axes[-1].set_xlabel("t [s]")
    save(fig, "indicators.png")
    return files
