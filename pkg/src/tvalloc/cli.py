"""Command-line entry point.

Subcommands:
    simulate   run a scenario, write trace/events/summary and SVG plots
    verify     run with the oracle enabled and check the tracking guarantees
    bounds     print the analytic settling-time bounds as JSON
    sweep      re-run a scenario over a list of parameter values

Exit codes: 0 success (for verify: all checks passed), 2 configuration
errors, 3 runtime failures (divergence / infeasibility). Default output
directory comes from $TVRA_OUT when set.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .dynamics import gain_monitor, settling_bounds
from .errors import (
    Diverged,
    DisconnectedGraph,
    EmptyBox,
    Infeasible,
    InvariantViolation,
    NonConvexSample,
    SchemaError,
    UnknownScenario,
)
from .scenario import Algorithm, Scenario, builtin_scenario, load_scenario
from .sim import (
    DEFAULT_CONSENSUS_TOL,
    DEFAULT_KKT_TOL,
    SimResult,
    bound_slope_max,
    detect_settling,
    events_to_csv,
    integrate,
)
from .svgplot import render_lines

_BUILTINS = ("case1", "case2", "case3")
DEFAULT_TRACK_TOL = 2e-2
DEAD_ZONE_RECORDS = 5

_CONFIG_ERRORS = (
    UnknownScenario, SchemaError, InvariantViolation, DisconnectedGraph,
    OSError, ValueError,
)
_RUNTIME_ERRORS = (Diverged, Infeasible, NonConvexSample, EmptyBox)


def _load(name: str) -> Scenario:
    if name.lower() in _BUILTINS:
        return builtin_scenario(name)
    return load_scenario(name)


def _apply_overrides(scn: Scenario, args) -> Scenario:
    changes = {}
    if getattr(args, "algorithm", None):
        changes["algorithm"] = Algorithm.FF if args.algorithm == "ff" else Algorithm.PROJ_FF
    if getattr(args, "dt", None) is not None:
        changes["dt"] = args.dt
    if getattr(args, "t_end", None) is not None:
        changes["t_end"] = args.t_end
    return dataclasses.replace(scn, **changes) if changes else scn


def _out_dir(args) -> str:
    out = args.out or os.environ.get("TVRA_OUT") or "tvalloc-out"
    os.makedirs(out, exist_ok=True)
    return out


def _dead_zone_mask(ts: np.ndarray, event_times, spacing: float) -> np.ndarray:
    """True where a record is within +-DEAD_ZONE_RECORDS samples of an event."""
    mask = np.zeros(len(ts), dtype=bool)
    half = DEAD_ZONE_RECORDS * spacing
    for te in event_times:
        mask |= np.abs(ts - te) <= half
    return mask


def _tracking_after_settle(result: SimResult, t_sol) -> float | None:
    trace = result.trace
    if t_sol is None or trace.tracking_err is None:
        return None
    spacing = float(trace.t[1] - trace.t[0]) if len(trace.t) > 1 else 0.0
    dead = _dead_zone_mask(trace.t, [e.t for e in result.events], spacing)
    sel = (trace.t >= t_sol) & ~dead
    if not sel.any():
        return None
    return float(np.max(trace.tracking_err[sel]))


def _write_plots(result: SimResult, out: str) -> dict:
    trace = result.trace
    n = trace.n
    ts = trace.t
    agent_labels = [f"agent {i}" for i in range(n)]
    plots = {
        "x.svg": render_lines(ts, [trace.x[:, i] for i in range(n)],
                              agent_labels, "Allocations x_i(t)", "x"),
        "lambda.svg": render_lines(ts, [trace.lam[:, i] for i in range(n)],
                                   agent_labels, "Dual estimates", "lambda"),
        "e.svg": render_lines(ts, [trace.e[:, i] for i in range(n)],
                              agent_labels, "Stationarity error e_i(t)", "e"),
        "imbalance.svg": render_lines(ts, [trace.imbalance], ["imbalance"],
                                      "Balance residual sum(A_i x_i - b_i)", "imbalance"),
        "sigma.svg": render_lines(ts, [trace.sigma[:, i] for i in range(n)],
                                  agent_labels, "Switching signal", "sigma"),
    }
    paths = {}
    for fname, svg in plots.items():
        path = os.path.join(out, fname)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(svg)
        paths[fname.split(".")[0]] = path
    return paths


def cmd_simulate(args) -> int:
    scn = _apply_overrides(_load(args.scenario), args)
    out = _out_dir(args)
    result = integrate(scn, dt=args.dt, t_end=args.t_end,
                       decimate=args.decimate, smooth_sign=args.smooth_sign,
                       verify=True)
    trace = result.trace
    bounds = settling_bounds(scn)
    settling = detect_settling(trace)
    report = gain_monitor(trace, scn)

    trace_path = os.path.join(out, "trace.csv")
    events_path = os.path.join(out, "events.csv")
    trace.to_csv(trace_path)
    events_to_csv(result.events, events_path)
    plot_paths = _write_plots(result, out)

    summary = {
        "schema": 1,
        "scenario": args.scenario,
        "algorithm": scn.algorithm.value,
        "bounds": bounds.as_dict(),
        "settling": settling.as_dict(),
        "switch_count": result.switch_count,
        "gain_report": report.as_dict(),
        "max_tracking_err_after_settle": _tracking_after_settle(
            result, settling.t_sol_obs),
        "outputs": {"trace": trace_path, "events": events_path, **plot_paths},
    }
    summary_path = os.path.join(out, "summary.json")
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    print(f"wrote {summary_path}")
    return 0


def cmd_verify(args) -> int:
    scn = _apply_overrides(_load(args.scenario), args)
    result = integrate(scn, dt=args.dt, verify=True)
    trace = result.trace
    bounds = settling_bounds(scn)
    settling = detect_settling(trace, consensus_tol=args.tol_consensus,
                               kkt_tol=args.tol_kkt)

    checks: list[tuple[str, str, bool]] = []

    def add(tag: str, desc: str, ok: bool):
        checks.append((tag, desc, ok))

    add("a", f"dual consensus settles within bound "
             f"({_fmt(settling.t_dual_obs)} <= {bounds.t_dual_max:.4g})",
        settling.t_dual_obs is not None and settling.t_dual_obs <= bounds.t_dual_max)
    add("b", f"rate estimates settle within bound "
             f"({_fmt(settling.t_rate_obs)} <= {bounds.t_rate_max:.4g})",
        settling.t_rate_obs is not None and settling.t_rate_obs <= bounds.t_rate_max)
    add("c", f"solution settles within bound "
             f"({_fmt(settling.t_sol_obs)} <= {bounds.t_sol_max:.4g})",
        settling.t_sol_obs is not None and settling.t_sol_obs <= bounds.t_sol_max)

    track = _tracking_after_settle(result, settling.t_sol_obs)
    add("d", f"tracking error after settling < {args.tol_track:g} "
             f"(observed {_fmt(track)})",
        track is not None and track < args.tol_track)

    if scn.algorithm == Algorithm.PROJ_FF:
        allowed = max(scn.dt * bound_slope_max(scn), 1e-6)
        ok = bool(result.feas_entry_t) or not any(a.bounded for a in scn.agents)
        worst = 0.0
        for i in result.feas_entry_t:
            if result.feas_entry_t[i] is None:
                ok = False
            else:
                worst = max(worst, result.feas_max_violation[i])
        ok = ok and worst < allowed
        add("e", f"feasibility absorbed (max violation {worst:.3g} < {allowed:.3g})", ok)

    failures = 0
    for tag, desc, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'} ({tag}) {desc}")
        failures += 0 if ok else 1
    return 0 if failures == 0 else 1


def _fmt(v) -> str:
    return "not settled" if v is None else f"{v:.4g}"


def cmd_bounds(args) -> int:
    scn = _load(args.scenario)
    print(json.dumps(settling_bounds(scn).as_dict(), indent=2))
    return 0


_GAIN_FIELDS = ("gamma_sens", "gamma_drift", "gamma_dual", "gamma_stat",
                "kappa_x", "kappa_dual", "epsilon")


def _set_param(scn: Scenario, name: str, value: float) -> Scenario:
    if name == "dt":
        return dataclasses.replace(scn, dt=value)
    if name == "t_end":
        return dataclasses.replace(scn, t_end=value)
    if name.startswith("gains."):
        parts = name.split(".")
        fieldname = parts[1]
        if fieldname not in _GAIN_FIELDS:
            raise InvariantViolation(f"unknown gain field {fieldname!r}")
        if fieldname.startswith("gamma"):
            idx = int(parts[2]) if len(parts) > 2 else None
            triple = list(getattr(scn.gains, fieldname))
            if idx is None:
                triple = [value, value, value]
            else:
                triple[idx] = value
            gains = dataclasses.replace(scn.gains, **{fieldname: tuple(triple)})
        else:
            gains = dataclasses.replace(scn.gains, **{fieldname: value})
        return dataclasses.replace(scn, gains=gains)
    raise InvariantViolation(f"unknown sweep parameter {name!r}")


def cmd_sweep(args) -> int:
    base = _load(args.scenario)
    values = [float(v) for v in args.values.split(",") if v.strip()]
    if not values:
        raise InvariantViolation("no sweep values given")
    out = _out_dir(args)
    rows = []
    for v in values:
        scn = _set_param(base, args.param, v)
        result = integrate(scn, verify=True)
        settling = detect_settling(result.trace)
        track = _tracking_after_settle(result, settling.t_sol_obs)
        rows.append((v, settling.t_sol_obs, track, result.switch_count))
    path = os.path.join(out, "sweep.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("value,t_sol_obs,max_tracking_err,switch_count\n")
        for v, tsol, track, count in rows:
            fh.write(f"{v!r},{'' if tsol is None else repr(tsol)},"
                     f"{'' if track is None else repr(track)},{count}\n")
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tvalloc",
        description="Distributed time-varying resource allocation simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_scenario(p):
        p.add_argument("scenario", help="case1|case2|case3 or a scenario JSON path")

    p_sim = sub.add_parser("simulate", help="run and export trace/plots/summary")
    add_scenario(p_sim)
    p_sim.add_argument("--algorithm", choices=("ff", "proj-ff"))
    p_sim.add_argument("--dt", type=float)
    p_sim.add_argument("--t-end", type=float, dest="t_end")
    p_sim.add_argument("--decimate", type=int, default=100)
    p_sim.add_argument("--smooth-sign", type=float, dest="smooth_sign")
    p_sim.add_argument("--out")
    p_sim.set_defaults(func=cmd_simulate)

    p_ver = sub.add_parser("verify", help="check settling/tracking guarantees")
    add_scenario(p_ver)
    p_ver.add_argument("--dt", type=float)
    p_ver.add_argument("--tol-consensus", type=float, default=DEFAULT_CONSENSUS_TOL,
                       dest="tol_consensus")
    p_ver.add_argument("--tol-kkt", type=float, default=DEFAULT_KKT_TOL,
                       dest="tol_kkt")
    p_ver.add_argument("--tol-track", type=float, default=DEFAULT_TRACK_TOL,
                       dest="tol_track")
    p_ver.set_defaults(func=cmd_verify)

    p_bnd = sub.add_parser("bounds", help="print analytic settling bounds")
    add_scenario(p_bnd)
    p_bnd.set_defaults(func=cmd_bounds)

    p_swp = sub.add_parser("sweep", help="re-run over a list of parameter values")
    add_scenario(p_swp)
    p_swp.add_argument("--param", required=True,
                       help="dt | t_end | gains.<field>[.<index>]")
    p_swp.add_argument("--values", required=True, help="comma-separated values")
    p_swp.add_argument("--metric", choices=("tsol", "track", "switches"),
                       help="kept for compatibility; all metrics are emitted")
    p_swp.add_argument("--out")
    p_swp.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _RUNTIME_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
