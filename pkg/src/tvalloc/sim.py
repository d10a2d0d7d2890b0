"""Fixed-step time integration, switching-event logging, settling detection
and trace export.

The default integrator is explicit Euler: the right-hand side carries
signum terms, switching and projection, so higher-order methods buy nothing
across those discontinuities and Euler keeps the chattering behavior
visible. RK4 is available for smooth scenarios only. An optional smoothed
signum sign(v) ~ v/(|v|+delta) trades chattering for bias; it is off by
default and stays off in every acceptance run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _engine
from .dynamics import SimState
from .errors import Diverged, EmptyBox, NonConvexSample
from .expr import evaluate
from .scenario import Algorithm, Scenario

DIVERGENCE_GUARD = 1e12
DEFAULT_DECIMATE = 100
DEFAULT_CONSENSUS_TOL = 1e-3
DEFAULT_KKT_TOL = 1e-2
DEFAULT_WINDOW = 1.0


@dataclass(frozen=True)
class SwitchEvent:
    t: float
    agent: int
    from_mode: int
    to_mode: int


@dataclass(frozen=True)
class TraceRecord:
    """One sampled instant of all observables."""

    t: float
    x: np.ndarray
    lam: np.ndarray
    y: np.ndarray
    e: np.ndarray
    sigma: np.ndarray
    imbalance: float
    consensus_err: float
    x_star: np.ndarray | None = None
    lam_star: float | None = None
    tracking_err: float | None = None


@dataclass
class Trace:
    """Columnar record of the simulation observables (rows = sampled instants).

    Oracle columns (x_star, lam_star, tracking_err, active) are filled only
    when the run was made with verify=True.
    """

    t: np.ndarray
    x: np.ndarray
    lam: np.ndarray
    y: np.ndarray
    e: np.ndarray
    sigma: np.ndarray
    imbalance: np.ndarray
    consensus_err: np.ndarray
    theta_sum: np.ndarray
    theta_p_sum: np.ndarray
    x_star: np.ndarray | None = None
    lam_star: np.ndarray | None = None
    tracking_err: np.ndarray | None = None
    active: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.t)

    @property
    def n(self) -> int:
        return self.x.shape[1]

    def __getitem__(self, k: int) -> TraceRecord:
        return TraceRecord(
            t=float(self.t[k]), x=self.x[k], lam=self.lam[k], y=self.y[k],
            e=self.e[k], sigma=self.sigma[k],
            imbalance=float(self.imbalance[k]),
            consensus_err=float(self.consensus_err[k]),
            x_star=None if self.x_star is None else self.x_star[k],
            lam_star=None if self.lam_star is None else float(self.lam_star[k]),
            tracking_err=None if self.tracking_err is None else float(self.tracking_err[k]),
        )

    def __iter__(self):
        return (self[k] for k in range(len(self.t)))

    def to_csv(self, path) -> None:
        n = self.n
        cols = (["t"]
                + [f"x_{i}" for i in range(n)]
                + [f"lambda_{i}" for i in range(n)]
                + [f"y_{i}" for i in range(n)]
                + [f"e_{i}" for i in range(n)]
                + [f"sigma_{i}" for i in range(n)]
                + ["imbalance", "consensus_err"])
        with_oracle = self.x_star is not None
        if with_oracle:
            cols += [f"x_star_{i}" for i in range(n)] + ["lambda_star", "tracking_err"]
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(cols) + "\n")
            for k in range(len(self.t)):
                row = [repr(float(self.t[k]))]
                row += [repr(float(v)) for v in self.x[k]]
                row += [repr(float(v)) for v in self.lam[k]]
                row += [repr(float(v)) for v in self.y[k]]
                row += [repr(float(v)) for v in self.e[k]]
                row += [str(int(v)) for v in self.sigma[k]]
                row += [repr(float(self.imbalance[k])), repr(float(self.consensus_err[k]))]
                if with_oracle:
                    row += [repr(float(v)) for v in self.x_star[k]]
                    row += [repr(float(self.lam_star[k])), repr(float(self.tracking_err[k]))]
                fh.write(",".join(row) + "\n")


def events_to_csv(events: list[SwitchEvent], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,agent,from,to\n")
        for ev in events:
            fh.write(f"{ev.t!r},{ev.agent},{ev.from_mode},{ev.to_mode}\n")


@dataclass
class SimResult:
    trace: Trace
    events: list[SwitchEvent]
    final_state: SimState
    switch_count: int
    # per-agent feasibility absorption bookkeeping (PROJ_FF, bounded agents):
    # first time the agent was inside its band, and the worst violation seen
    # after that instant (step-resolution).
    feas_entry_t: dict = field(default_factory=dict)
    feas_max_violation: dict = field(default_factory=dict)


def integrate(
    scn: Scenario,
    method: str = "euler",
    dt: float | None = None,
    t_end: float | None = None,
    decimate: int = DEFAULT_DECIMATE,
    smooth_sign: float | None = None,
    verify: bool = False,
) -> SimResult:
    """Advance the scenario's vector field from its initial conditions.

    Deterministic: identical inputs produce bit-identical traces. Raises
    NonConvexSample / EmptyBox with the failing agent and time, and Diverged
    once any state component passes the divergence guard.
    """
    if method not in ("euler", "rk4"):
        raise ValueError(f"unknown method {method!r}")
    dt = scn.dt if dt is None else float(dt)
    t_end = scn.t_end if t_end is None else float(t_end)
    if dt <= 0 or t_end <= dt:
        raise ValueError("need dt > 0 and t_end > dt")
    decimate = max(1, int(decimate))

    nsteps = int(round(t_end / dt))
    n = scn.n
    n_rec = nsteps // decimate + 1 + (1 if nsteps % decimate else 0)

    tab = _engine.build_tables(scn)
    x = scn.x0.copy()
    lam = scn.lambda0.copy()
    th = scn.theta0.copy()
    thp = scn.theta0p.copy()

    rec_t = np.empty(n_rec)
    rec_x = np.empty((n_rec, n))
    rec_lam = np.empty((n_rec, n))
    rec_y = np.empty((n_rec, n))
    rec_e = np.empty((n_rec, n))
    rec_sig = np.empty((n_rec, n), dtype=np.int8)
    rec_imb = np.empty(n_rec)
    rec_cons = np.empty(n_rec)
    rec_thsum = np.empty(n_rec)
    rec_thpsum = np.empty(n_rec)
    ev_cap = _engine.EVENT_CAP
    ev_step = np.empty(ev_cap, dtype=np.int64)
    ev_agent = np.empty(ev_cap, dtype=np.int32)
    ev_from = np.empty(ev_cap, dtype=np.int8)
    ev_to = np.empty(ev_cap, dtype=np.int8)
    feas_entry = np.full(n, -1, dtype=np.int64)
    feas_viol = np.zeros(n)

    status, err_step, err_agent, n_events, n_rec_out = _engine._run(
        tab["code"], tab["consts"], tab["pptr"], tab["has_lo"], tab["has_hi"],
        tab["A"], tab["edges_i"], tab["edges_j"], tab["gains"],
        tab["alg"], 0 if method == "euler" else 1,
        0.0 if smooth_sign is None else float(smooth_sign),
        x, lam, th, thp, 0.0, dt, nsteps, decimate, DIVERGENCE_GUARD,
        rec_t, rec_x, rec_lam, rec_y, rec_e, rec_sig, rec_imb, rec_cons,
        rec_thsum, rec_thpsum,
        ev_step, ev_agent, ev_from, ev_to, feas_entry, feas_viol,
    )
    t_err = err_step * dt
    if status == _engine.STATUS_NONCONVEX:
        raise NonConvexSample(err_agent, t_err)
    if status == _engine.STATUS_EMPTY_BOX:
        raise EmptyBox(f"agent {err_agent}: bounds crossed at t={t_err:.6g}")
    if status == _engine.STATUS_DIVERGED:
        raise Diverged(t_err)

    trace = Trace(
        t=rec_t[:n_rec_out], x=rec_x[:n_rec_out], lam=rec_lam[:n_rec_out],
        y=rec_y[:n_rec_out], e=rec_e[:n_rec_out], sigma=rec_sig[:n_rec_out],
        imbalance=rec_imb[:n_rec_out], consensus_err=rec_cons[:n_rec_out],
        theta_sum=rec_thsum[:n_rec_out], theta_p_sum=rec_thpsum[:n_rec_out],
    )
    stored = min(n_events, ev_cap)
    events = [
        SwitchEvent(t=float(ev_step[k] * dt), agent=int(ev_agent[k]),
                    from_mode=int(ev_from[k]), to_mode=int(ev_to[k]))
        for k in range(stored)
    ]
    result = SimResult(
        trace=trace, events=events,
        final_state=SimState(x, lam, th, thp, nsteps * dt),
        switch_count=int(n_events),
    )
    if scn.algorithm == Algorithm.PROJ_FF:
        for i, a in enumerate(scn.agents):
            if a.bounded:
                result.feas_entry_t[i] = (
                    None if feas_entry[i] < 0 else float(feas_entry[i] * dt))
                result.feas_max_violation[i] = float(feas_viol[i])

    if verify:
        from .oracle import solve_frozen_batch

        x_star, lam_star, active = solve_frozen_batch(scn, trace.t)
        trace.x_star = x_star
        trace.lam_star = lam_star
        trace.active = active
        trace.tracking_err = np.max(np.abs(trace.x - x_star), axis=1)
    return result


# ---------------------------------------------------------------------------
# Settling detection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SettlingReport:
    """Observed settling instants (None = not settled within the trace)."""

    t_rate_obs: float | None
    t_dual_obs: float | None
    t_sol_obs: float | None
    undershoot: float | None

    def as_dict(self) -> dict:
        def enc(v):
            return "not settled" if v is None else v
        return {
            "t_rate_obs": enc(self.t_rate_obs),
            "t_dual_obs": enc(self.t_dual_obs),
            "t_sol_obs": enc(self.t_sol_obs),
            "undershoot": self.undershoot,
        }


def settle_time(ts: np.ndarray, metric: np.ndarray, tol: float,
                window: float) -> float | None:
    """Earliest t whose whole [t, t+window] stays strictly below tol.

    An excursion inside a candidate window disqualifies it, so the result
    lands after the last excursion preceding a clean stretch. None when no
    full window can be certified within the trace."""
    bad = metric >= tol
    n = len(ts)
    # index of the next bad sample at or after k (n when none)
    next_bad = np.full(n + 1, n, dtype=np.int64)
    for k in range(n - 1, -1, -1):
        next_bad[k] = k if bad[k] else next_bad[k + 1]
    t_last = float(ts[-1])
    for k in range(n):
        t_k = float(ts[k])
        if t_last < t_k + window:
            break
        nb = next_bad[k]
        if nb >= n or float(ts[nb]) > t_k + window:
            return t_k
    return None


def detect_settling(
    trace: Trace,
    consensus_tol: float = DEFAULT_CONSENSUS_TOL,
    kkt_tol: float = DEFAULT_KKT_TOL,
    window: float = DEFAULT_WINDOW,
) -> SettlingReport:
    ts = trace.t
    rate_spread = trace.y.max(axis=1) - trace.y.min(axis=1)
    t_rate = settle_time(ts, rate_spread, consensus_tol, window)
    t_dual = settle_time(ts, trace.consensus_err, consensus_tol, window)
    kkt_metric = np.maximum(np.max(np.abs(trace.e), axis=1), np.abs(trace.imbalance))
    t_sol = settle_time(ts, kkt_metric, kkt_tol, window)

    undershoot = None
    if t_sol is not None:
        mask = (ts >= t_sol) & (ts <= t_sol + 2.0)
        if mask.any():
            seg = trace.imbalance[mask]
            undershoot = float(seg[int(np.argmax(np.abs(seg)))])
    return SettlingReport(t_rate, t_dual, t_sol, undershoot)


def bound_slope_max(scn: Scenario, samples: int = 2001) -> float:
    """Largest |d/dt bound| over the horizon across bounded agents (0 when
    no agent declares bounds)."""
    ts = np.linspace(0.0, scn.t_end, samples)
    worst = 0.0
    for a in scn.agents:
        for expr_t in (a.lower_t, a.upper_t):
            if expr_t is not None:
                worst = max(worst, float(np.max(np.abs(evaluate(expr_t, 0.0, ts)))))
    return worst
