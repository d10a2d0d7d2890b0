"""Problem instances: per-agent costs/activities/bounds as symbolic
expressions, the communication graph, control gains, horizon and initial
state. Scenarios are immutable after construction and fully validated.

File format (JSON):

    {
      "name": "...",                          # optional
      "agents": [{"A": 1.0, "cost": "...", "activity": "...",
                  "lower": "...", "upper": "..."}, ...],   # bounds optional
      "edges": [[i, j], ...],                 # 0-based agent ids
      "gains": {"p": 2, "q": 3,
                "gamma_sens": [g1, g2, g3],   # averaging of curvature weights
                "gamma_drift": [g1, g2, g3],  # averaging of drift terms
                "gamma_dual": [g1, g2, g3],   # dual-variable consensus
                "gamma_stat": [g1, g2, g3],   # stationarity feedback
                "kappa_x": k, "kappa_dual": k, "epsilon": e},
      "t_end": 60.0, "dt": 1e-4,
      "x0": [...], "lambda0": [...],          # optional, default zeros
      "theta0": [...], "theta0p": [...],      # optional, default zeros
      "algorithm": "FF" | "PROJ_FF",
      "seed": 0                               # optional
    }

Expressions use the grammar from tvalloc.expr. Numbers must be finite.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvariantViolation, SchemaError, UnknownScenario
from .expr import Expr, differentiate, evaluate, parse_expr, to_text
from .graph import CommGraph, ring


class Algorithm(str, enum.Enum):
    FF = "FF"
    PROJ_FF = "PROJ_FF"


@dataclass(eq=True)
class AgentSpec:
    """One agent: allocation coefficient, cost f(x,t), activity b(t), bounds."""

    A: float
    cost: Expr
    activity: Expr
    lower: Expr | None = None
    upper: Expr | None = None

    @cached_property
    def cost_x(self) -> Expr:
        return differentiate(self.cost, "x")

    @cached_property
    def cost_xx(self) -> Expr:
        return differentiate(self.cost_x, "x")

    @cached_property
    def cost_xt(self) -> Expr:
        return differentiate(self.cost_x, "t")

    @cached_property
    def activity_t(self) -> Expr:
        return differentiate(self.activity, "t")

    @cached_property
    def lower_t(self) -> Expr | None:
        return None if self.lower is None else differentiate(self.lower, "t")

    @cached_property
    def upper_t(self) -> Expr | None:
        return None if self.upper is None else differentiate(self.upper, "t")

    @property
    def bounded(self) -> bool:
        return self.lower is not None or self.upper is not None


@dataclass(frozen=True)
class Gains:
    """Control gains. The triples are (low-power, high-power, signum) weights
    of the fixed-time consensus operator for each estimated quantity."""

    p: int
    q: int
    gamma_sens: tuple[float, float, float]
    gamma_drift: tuple[float, float, float]
    gamma_dual: tuple[float, float, float]
    gamma_stat: tuple[float, float, float]
    kappa_x: float
    kappa_dual: float
    epsilon: float

    def __post_init__(self):
        if self.p <= 0 or self.p % 2 != 0:
            raise InvariantViolation("p must be a positive even integer")
        if self.q % 2 != 1:
            raise InvariantViolation("q must be odd")
        if self.p >= self.q:
            raise InvariantViolation("p must be < q")
        for name in ("gamma_sens", "gamma_drift", "gamma_dual", "gamma_stat"):
            if any(g <= 0 for g in getattr(self, name)):
                raise InvariantViolation(f"{name} entries must be positive")
        if self.kappa_x <= 0 or self.kappa_dual <= 0 or self.epsilon <= 0:
            raise InvariantViolation("kappa_x, kappa_dual, epsilon must be positive")

    @property
    def p_over_q(self) -> float:
        return self.p / self.q


DEMO_GAINS = Gains(
    p=2, q=3,
    gamma_sens=(10.0, 10.0, 1.0),
    gamma_drift=(10.0, 10.0, 1.0),
    gamma_dual=(10.0, 10.0, 100.0),
    gamma_stat=(1.0, 1.0, 10.0),
    kappa_x=1.0, kappa_dual=5.0, epsilon=0.1,
)


@dataclass(eq=False)
class Scenario:
    agents: list[AgentSpec]
    graph: CommGraph
    gains: Gains
    t_end: float
    dt: float
    x0: np.ndarray
    lambda0: np.ndarray
    theta0: np.ndarray
    theta0p: np.ndarray
    algorithm: Algorithm
    seed: int = 0
    name: str = "custom"

    def __post_init__(self):
        n = self.graph.n
        if len(self.agents) != n:
            raise InvariantViolation(
                f"{len(self.agents)} agents but graph has {n} nodes")
        for attr in ("x0", "lambda0", "theta0", "theta0p"):
            v = np.asarray(getattr(self, attr), dtype=float)
            if v.shape != (n,):
                raise InvariantViolation(f"{attr} must have length {n}")
            if not np.all(np.isfinite(v)):
                raise InvariantViolation(f"{attr} contains non-finite values")
            setattr(self, attr, v)
        scale = max(1.0, float(np.max(np.abs(self.theta0))), float(np.max(np.abs(self.theta0p))))
        if abs(self.theta0.sum()) > 1e-9 * scale:
            raise InvariantViolation("theta0 must sum to zero")
        if abs(self.theta0p.sum()) > 1e-9 * scale:
            raise InvariantViolation("theta0p must sum to zero")
        if self.dt <= 0 or self.t_end <= self.dt:
            raise InvariantViolation("need dt > 0 and t_end > dt")
        if self.algorithm == Algorithm.FF and any(a.bounded for a in self.agents):
            raise InvariantViolation("algorithm FF does not admit bounds; use PROJ_FF")
        self._check_curvature()
        self._check_bounds_order()

    @property
    def n(self) -> int:
        return self.graph.n

    def _probe_box(self) -> tuple[np.ndarray, np.ndarray]:
        xmax = max(100.0, 2.0 * float(np.max(np.abs(self.x0))) + 1.0)
        xs = np.linspace(-xmax, xmax, 13)
        ts = np.linspace(0.0, self.t_end, 41)
        return xs, ts

    def curvature_floor(self) -> float:
        """Min sampled cost curvature f_xx over the simulation box."""
        xs, ts = self._probe_box()
        xg, tg = np.meshgrid(xs, ts)
        floor = math.inf
        for a in self.agents:
            vals = evaluate(a.cost_xx, xg, tg)
            floor = min(floor, float(np.min(vals)))
        return floor

    def _check_curvature(self):
        m = self.curvature_floor()
        if not m > 0:
            raise InvariantViolation(
                f"cost not strongly convex on probe box (min f_xx = {m:.3g})")

    def _check_bounds_order(self):
        ts = np.linspace(0.0, self.t_end, 65)
        for idx, a in enumerate(self.agents):
            if a.lower is not None and a.upper is not None:
                lo = evaluate(a.lower, 0.0, ts)
                hi = evaluate(a.upper, 0.0, ts)
                if not np.all(lo < hi):
                    raise InvariantViolation(
                        f"agent {idx}: lower bound not below upper on horizon")

    def __eq__(self, other) -> bool:
        if not isinstance(other, Scenario):
            return NotImplemented
        return (
            self.agents == other.agents
            and self.graph == other.graph
            and self.gains == other.gains
            and self.t_end == other.t_end
            and self.dt == other.dt
            and all(
                np.array_equal(getattr(self, f), getattr(other, f))
                for f in ("x0", "lambda0", "theta0", "theta0p")
            )
            and self.algorithm == other.algorithm
            and self.seed == other.seed
        )


# ---------------------------------------------------------------------------
# Built-in case studies
# ---------------------------------------------------------------------------

# Radial feeder line list of the standard 33-bus distribution test system,
# 1-indexed (bus, bus); tie switches excluded so the graph is a tree.
_BUS33_LINES = [
    (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (7, 8), (8, 9), (9, 10),
    (10, 11), (11, 12), (12, 13), (13, 14), (14, 15), (15, 16), (16, 17),
    (17, 18), (2, 19), (19, 20), (20, 21), (21, 22), (3, 23), (23, 24),
    (24, 25), (6, 26), (26, 27), (27, 28), (28, 29), (29, 30), (30, 31),
    (31, 32), (32, 33),
]

# Generator buses absorb in the opposite direction of loads (A = -1).
_BUS33_GENERATORS = {4, 8, 14, 18, 22, 25, 30, 33}

# Agents whose feasible band around the schedule is deliberately tight,
# so the projection/switching machinery actually engages at scale.
_BUS33_TIGHT = {3, 11, 17, 24, 29}


def _case12_agents(with_bounds: bool) -> list[AgentSpec]:
    agents = []
    for i in range(1, 7):
        cost = parse_expr(f"(1 + 0.1*{i})*x^2 + 0.2*sin(0.1*{i}*t)*x^2")
        activity = parse_expr(f"10*{i} + 5*sin(0.1*{i}*t) + 0.1*{i}*t")
        agents.append(AgentSpec(A=1.0, cost=cost, activity=activity))
    if with_bounds:
        agents[0].upper = parse_expr("50")
        agents[3].upper = parse_expr("40")
        agents[5].lower = parse_expr("t")
        agents[5].upper = parse_expr("10 + 0.1*t^2")
    return agents


def _case3_scenario(seed: int = 33) -> Scenario:
    rng = np.random.default_rng(seed)
    n = 33
    agents = []
    for bus in range(1, n + 1):
        coef = -1.0 if bus in _BUS33_GENERATORS else 1.0
        # schedule r(t): base level plus a 3-term sinusoid superposition
        base = rng.uniform(20.0, 60.0)
        terms = [f"{base:.6g}"]
        for _ in range(3):
            amp = rng.uniform(0.5, 2.5)
            omg = rng.uniform(0.05, 0.4)
            phs = rng.uniform(0.0, 2.0 * math.pi)
            terms.append(f"{amp:.6g}*sin({omg:.6g}*t + {phs:.6g})")
        r_txt = " + ".join(terms)
        # forecast deviation to absorb, small relative to the schedule
        dev_terms = []
        for _ in range(3):
            amp = rng.uniform(0.5, 2.0)
            omg = rng.uniform(0.05, 0.5)
            phs = rng.uniform(0.0, 2.0 * math.pi)
            dev_terms.append(f"{amp:.6g}*sin({omg:.6g}*t + {phs:.6g})")
        dev_txt = " + ".join(dev_terms)
        # adjustment price, strictly positive and smoothly time-varying
        womg = rng.uniform(0.05, 0.3)
        wphs = rng.uniform(0.0, 2.0 * math.pi)
        price_txt = f"(1.1 + 0.5*sin({womg:.6g}*t + {wphs:.6g})^2)"
        cap = rng.uniform(0.5, 1.2) if bus in _BUS33_TIGHT else rng.uniform(8.0, 20.0)
        agents.append(AgentSpec(
            A=coef,
            cost=parse_expr(f"0.5*{price_txt}*(x - ({r_txt}))^2"),
            activity=parse_expr(f"{coef}*({r_txt}) + ({dev_txt})"),
            lower=parse_expr(f"({r_txt}) - {cap:.6g}"),
            upper=parse_expr(f"({r_txt}) + {cap:.6g}"),
        ))
    graph = CommGraph(n, [(i - 1, j - 1) for i, j in _BUS33_LINES])
    # dual gains: strong fractional coupling keeps the accumulated per-edge
    # chatter small over the deep feeder chain; kappa_dual sets the balance
    # trim rate (~kappa_dual * mean inverse curvature per second)
    gains = Gains(
        p=2, q=3,
        gamma_sens=(10.0, 10.0, 5.0),
        gamma_drift=(10.0, 10.0, 20.0),
        gamma_dual=(200.0, 200.0, 60.0),
        gamma_stat=(1.0, 1.0, 10.0),
        kappa_x=1.0, kappa_dual=3.0, epsilon=0.1,
    )
    zeros = np.zeros(n)
    return Scenario(
        agents=agents, graph=graph, gains=gains,
        t_end=30.0, dt=1e-4,
        x0=zeros.copy(), lambda0=zeros.copy(),
        theta0=zeros.copy(), theta0p=zeros.copy(),
        algorithm=Algorithm.PROJ_FF, seed=seed, name="case3",
    )


def builtin_scenario(name: str) -> Scenario:
    """Built-in instances: 'case1' (6 agents, no bounds), 'case2' (same costs
    with box constraints and one infeasible initial state), 'case3'
    (33-agent network on the standard radial feeder, seeded profiles)."""
    key = name.lower()
    if key == "case1":
        zeros = np.zeros(6)
        return Scenario(
            agents=_case12_agents(with_bounds=False), graph=ring(6),
            gains=DEMO_GAINS, t_end=60.0, dt=1e-4,
            x0=zeros.copy(), lambda0=zeros.copy(),
            theta0=zeros.copy(), theta0p=zeros.copy(),
            algorithm=Algorithm.FF, seed=0, name="case1",
        )
    if key == "case2":
        zeros = np.zeros(6)
        x0 = np.zeros(6)
        x0[5] = -10.0  # outside agent 6's feasible band on purpose
        return Scenario(
            agents=_case12_agents(with_bounds=True), graph=ring(6),
            gains=DEMO_GAINS, t_end=60.0, dt=1e-4,
            x0=x0, lambda0=zeros.copy(),
            theta0=zeros.copy(), theta0p=zeros.copy(),
            algorithm=Algorithm.PROJ_FF, seed=0, name="case2",
        )
    if key == "case3":
        return _case3_scenario()
    raise UnknownScenario(f"unknown scenario {name!r}")


# ---------------------------------------------------------------------------
# Load / save
# ---------------------------------------------------------------------------

def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise SchemaError(f"{path}.{key}", "missing required field")
    return obj[key]


def _number(v, path: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(path, f"expected a number, got {type(v).__name__}")
    f = float(v)
    if not math.isfinite(f):
        raise SchemaError(path, "numbers must be finite")
    return f


def _vector(v, n: int, path: str) -> np.ndarray:
    if not isinstance(v, list) or len(v) != n:
        raise SchemaError(path, f"expected a list of {n} numbers")
    return np.asarray([_number(e, f"{path}[{k}]") for k, e in enumerate(v)])


def _expr_field(obj: dict, key: str, path: str, required: bool) -> Expr | None:
    if key not in obj:
        if required:
            raise SchemaError(f"{path}.{key}", "missing required field")
        return None
    v = obj[key]
    if not isinstance(v, str):
        raise SchemaError(f"{path}.{key}", "expected an expression string")
    try:
        return parse_expr(v)
    except ValueError as exc:
        raise SchemaError(f"{path}.{key}", str(exc)) from exc


def _gain_triple(obj: dict, key: str) -> tuple[float, float, float]:
    v = _require(obj, key, "gains")
    if not isinstance(v, list) or len(v) != 3:
        raise SchemaError(f"gains.{key}", "expected a list of 3 numbers")
    return tuple(_number(e, f"gains.{key}[{k}]") for k, e in enumerate(v))


def scenario_from_dict(doc: dict, name: str = "custom") -> Scenario:
    if not isinstance(doc, dict):
        raise SchemaError("$", "top level must be an object")
    agents_doc = _require(doc, "agents", "$")
    if not isinstance(agents_doc, list) or not agents_doc:
        raise SchemaError("$.agents", "expected a non-empty list")
    agents = []
    for k, a in enumerate(agents_doc):
        path = f"$.agents[{k}]"
        if not isinstance(a, dict):
            raise SchemaError(path, "expected an object")
        agents.append(AgentSpec(
            A=_number(a.get("A", 1.0), f"{path}.A"),
            cost=_expr_field(a, "cost", path, required=True),
            activity=_expr_field(a, "activity", path, required=True),
            lower=_expr_field(a, "lower", path, required=False),
            upper=_expr_field(a, "upper", path, required=False),
        ))
    n = len(agents)

    edges_doc = _require(doc, "edges", "$")
    if not isinstance(edges_doc, list):
        raise SchemaError("$.edges", "expected a list of [i, j] pairs")
    edges = []
    for k, e in enumerate(edges_doc):
        if not isinstance(e, list) or len(e) != 2:
            raise SchemaError(f"$.edges[{k}]", "expected a pair [i, j]")
        edges.append((int(e[0]), int(e[1])))
    graph = CommGraph(n, edges)

    g = _require(doc, "gains", "$")
    if not isinstance(g, dict):
        raise SchemaError("$.gains", "expected an object")
    gains = Gains(
        p=int(_number(_require(g, "p", "gains"), "gains.p")),
        q=int(_number(_require(g, "q", "gains"), "gains.q")),
        gamma_sens=_gain_triple(g, "gamma_sens"),
        gamma_drift=_gain_triple(g, "gamma_drift"),
        gamma_dual=_gain_triple(g, "gamma_dual"),
        gamma_stat=_gain_triple(g, "gamma_stat"),
        kappa_x=_number(_require(g, "kappa_x", "gains"), "gains.kappa_x"),
        kappa_dual=_number(_require(g, "kappa_dual", "gains"), "gains.kappa_dual"),
        epsilon=_number(_require(g, "epsilon", "gains"), "gains.epsilon"),
    )

    alg_doc = _require(doc, "algorithm", "$")
    try:
        algorithm = Algorithm(alg_doc)
    except ValueError:
        raise SchemaError("$.algorithm", f"expected 'FF' or 'PROJ_FF', got {alg_doc!r}")

    zeros = np.zeros(n)
    return Scenario(
        agents=agents, graph=graph, gains=gains,
        t_end=_number(_require(doc, "t_end", "$"), "$.t_end"),
        dt=_number(_require(doc, "dt", "$"), "$.dt"),
        x0=_vector(doc["x0"], n, "$.x0") if "x0" in doc else zeros.copy(),
        lambda0=_vector(doc["lambda0"], n, "$.lambda0") if "lambda0" in doc else zeros.copy(),
        theta0=_vector(doc["theta0"], n, "$.theta0") if "theta0" in doc else zeros.copy(),
        theta0p=_vector(doc["theta0p"], n, "$.theta0p") if "theta0p" in doc else zeros.copy(),
        algorithm=algorithm,
        seed=int(_number(doc.get("seed", 0), "$.seed")),
        name=str(doc.get("name", name)),
    )


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError("$", f"not valid JSON: {exc}") from exc
    return scenario_from_dict(doc, name=str(path))


def scenario_to_dict(scn: Scenario) -> dict:
    agents = []
    for a in scn.agents:
        entry = {"A": a.A, "cost": to_text(a.cost), "activity": to_text(a.activity)}
        if a.lower is not None:
            entry["lower"] = to_text(a.lower)
        if a.upper is not None:
            entry["upper"] = to_text(a.upper)
        agents.append(entry)
    g = scn.gains
    return {
        "name": scn.name,
        "agents": agents,
        "edges": [[i, j] for i, j in scn.graph.sorted_edges()],
        "gains": {
            "p": g.p, "q": g.q,
            "gamma_sens": list(g.gamma_sens),
            "gamma_drift": list(g.gamma_drift),
            "gamma_dual": list(g.gamma_dual),
            "gamma_stat": list(g.gamma_stat),
            "kappa_x": g.kappa_x, "kappa_dual": g.kappa_dual,
            "epsilon": g.epsilon,
        },
        "t_end": scn.t_end, "dt": scn.dt,
        "x0": scn.x0.tolist(), "lambda0": scn.lambda0.tolist(),
        "theta0": scn.theta0.tolist(), "theta0p": scn.theta0p.tolist(),
        "algorithm": scn.algorithm.value,
        "seed": scn.seed,
    }


def save_scenario(scn: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(scn), fh, indent=2)
        fh.write("\n")
