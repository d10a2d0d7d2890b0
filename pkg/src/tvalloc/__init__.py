"""tvalloc: distributed feedback-feedforward dynamics for time-varying
resource allocation, with box-constraint handling by projection and
switched feedforward, an independent centralized oracle, and analytic
fixed-time settling bounds.
"""

from .errors import (
    Diverged,
    DisconnectedGraph,
    EmptyBox,
    ExponentNotConstant,
    ExprSyntaxError,
    Infeasible,
    InvariantViolation,
    MissingBound,
    NoBracket,
    NonConvexSample,
    SchemaError,
    SingularDenominator,
    UnknownScenario,
)
from .expr import differentiate, evaluate, parse_expr, to_text
from .graph import CommGraph, algebraic_connectivity, complete, is_connected, laplacian, ring
from .scenario import (
    AgentSpec,
    Algorithm,
    Gains,
    Scenario,
    builtin_scenario,
    load_scenario,
    save_scenario,
)
from .dynamics import (
    BoundsReport,
    FieldEval,
    GainReport,
    SimState,
    gain_monitor,
    initial_state,
    settling_bounds,
    vector_field,
    vector_field_ff,
    vector_field_proj,
)
from .oracle import FrozenSolution, inner_argmin, oracle_rates, penalty_check, solve_frozen
from .sim import (
    SettlingReport,
    SimResult,
    SwitchEvent,
    Trace,
    TraceRecord,
    detect_settling,
    integrate,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
