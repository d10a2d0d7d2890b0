"""Exception types shared across the library.

Config/problem-definition errors derive from ValueError so callers can
catch the whole family with one except clause; runtime simulation
failures derive from RuntimeError.
"""


class ExprSyntaxError(ValueError):
    """Malformed expression text. `offset` is the byte position of the error."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class ExponentNotConstant(ValueError):
    """`^` used with a non-constant right-hand side."""


class SchemaError(ValueError):
    """Scenario file does not match the documented schema."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class InvariantViolation(ValueError):
    """A scenario-level invariant does not hold (gains, initial sums, convexity...)."""


class UnknownScenario(ValueError):
    """Built-in scenario name not recognized."""


class DisconnectedGraph(ValueError):
    """Communication graph is not connected."""


class NonConvexSample(RuntimeError):
    """Cost curvature f_xx <= 0 encountered at runtime (agent id and time attached)."""

    def __init__(self, agent: int, t: float):
        super().__init__(f"non-convex cost sample at agent {agent}, t={t:.6g}")
        self.agent = agent
        self.t = t


class MissingBound(ValueError):
    """A switched-mode quantity referenced a bound the agent does not declare."""


class EmptyBox(RuntimeError):
    """Lower bound exceeds upper bound (crossed time-varying constraints)."""


class Diverged(RuntimeError):
    """A state component exceeded the divergence guard during integration."""

    def __init__(self, t: float):
        super().__init__(f"state diverged at t={t:.6g}")
        self.t = t


class Infeasible(RuntimeError):
    """Frozen-time problem has no feasible dual (no bracket sign change)."""


class NoBracket(RuntimeError):
    """Scalar root could not be bracketed within the search limit."""


class SingularDenominator(RuntimeError):
    """All agents pinned: dual-rate denominator vanished."""
