"""Shared fixtures: the three built-in case runs are expensive, so they run
once per session (with the jit kernel warmed separately so wall-clock
assertions measure the simulation, not compilation).
"""

from __future__ import annotations

import time

import numpy as np
import pytest

import tvalloc as tv
from tvalloc import sim


@pytest.fixture(scope="session")
def warm_engine():
    scn = tv.builtin_scenario("case1")
    sim.integrate(scn, t_end=0.001, decimate=1)
    scn2 = tv.builtin_scenario("case2")
    sim.integrate(scn2, t_end=0.001, decimate=1)
    return True


@pytest.fixture(scope="session")
def case1_run(warm_engine):
    scn = tv.builtin_scenario("case1")
    t0 = time.perf_counter()
    result = sim.integrate(scn)
    wall = time.perf_counter() - t0
    return scn, result, wall


@pytest.fixture(scope="session")
def case2_run(warm_engine):
    scn = tv.builtin_scenario("case2")
    result = sim.integrate(scn, verify=True)
    return scn, result


@pytest.fixture(scope="session")
def case3_run(warm_engine):
    scn = tv.builtin_scenario("case3")
    t0 = time.perf_counter()
    result = sim.integrate(scn)
    wall = time.perf_counter() - t0
    return scn, result, wall


# ---------------------------------------------------------------------------
# Random expression generator (shared by the parser/derivative suites)
# ---------------------------------------------------------------------------

_UNARY = ("neg", "sin", "cos")
_BINARY = ("add", "sub", "mul", "div")


def random_expr(rng: np.random.Generator, depth: int = 3):
    """Random tree from the expression grammar, biased toward benign shapes."""
    if depth == 0 or rng.random() < 0.3:
        r = rng.random()
        if r < 0.4:
            return ("const", float(np.round(rng.uniform(-4.0, 4.0), 3)))
        if r < 0.7:
            return ("x",)
        return ("t",)
    r = rng.random()
    if r < 0.15:
        inner = random_expr(rng, depth - 1)
        if inner[0] == "const":
            return ("const", -inner[1])  # parser folds negated literals
        return ("neg", inner)
    if r < 0.35:
        head = "sin" if rng.random() < 0.5 else "cos"
        return (head, random_expr(rng, depth - 1))
    if r < 0.45:
        expo = float(rng.choice([2.0, 3.0, 0.5, -1.0, 1.5]))
        base = random_expr(rng, depth - 1)
        return ("pow", base, expo)
    head = _BINARY[rng.integers(len(_BINARY))]
    return (head, random_expr(rng, depth - 1), random_expr(rng, depth - 1))


def safe_probe_points(expr, rng: np.random.Generator, count: int = 8,
                      want: int = 4) -> list[tuple[float, float]]:
    """Probe points where the expression and its finite-difference stencil
    evaluate to something tame (no poles, overflow or wild magnitudes)."""
    points = []
    for _ in range(count * 12):
        if len(points) >= want:
            break
        x = float(rng.uniform(-2.0, 2.0))
        t = float(rng.uniform(-2.0, 2.0))
        try:
            vals = [
                tv.evaluate(expr, x + dx, t + dt)
                for dx in (-2e-5, 0.0, 2e-5)
                for dt in (-2e-5, 0.0, 2e-5)
            ]
        except (ZeroDivisionError, OverflowError, ValueError):
            continue
        arr = np.asarray(vals, dtype=complex)
        if np.all(np.isfinite(arr.real)) and np.all(arr.imag == 0) \
                and np.max(np.abs(arr.real)) < 1e6:
            points.append((x, t))
    return points
