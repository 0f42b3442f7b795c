"""Shared test helpers: independent STL oracles and random generators.

The oracles deliberately avoid the package's array-based evaluator: they
recurse index-by-index over the grid, so agreement between the two is a
meaningful check.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from pulsefalsify.signals import Signal
from pulsefalsify.stl import (
    Always,
    And,
    Atom,
    Eventually,
    Formula,
    Implies,
    Not,
    Or,
    Until,
)

GRID_TOL = 1e-9


def window_indices(a: float, b: float, dt: float) -> tuple[int, int]:
    lo = int(math.ceil(a / dt - GRID_TOL))
    hi = int(math.floor(b / dt + GRID_TOL))
    return lo, hi


def atom_margin(f: Atom, trace: Signal, i: int) -> float:
    value = f.constant
    for name, c in f.coeffs:
        value += c * float(trace.channel(name)[i])
    return value


def brute_robustness(f: Formula, trace: Signal, i: int, memo=None) -> float:
    """Classic robustness by direct recursion over grid indices."""
    if memo is None:
        memo = {}
    key = (id(f), i)
    if key in memo:
        return memo[key]
    dt = trace.dt
    if isinstance(f, Atom):
        value = atom_margin(f, trace, i)
    elif isinstance(f, Not):
        value = -brute_robustness(f.child, trace, i, memo)
    elif isinstance(f, And):
        value = min(brute_robustness(c, trace, i, memo) for c in f.children)
    elif isinstance(f, Or):
        value = max(brute_robustness(c, trace, i, memo) for c in f.children)
    elif isinstance(f, Implies):
        value = max(
            -brute_robustness(f.left, trace, i, memo),
            brute_robustness(f.right, trace, i, memo),
        )
    elif isinstance(f, Always):
        lo, hi = window_indices(f.a, f.b, dt)
        value = min(brute_robustness(f.child, trace, i + j, memo) for j in range(lo, hi + 1))
    elif isinstance(f, Eventually):
        lo, hi = window_indices(f.a, f.b, dt)
        value = max(brute_robustness(f.child, trace, i + j, memo) for j in range(lo, hi + 1))
    elif isinstance(f, Until):
        lo, hi = window_indices(f.a, f.b, dt)
        best = -math.inf
        for j in range(i + lo, i + hi + 1):
            hold = min(brute_robustness(f.left, trace, k, memo) for k in range(i, j + 1))
            best = max(best, min(brute_robustness(f.right, trace, j, memo), hold))
        value = best
    else:
        raise TypeError(f)
    memo[key] = value
    return value


def boolean_eval(f: Formula, trace: Signal, i: int, memo=None) -> bool:
    """Boolean STL at grid resolution; atoms satisfied iff margin > 0."""
    if memo is None:
        memo = {}
    key = (id(f), i)
    if key in memo:
        return memo[key]
    dt = trace.dt
    if isinstance(f, Atom):
        value = atom_margin(f, trace, i) > 0
    elif isinstance(f, Not):
        value = not boolean_eval(f.child, trace, i, memo)
    elif isinstance(f, And):
        value = all(boolean_eval(c, trace, i, memo) for c in f.children)
    elif isinstance(f, Or):
        value = any(boolean_eval(c, trace, i, memo) for c in f.children)
    elif isinstance(f, Implies):
        value = (not boolean_eval(f.left, trace, i, memo)) or boolean_eval(f.right, trace, i, memo)
    elif isinstance(f, Always):
        lo, hi = window_indices(f.a, f.b, dt)
        value = all(boolean_eval(f.child, trace, i + j, memo) for j in range(lo, hi + 1))
    elif isinstance(f, Eventually):
        lo, hi = window_indices(f.a, f.b, dt)
        value = any(boolean_eval(f.child, trace, i + j, memo) for j in range(lo, hi + 1))
    elif isinstance(f, Until):
        lo, hi = window_indices(f.a, f.b, dt)
        value = any(
            boolean_eval(f.right, trace, j, memo)
            and all(boolean_eval(f.left, trace, k, memo) for k in range(i, j + 1))
            for j in range(i + lo, i + hi + 1)
        )
    else:
        raise TypeError(f)
    memo[key] = value
    return value


def random_trace(rng: np.random.Generator, max_samples: int = 200) -> Signal:
    n = int(rng.integers(20, max_samples + 1))
    dt = float(rng.choice([0.05, 0.1, 0.25]))
    n_channels = int(rng.integers(1, 4))
    times = np.arange(n) * dt
    channels = tuple(
        np.round(rng.normal(0.0, 1.0, n).cumsum() * 0.3, 6) for _ in range(n_channels)
    )
    names = tuple(f"s{k}" for k in range(n_channels))
    return Signal(times=times, channels=channels, channel_names=names)


def random_formula(rng: np.random.Generator, trace: Signal, depth: int, budget: float) -> Formula:
    """Random formula whose temporal horizon fits within ``budget`` seconds."""
    dt = trace.dt
    ops = ["atom"]
    if depth > 0:
        ops += ["not", "and", "or"]
        if budget >= dt:
            ops += ["alw", "ev", "until"]
    op = rng.choice(ops)
    if op == "atom":
        name = str(rng.choice(trace.channel_names))
        coeff = float(rng.choice([-2.0, -1.0, 0.5, 1.0]))
        const = float(np.round(rng.normal(0.0, 1.0), 3))
        return Atom(coeffs=((name, coeff),), constant=const)
    if op == "not":
        return Not(random_formula(rng, trace, depth - 1, budget))
    if op in ("and", "or"):
        children = tuple(
            random_formula(rng, trace, depth - 1, budget) for _ in range(int(rng.integers(2, 4)))
        )
        return And(children) if op == "and" else Or(children)
    # temporal: pick an interval inside the remaining budget
    max_steps = int(budget / dt + GRID_TOL)
    hi = int(rng.integers(0, max_steps + 1))
    lo = int(rng.integers(0, hi + 1))
    a, b = lo * dt, hi * dt
    child_budget = budget - b
    if op == "alw":
        return Always(a, b, random_formula(rng, trace, depth - 1, child_budget))
    if op == "ev":
        return Eventually(a, b, random_formula(rng, trace, depth - 1, child_budget))
    return Until(
        a,
        b,
        random_formula(rng, trace, depth - 1, child_budget),
        random_formula(rng, trace, depth - 1, child_budget),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
