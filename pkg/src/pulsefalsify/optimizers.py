"""Black-box minimization over the unit hypercube under an evaluation budget.

Two optimizers share a common result format:

* ``random_search`` -- uniform i.i.d. sampling.
* ``turbo_lite`` -- a single-trust-region surrogate optimizer: a Latin
  hypercube seeds a radial-basis surrogate, candidates are drawn inside an
  axis-aligned trust region around the incumbent, and the region expands on
  streaks of improvements and shrinks on streaks of failures, restarting
  from a fresh hypercube when it collapses.

Both stop as soon as an evaluation goes negative; non-finite objective
values are recorded as +inf and the search continues.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "OptimizerConfig",
    "EvalRecord",
    "OptimizationResult",
    "SurrogateDegeneracy",
    "latin_hypercube",
    "random_search",
    "turbo_lite_minimize",
    "fit_surrogate",
    "minimize",
]


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings shared by both optimizer kinds.

    ``init_samples=None`` means "twice the dimension", resolved when the
    search starts.  The trust-region constants follow the published TuRBO
    defaults.
    """

    kind: str = "turbo_lite"
    budget: int = 1000
    init_samples: int | None = None
    seed: int = 0
    tr_initial: float = 0.8
    tr_min: float = 2.0 ** -7
    tr_max: float = 1.6
    success_tolerance: int = 3
    failure_tolerance: int | None = None  # None -> dimension
    candidates_per_dim: int = 100
    candidates_cap: int = 5000

    def __post_init__(self) -> None:
        if self.kind not in ("random_search", "turbo_lite"):
            raise ValueError(f"unknown optimizer kind {self.kind!r}")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.init_samples is not None and self.init_samples < 1:
            raise ValueError("init_samples must be >= 1")
        if not 0 < self.tr_min < self.tr_initial <= self.tr_max:
            raise ValueError("need 0 < tr_min < tr_initial <= tr_max")

    def resolve(self, dim: int) -> "OptimizerConfig":
        """Fill in dimension-dependent defaults."""
        out = self
        if out.init_samples is None:
            out = replace(out, init_samples=2 * dim)
        if out.failure_tolerance is None:
            out = replace(out, failure_tolerance=dim)
        return out


@dataclass(frozen=True)
class EvalRecord:
    point: np.ndarray
    value: float
    index: int  # 1-based evaluation ordinal


@dataclass
class OptimizationResult:
    best: EvalRecord
    history: list[EvalRecord]
    stopped_early: bool
    evaluations_used: int
    restarts: int = 0


class SurrogateDegeneracy(RuntimeError):
    """The surrogate system cannot be solved (e.g. all values identical)."""


def latin_hypercube(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """n points in [0,1]^dim with one point per stratum per coordinate."""
    if n < 1 or dim < 1:
        raise ValueError("latin_hypercube requires n >= 1 and dim >= 1")
    out = np.empty((n, dim))
    for d in range(dim):
        out[:, d] = (rng.permutation(n) + rng.random(n)) / n
    return out


class _Budget:
    """Evaluation bookkeeping with stop-on-negative."""

    def __init__(self, objective, budget: int):
        self.objective = objective
        self.budget = budget
        self.history: list[EvalRecord] = []
        self.negative = False

    @property
    def used(self) -> int:
        return len(self.history)

    @property
    def exhausted(self) -> bool:
        return self.negative or self.used >= self.budget

    def evaluate(self, point: np.ndarray) -> float:
        point = np.array(point, dtype=float)
        value = float(self.objective(point))
        if not math.isfinite(value):
            value = math.inf
        self.history.append(EvalRecord(point=point, value=value, index=self.used + 1))
        if value < 0:
            self.negative = True
        return value

    def result(self, restarts: int = 0) -> OptimizationResult:
        best = min(self.history, key=lambda r: (r.value, r.index))
        return OptimizationResult(
            best=best,
            history=self.history,
            stopped_early=self.negative,
            evaluations_used=self.used,
            restarts=restarts,
        )


def random_search(objective, dim: int, config: OptimizerConfig) -> OptimizationResult:
    """Uniform random sampling until the objective goes negative or the
    budget runs out."""
    rng = np.random.default_rng(config.seed)
    tracker = _Budget(objective, config.budget)
    while not tracker.exhausted:
        tracker.evaluate(rng.random(dim))
    return tracker.result()


class RbfSurrogate:
    """Cubic radial-basis interpolant with a linear polynomial tail."""

    def __init__(self, points: np.ndarray, weights: np.ndarray, tail: np.ndarray):
        self.points = points
        self.weights = weights
        self.tail = tail  # (1 + dim,) coefficients: constant then linear

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        r = np.linalg.norm(x[:, None, :] - self.points[None, :, :], axis=2)
        return r**3 @ self.weights + self.tail[0] + x @ self.tail[1:]


def fit_surrogate(points: np.ndarray, values: np.ndarray) -> RbfSurrogate:
    """Exact cubic-RBF interpolant of (points, values).

    A singular system gets a small ridge on the kernel block; if it stays
    unsolvable, or all values coincide, ``SurrogateDegeneracy`` is raised.
    """
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float)
    n, dim = points.shape
    if n < 2 or len(np.unique(points, axis=0)) < 2:
        raise SurrogateDegeneracy("need at least 2 distinct points")
    if np.ptp(values) == 0.0:
        raise SurrogateDegeneracy("all objective values identical")
    r = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)
    phi = r**3
    poly = np.hstack([np.ones((n, 1)), points])
    size = n + dim + 1
    a = np.zeros((size, size))
    a[:n, :n] = phi
    a[:n, n:] = poly
    a[n:, :n] = poly.T
    rhs = np.concatenate([values, np.zeros(dim + 1)])
    for ridge in (0.0, 1e-8):
        system = a.copy()
        system[:n, :n] += ridge * np.eye(n)
        try:
            sol = np.linalg.solve(system, rhs)
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(sol)):
            return RbfSurrogate(points, sol[:n], sol[n:])
    raise SurrogateDegeneracy("surrogate system is singular")


def turbo_lite_minimize(objective, dim: int, config: OptimizerConfig) -> OptimizationResult:
    """Single-trust-region surrogate minimization.

    Latin-hypercube initialization, then one surrogate-guided evaluation per
    step.  The trust region doubles after ``success_tolerance`` consecutive
    improvements, halves after ``failure_tolerance`` consecutive failures,
    and a collapse below the minimum side restarts the search from a fresh
    hypercube while keeping the full history.
    """
    config = config.resolve(dim)
    if config.budget < config.init_samples:
        raise ValueError(
            f"budget {config.budget} smaller than init_samples {config.init_samples}"
        )
    rng = np.random.default_rng(config.seed)
    tracker = _Budget(objective, config.budget)
    n_cand = min(config.candidates_per_dim * dim, config.candidates_cap)

    def init_phase() -> int:
        start = tracker.used
        for point in latin_hypercube(config.init_samples, dim, rng):
            if tracker.exhausted:
                break
            tracker.evaluate(point)
        return start

    phase_start = init_phase()
    side = config.tr_initial
    successes = failures = 0
    restarts = 0
    while not tracker.exhausted:
        phase = tracker.history[phase_start:]
        incumbent = min(phase, key=lambda rec: (rec.value, rec.index))
        points = np.stack([rec.point for rec in tracker.history])
        values = np.array([rec.value for rec in tracker.history])
        try:
            surrogate = fit_surrogate(points[np.isfinite(values)], values[np.isfinite(values)])
        except SurrogateDegeneracy:
            surrogate = None
        lo = np.clip(incumbent.point - side / 2, 0.0, 1.0)
        hi = np.clip(incumbent.point + side / 2, 0.0, 1.0)
        candidates = lo + rng.random((n_cand, dim)) * (hi - lo)
        if surrogate is not None:
            pick = candidates[int(np.argmin(surrogate.predict(candidates)))]
        else:
            pick = candidates[0]
        value = tracker.evaluate(pick)
        if value < incumbent.value:
            successes += 1
            failures = 0
        else:
            failures += 1
            successes = 0
        if successes >= config.success_tolerance:
            side = min(2.0 * side, config.tr_max)
            successes = 0
        if failures >= config.failure_tolerance:
            side = side / 2.0
            failures = 0
        if side < config.tr_min:
            side = config.tr_initial
            successes = failures = 0
            restarts += 1
            phase_start = init_phase()
    return tracker.result(restarts)


def minimize(objective, dim: int, config: OptimizerConfig) -> OptimizationResult:
    """Dispatch on ``config.kind``."""
    if config.kind == "random_search":
        return random_search(objective, dim, config)
    return turbo_lite_minimize(objective, dim, config)
