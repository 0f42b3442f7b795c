"""Benchmark system models and the simulator contract.

A benchmark bundles input channel ranges, the time grid, a model, STL
specifications, and optional static search parameters (e.g. initial
conditions).  Simulation is deterministic: continuous-time models are
integrated with fixed-step classical RK4 at the trace resolution, with
inputs held constant over each step; the delta-sigma modulator is iterated
as a discrete map with one step per grid instant.

The shipped models are desk-scale substitutes for the proprietary ARCH
suite: a first-order lag, a five-car platoon, a third-order delta-sigma
modulator, and a threshold-switched linear system.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Mapping

import numpy as np

from . import stl
from .signals import InputRange, Signal

__all__ = [
    "Benchmark",
    "ModelSpec",
    "StaticParam",
    "SimulationError",
    "simulate",
    "rk4_step",
    "load_benchmark",
    "load_benchmark_file",
    "builtin_benchmark",
    "builtin_benchmark_names",
]

MODEL_KINDS = ("first_order_lag", "chasing_cars", "delta_sigma", "switched_system")


class SimulationError(RuntimeError):
    """Simulation failed (e.g. the state became non-finite)."""


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}")
        object.__setattr__(self, "params", dict(self.params))

    def get(self, name: str, default: float) -> float:
        return float(self.params.get(name, default))


@dataclass(frozen=True)
class StaticParam:
    name: str
    lower: float
    upper: float
    default: float

    def __post_init__(self) -> None:
        if not self.lower < self.upper:
            raise ValueError(f"static param {self.name!r}: lower must be < upper")
        if not self.lower <= self.default <= self.upper:
            raise ValueError(f"static param {self.name!r}: default outside range")


@dataclass(frozen=True)
class Benchmark:
    name: str
    inputs: tuple[tuple[str, InputRange], ...]
    horizon: float
    dt: float
    model: ModelSpec
    spec_texts: Mapping[str, str]
    static_params: tuple[StaticParam, ...] = ()

    def __post_init__(self) -> None:
        if not self.inputs:
            raise ValueError("benchmark needs at least one input channel")
        if self.horizon <= 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if not (0 < self.dt <= self.horizon):
            raise ValueError(f"dt must satisfy 0 < dt <= horizon, got {self.dt}")
        names = [n for n, _ in self.inputs]
        if len(set(names)) != len(names):
            raise ValueError("input channel names must be unique")
        outputs = _OUTPUT_NAMES[self.model.kind]
        clash = set(names) & set(outputs)
        if clash:
            raise ValueError(f"input names clash with model outputs: {sorted(clash)}")
        object.__setattr__(self, "spec_texts", dict(self.spec_texts))
        parsed = {}
        for spec_name, text in self.spec_texts.items():
            formula = stl.parse(text)
            if stl.horizon_of(formula) > self.horizon + 1e-9:
                raise ValueError(
                    f"spec {spec_name!r} has horizon {stl.horizon_of(formula)} s "
                    f"exceeding the benchmark horizon {self.horizon} s"
                )
            parsed[spec_name] = formula
        object.__setattr__(self, "specs", parsed)

    specs: Mapping[str, stl.Formula] = field(init=False, repr=False, default=None)

    @property
    def input_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.inputs)

    @property
    def output_names(self) -> tuple[str, ...]:
        return _OUTPUT_NAMES[self.model.kind]

    def grid(self) -> np.ndarray:
        n = int(round(self.horizon / self.dt))
        return np.arange(n + 1, dtype=float) * self.dt

    def static_defaults(self) -> dict[str, float]:
        return {p.name: p.default for p in self.static_params}


_OUTPUT_NAMES: dict[str, tuple[str, ...]] = {
    "first_order_lag": ("y",),
    "chasing_cars": ("y1", "y2", "y3", "y4", "y5"),
    "delta_sigma": ("x1", "x2", "x3"),
    "switched_system": ("x1", "x2"),
}


def rk4_step(
    derivative: Callable[[np.ndarray, np.ndarray], np.ndarray],
    state: np.ndarray,
    inp: np.ndarray,
    dt: float,
) -> np.ndarray:
    """One classical 4th-order Runge-Kutta step with the input held constant."""
    k1 = derivative(state, inp)
    k2 = derivative(state + 0.5 * dt * k1, inp)
    k3 = derivative(state + 0.5 * dt * k2, inp)
    k4 = derivative(state + dt * k3, inp)
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# ---------------------------------------------------------------------------
# Model dynamics


def _lag_outputs(model: ModelSpec, u: np.ndarray, dt: float, statics: Mapping[str, float]):
    # dy/dt = (K*u - y) / tau
    gain = model.get("K", 1.0)
    tau = model.get("tau", 1.0)
    y0 = statics.get("y_init", model.get("y_init", 0.0))

    def deriv(state, inp):
        return (gain * inp - state) / tau

    n = u.shape[1]
    out = np.empty((1, n))
    state = np.array([y0])
    out[:, 0] = state
    for k in range(n - 1):
        state = rk4_step(deriv, state, u[0, k], dt)
        out[:, k + 1] = state
    return out


def _chasing_cars_outputs(model: ModelSpec, u: np.ndarray, dt: float, statics: Mapping[str, float]):
    # Lead car: dv1 = 5*throttle - 8*brake (velocity clamped at 0), dy1 = v1.
    # Followers i=2..5: spring-damper tracking of the predecessor at spacing d0.
    k1 = model.get("k1", 1.0)
    k2 = model.get("k2", 2.0)
    d0 = model.get("d0", 10.0)
    accel = model.get("accel_gain", 5.0)
    brake = model.get("brake_gain", 8.0)

    def deriv(state, inp):
        y = state[0::2]
        v = state[1::2]
        d = np.empty_like(state)
        a1 = accel * inp[0] - brake * inp[1]
        if state[1] <= 0.0 and a1 < 0.0:
            a1 = 0.0
        d[0] = v[0]
        d[1] = a1
        d[2::2] = v[1:]
        d[3::2] = k1 * (y[:-1] - y[1:] - d0) - k2 * v[1:]
        return d

    n = u.shape[1]
    # State layout: (y1, v1, y2, v2, ..., y5, v5); defaults put the cars at
    # equilibrium spacing d0 and at rest.
    state = np.zeros(10)
    state[0::2] = np.array([4.0, 3.0, 2.0, 1.0, 0.0]) * d0
    out = np.empty((5, n))
    out[:, 0] = state[0::2]
    for k in range(n - 1):
        state = rk4_step(deriv, state, u[:, k], dt)
        if state[1] < 0.0:
            state[1] = 0.0
        out[:, k + 1] = state[0::2]
    return out


def _delta_sigma_outputs(model: ModelSpec, u: np.ndarray, dt: float, statics: Mapping[str, float]):
    # Discrete integrator chain x_j += b_j * (in_j - v), v = sign(x3),
    # sign(0) = +1; one step per grid instant.
    b = np.array([model.get("b1", 0.044), model.get("b2", 0.287), model.get("b3", 0.8)])
    x = np.array(
        [
            statics.get("x1_init", model.get("x1_init", 0.0)),
            statics.get("x2_init", model.get("x2_init", 0.0)),
            statics.get("x3_init", model.get("x3_init", 0.0)),
        ]
    )
    n = u.shape[1]
    out = np.empty((3, n))
    out[:, 0] = x
    for k in range(n - 1):
        v = 1.0 if x[2] >= 0.0 else -1.0
        ins = np.array([u[0, k], x[0], x[1]])
        x = x + b * (ins - v)
        out[:, k + 1] = x
    return out


def _switched_system_outputs(model: ModelSpec, u: np.ndarray, dt: float, statics: Mapping[str, float]):
    # dx = A1 x + B u while |x1| < gamma, else A2 x + B u.  A1 is a stable
    # spiral, A2 a slowly expanding one.
    gamma = statics.get("thresh", model.get("thresh", 0.7))
    a1 = np.array([[model.get("a1_11", -0.5), model.get("a1_12", -1.0)],
                   [model.get("a1_21", 1.0), model.get("a1_22", -0.5)]])
    a2 = np.array([[model.get("a2_11", 0.05), model.get("a2_12", -1.0)],
                   [model.get("a2_21", 1.0), model.get("a2_22", 0.05)]])
    bmat = np.array([[model.get("b_11", 1.0), model.get("b_12", 0.0)],
                     [model.get("b_21", 0.0), model.get("b_22", 1.0)]])
    x0 = np.array(
        [
            statics.get("x1_init", model.get("x1_init", 0.0)),
            statics.get("x2_init", model.get("x2_init", 0.0)),
        ]
    )

    def deriv(state, inp):
        a = a1 if abs(state[0]) < gamma else a2
        return a @ state + bmat @ inp

    n = u.shape[1]
    out = np.empty((2, n))
    state = x0
    out[:, 0] = state
    for k in range(n - 1):
        state = rk4_step(deriv, state, u[:, k], dt)
        out[:, k + 1] = state
    return out


_MODEL_FNS = {
    "first_order_lag": _lag_outputs,
    "chasing_cars": _chasing_cars_outputs,
    "delta_sigma": _delta_sigma_outputs,
    "switched_system": _switched_system_outputs,
}


def simulate(
    benchmark: Benchmark,
    inputs: Signal,
    static_values: Mapping[str, float] | None = None,
) -> Signal:
    """Run the benchmark model on the given input signal.

    Returns the output trace on the same grid as the input.  Raises
    ``SimulationError`` if the state becomes non-finite, and ``ValueError``
    for missing channels or static values outside their declared ranges.
    """
    grid = benchmark.grid()
    if len(inputs.times) != len(grid) or not np.allclose(inputs.times, grid, atol=1e-9):
        raise ValueError("input signal grid does not match the benchmark grid")
    statics = benchmark.static_defaults()
    if static_values:
        declared = {p.name: p for p in benchmark.static_params}
        for name, value in static_values.items():
            if name not in declared:
                raise ValueError(f"unknown static parameter {name!r}")
            p = declared[name]
            if not p.lower <= value <= p.upper:
                raise ValueError(
                    f"static parameter {name!r}={value} outside [{p.lower}, {p.upper}]"
                )
            statics[name] = float(value)
    u = np.stack([inputs.channel(name) for name in benchmark.input_names])
    with np.errstate(all="ignore"):
        out = _MODEL_FNS[benchmark.model.kind](benchmark.model, u, benchmark.dt, statics)
    if not np.all(np.isfinite(out)):
        raise SimulationError(
            f"benchmark {benchmark.name!r}: state became non-finite during simulation"
        )
    return Signal(
        times=grid,
        channels=tuple(out[i] for i in range(out.shape[0])),
        channel_names=benchmark.output_names,
    )


# ---------------------------------------------------------------------------
# Configuration loading

_TOP_KEYS = {"name", "horizon", "dt", "inputs", "model", "specs", "static_params"}
_REQUIRED_KEYS = {"name", "horizon", "dt", "inputs", "model", "specs"}


def _check_keys(obj: dict, allowed: set[str], required: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ValueError(f"{where}: unknown keys {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise ValueError(f"{where}: missing keys {sorted(missing)}")


def load_benchmark(document: str) -> Benchmark:
    """Parse and validate a benchmark configuration JSON document."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ValueError(f"benchmark config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValueError("benchmark config must be a JSON object")
    _check_keys(doc, _TOP_KEYS, _REQUIRED_KEYS, "benchmark config")
    inputs = []
    for entry in doc["inputs"]:
        _check_keys(entry, {"name", "min", "max"}, {"name", "min", "max"}, "input entry")
        inputs.append((str(entry["name"]), InputRange(float(entry["min"]), float(entry["max"]))))
    model_doc = doc["model"]
    _check_keys(model_doc, {"kind", "params"}, {"kind"}, "model")
    model = ModelSpec(kind=model_doc["kind"], params=model_doc.get("params", {}))
    statics = []
    for entry in doc.get("static_params", []):
        _check_keys(
            entry,
            {"name", "min", "max", "default"},
            {"name", "min", "max", "default"},
            "static param entry",
        )
        statics.append(
            StaticParam(
                name=str(entry["name"]),
                lower=float(entry["min"]),
                upper=float(entry["max"]),
                default=float(entry["default"]),
            )
        )
    if not isinstance(doc["specs"], dict) or not doc["specs"]:
        raise ValueError("benchmark config: 'specs' must be a non-empty object")
    return Benchmark(
        name=str(doc["name"]),
        inputs=tuple(inputs),
        horizon=float(doc["horizon"]),
        dt=float(doc["dt"]),
        model=model,
        spec_texts={str(k): str(v) for k, v in doc["specs"].items()},
        static_params=tuple(statics),
    )


def load_benchmark_file(path) -> Benchmark:
    with open(path, "r", encoding="utf-8") as fh:
        return load_benchmark(fh.read())


def builtin_benchmark_names() -> list[str]:
    files = resources.files("pulsefalsify.benchmarks")
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".json"))


def builtin_benchmark(name: str) -> Benchmark:
    """Load one of the shipped benchmark configurations by name."""
    ref = resources.files("pulsefalsify.benchmarks") / f"{name}.json"
    try:
        text = ref.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise KeyError(
            f"no builtin benchmark {name!r}; available: {builtin_benchmark_names()}"
        )
    return load_benchmark(text)
