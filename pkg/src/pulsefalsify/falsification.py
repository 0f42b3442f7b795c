"""Falsification loop: search space assembly, point decoding, optimization.

The optimizer works on the unit hypercube; each coordinate maps affinely
onto one normalized pulse parameter of one input channel (or onto one
static search parameter).  Parameters left out of the free mask stay at
the fixed defaults (low=0, period=0.5, width=0.5, high=1, delay=0).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from . import stl
from .optimizers import OptimizerConfig, minimize
from .signals import (
    PulseParams,
    Signal,
    denormalize,
    pulse_values,
    merge_signals,
)
from .systems import Benchmark, SimulationError, simulate

__all__ = [
    "PulseParam",
    "FreeMask",
    "ParamSpace",
    "Witness",
    "FalsificationOutcome",
    "FIXED_DEFAULTS",
    "build_param_space",
    "decode",
    "falsify",
    "build_inputs",
    "evaluate_witness",
]


class PulseParam(enum.Enum):
    """The five pulse-generator parameters, in canonical L-P-W-H-D order."""

    LOW = "L"
    PERIOD = "P"
    WIDTH = "W"
    HIGH = "H"
    DELAY = "D"


_CANONICAL_ORDER = (
    PulseParam.LOW,
    PulseParam.PERIOD,
    PulseParam.WIDTH,
    PulseParam.HIGH,
    PulseParam.DELAY,
)

FIXED_DEFAULTS = PulseParams(low_n=0.0, period_n=0.5, width_n=0.5, high_n=1.0, delay_n=0.0)

_FIELD_OF = {
    PulseParam.LOW: "low_n",
    PulseParam.PERIOD: "period_n",
    PulseParam.WIDTH: "width_n",
    PulseParam.HIGH: "high_n",
    PulseParam.DELAY: "delay_n",
}


@dataclass(frozen=True)
class FreeMask:
    """Subset of pulse parameters exposed to the optimizer."""

    params: frozenset[PulseParam]
    include_static_params: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "params", frozenset(self.params))

    @property
    def ordered(self) -> tuple[PulseParam, ...]:
        return tuple(p for p in _CANONICAL_ORDER if p in self.params)

    @property
    def label(self) -> str:
        return "-".join(p.value for p in self.ordered)

    @classmethod
    def from_label(cls, label: str, include_static_params: bool = False) -> "FreeMask":
        """Parse labels like "W" or "L-P-W-H-D"."""
        by_letter = {p.value: p for p in PulseParam}
        parts = [s.strip() for s in label.split("-") if s.strip()]
        if not parts:
            raise ValueError(f"empty mask label {label!r}")
        params = set()
        for part in parts:
            if part.upper() not in by_letter:
                raise ValueError(f"unknown pulse parameter {part!r} in mask {label!r}")
            params.add(by_letter[part.upper()])
        return cls(frozenset(params), include_static_params)


@dataclass(frozen=True)
class Coordinate:
    """One optimization coordinate and its native range."""

    channel: str | None  # None for static parameters
    param: PulseParam | None
    static_name: str | None
    lower: float
    upper: float

    @property
    def name(self) -> str:
        if self.channel is not None:
            return f"{self.channel}.{self.param.value}"
        return self.static_name


@dataclass(frozen=True)
class ParamSpace:
    benchmark: Benchmark
    mask: FreeMask
    coords: tuple[Coordinate, ...]
    fixed_defaults: PulseParams = FIXED_DEFAULTS

    @property
    def dimension(self) -> int:
        return len(self.coords)


def build_param_space(benchmark: Benchmark, mask: FreeMask) -> ParamSpace:
    """Assemble the search space: per channel the masked parameters in
    L-P-W-H-D order, then the free static parameters in declaration order.

    The period coordinate is restricted to [0, 1] when the delay is also
    free, and spans [0, 2] otherwise.
    """
    if not mask.params:
        raise ValueError("free mask must contain at least one pulse parameter")
    delay_free = PulseParam.DELAY in mask.params
    period_upper = 1.0 if delay_free else 2.0
    coords: list[Coordinate] = []
    for channel, _ in benchmark.inputs:
        for param in mask.ordered:
            upper = period_upper if param is PulseParam.PERIOD else 1.0
            coords.append(
                Coordinate(channel=channel, param=param, static_name=None, lower=0.0, upper=upper)
            )
    if mask.include_static_params:
        for p in benchmark.static_params:
            coords.append(
                Coordinate(channel=None, param=None, static_name=p.name, lower=p.lower, upper=p.upper)
            )
    return ParamSpace(benchmark=benchmark, mask=mask, coords=tuple(coords))


def decode(point: np.ndarray, space: ParamSpace) -> tuple[dict[str, PulseParams], dict[str, float]]:
    """Map a unit-cube point onto per-channel pulse parameters and static
    values.  Unmasked parameters stay at the fixed defaults."""
    point = np.asarray(point, dtype=float)
    if point.shape != (space.dimension,):
        raise ValueError(f"expected a point of dimension {space.dimension}, got shape {point.shape}")
    per_channel: dict[str, dict[str, float]] = {}
    statics: dict[str, float] = {}
    for value, coord in zip(point, space.coords):
        native = coord.lower + float(value) * (coord.upper - coord.lower)
        if coord.channel is not None:
            per_channel.setdefault(coord.channel, {})[_FIELD_OF[coord.param]] = native
        else:
            statics[coord.static_name] = native
    pulses = {
        channel: replace(space.fixed_defaults, **per_channel.get(channel, {}))
        for channel in space.benchmark.input_names
    }
    return pulses, statics


def build_inputs(benchmark: Benchmark, pulses: dict[str, PulseParams]) -> Signal:
    """Synthesize the multi-channel input signal from per-channel pulses."""
    grid = benchmark.grid()
    channels = []
    for channel, rng in benchmark.inputs:
        pulse = denormalize(pulses[channel], rng, benchmark.horizon)
        channels.append(pulse_values(pulse, grid))
    return Signal(times=grid, channels=tuple(channels), channel_names=benchmark.input_names)


@dataclass(frozen=True)
class Witness:
    """Decoded falsifying input: pulse parameters, static values, and the
    raw optimizer point they came from."""

    point: np.ndarray
    pulses: dict[str, PulseParams]
    static_values: dict[str, float]


@dataclass
class FalsificationOutcome:
    falsified: bool
    simulations_used: int
    best_robustness: float
    witness: Witness | None
    history: list[float]


def _objective(benchmark: Benchmark, spec_name: str, space: ParamSpace, semantics: str):
    formula = benchmark.specs[spec_name]

    def objective(point: np.ndarray) -> float:
        pulses, statics = decode(point, space)
        try:
            inputs = build_inputs(benchmark, pulses)
            trace = simulate(benchmark, inputs, statics)
            return stl.robustness(formula, merge_signals(trace, inputs), 0.0, semantics)
        except SimulationError:
            return math.inf

    return objective


def falsify(
    benchmark: Benchmark,
    spec_name: str,
    mask: FreeMask,
    config: OptimizerConfig,
    semantics: str = "classic",
) -> FalsificationOutcome:
    """Search for an input signal with negative robustness.

    Each objective evaluation performs exactly one simulation; the loop
    stops at the first negative robustness or when the budget runs out.
    """
    if spec_name not in benchmark.specs:
        raise KeyError(
            f"benchmark {benchmark.name!r} has no spec {spec_name!r}; "
            f"available: {sorted(benchmark.specs)}"
        )
    space = build_param_space(benchmark, mask)
    config = config.resolve(space.dimension)
    if config.kind == "turbo_lite" and config.budget < 2 * space.dimension:
        raise ValueError(
            f"turbo_lite needs budget >= 2*dimension = {2 * space.dimension}, "
            f"got {config.budget}"
        )
    objective = _objective(benchmark, spec_name, space, semantics)
    result = minimize(objective, space.dimension, config)
    falsified = result.best.value < 0
    witness = None
    if falsified:
        pulses, statics = decode(result.best.point, space)
        witness = Witness(point=result.best.point, pulses=pulses, static_values=statics)
    return FalsificationOutcome(
        falsified=falsified,
        simulations_used=result.evaluations_used,
        best_robustness=result.best.value,
        witness=witness,
        history=[rec.value for rec in result.history],
    )


def evaluate_witness(
    benchmark: Benchmark,
    spec_name: str,
    witness: Witness,
    semantics: str = "classic",
) -> float:
    """Re-simulate a witness and re-evaluate the spec robustness."""
    inputs = build_inputs(benchmark, witness.pulses)
    trace = simulate(benchmark, inputs, witness.static_values)
    return stl.robustness(benchmark.specs[spec_name], merge_signals(trace, inputs), 0.0, semantics)
