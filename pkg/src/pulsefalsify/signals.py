"""Piecewise-constant signals and pulse-train synthesis.

A pulse train is described by five normalized parameters (low, period,
width, high, delay), each scaled against the input range and the time
horizon to obtain a physical square wave.  Signals live on a uniform time
grid and are sampled with zero-order hold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Signal",
    "InputRange",
    "PulseParams",
    "PhysicalPulse",
    "denormalize",
    "synthesize_pulse",
    "sample_at",
    "validate_period_range",
    "uniform_grid",
    "merge_signals",
]

# Relative tolerance used when snapping the pulse phase at period/width
# boundaries, so grid points landing exactly on an analytic transition are
# classified deterministically.
_PHASE_TOL = 1e-9


def _require_finite(name: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class InputRange:
    """Closed physical range [lower, upper] of one input channel."""

    lower: float
    upper: float

    def __post_init__(self) -> None:
        _require_finite("input range", self.lower, self.upper)
        if not self.lower < self.upper:
            raise ValueError(
                f"input range requires lower < upper, got [{self.lower}, {self.upper}]"
            )

    @property
    def span(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class PulseParams:
    """Normalized pulse-generator parameters.

    All parameters live in [0, 1] except ``period_n`` which may extend to
    [0, 2]; the tighter [0, 1] bound applies when the delay parameter is a
    free optimization variable (see :func:`validate_period_range`).
    """

    low_n: float
    period_n: float
    width_n: float
    high_n: float
    delay_n: float

    def __post_init__(self) -> None:
        _require_finite(
            "pulse params",
            self.low_n,
            self.period_n,
            self.width_n,
            self.high_n,
            self.delay_n,
        )
        for name in ("low_n", "width_n", "high_n", "delay_n"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if not 0.0 <= self.period_n <= 2.0:
            raise ValueError(f"period_n must be in [0, 2], got {self.period_n}")


@dataclass(frozen=True)
class PhysicalPulse:
    """Denormalized pulse description in physical units and seconds."""

    period: float
    width: float
    delay: float
    low: float
    high: float
    horizon: float


def validate_period_range(params: PulseParams, delay_is_free: bool) -> str | None:
    """Check the period/delay range coupling.

    Returns ``None`` when the period is legal, otherwise a description of
    the violation.  When the delay is a free search variable the period is
    restricted to [0, 1]; otherwise [0, 2] is allowed.
    """
    limit = 1.0 if delay_is_free else 2.0
    if params.period_n > limit:
        return (
            f"period_n={params.period_n} exceeds {limit} "
            f"(delay {'free' if delay_is_free else 'fixed'})"
        )
    return None


def denormalize(params: PulseParams, rng: InputRange, horizon: float) -> PhysicalPulse:
    """Scale normalized pulse parameters onto physical units.

    period = period_n * horizon, width = width_n * period,
    delay = delay_n * horizon, low = lower + low_n * (upper - lower),
    high = low + high_n * (upper - low).
    """
    _require_finite("horizon", horizon)
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    period = params.period_n * horizon
    width = params.width_n * period
    delay = params.delay_n * horizon
    low = rng.lower + params.low_n * (rng.upper - rng.lower)
    high = low + params.high_n * (rng.upper - low)
    return PhysicalPulse(
        period=period, width=width, delay=delay, low=low, high=high, horizon=horizon
    )


def uniform_grid(horizon: float, dt: float) -> np.ndarray:
    """Uniform grid {0, dt, 2*dt, ..., horizon}."""
    if not (0 < dt <= horizon):
        raise ValueError(f"dt must satisfy 0 < dt <= horizon, got dt={dt}")
    n = int(round(horizon / dt))
    return np.arange(n + 1, dtype=float) * dt


def pulse_values(pulse: PhysicalPulse, times: np.ndarray) -> np.ndarray:
    """Evaluate a physical pulse on a set of time instants.

    The signal holds ``low`` before the delay; afterwards each period opens
    with a ``high`` segment of the given width.  A zero period, or a delay
    reaching the horizon, collapses the pulse to constant ``low``.
    """
    times = np.asarray(times, dtype=float)
    out = np.full(times.shape, pulse.low)
    if pulse.period <= 0.0 or pulse.delay >= pulse.horizon:
        return out
    tol = _PHASE_TOL * max(pulse.period, 1.0)
    tau = np.mod(times - pulse.delay, pulse.period)
    # Snap phases landing just short of a period boundary back to zero.
    tau = np.where(pulse.period - tau <= tol, 0.0, tau)
    in_width = (tau < pulse.width - tol) | ((tau <= tol) & (pulse.width > 0))
    out[(times >= pulse.delay) & in_width] = pulse.high
    return out


@dataclass(frozen=True)
class Signal:
    """Multi-channel piecewise-constant time series on a uniform grid."""

    times: np.ndarray
    channels: tuple[np.ndarray, ...]
    channel_names: tuple[str, ...]

    def __post_init__(self) -> None:
        times = np.ascontiguousarray(self.times, dtype=float)
        channels = tuple(np.ascontiguousarray(c, dtype=float) for c in self.channels)
        names = tuple(self.channel_names)
        if times.ndim != 1 or len(times) < 2:
            raise ValueError("times must be a 1-D grid with at least 2 instants")
        if times[0] != 0.0:
            raise ValueError(f"grid must start at 0, got {times[0]}")
        steps = np.diff(times)
        if np.any(steps <= 0):
            raise ValueError("times must be strictly increasing")
        dt = steps[0]
        if not np.allclose(steps, dt, rtol=1e-9, atol=1e-12):
            raise ValueError("times must form a uniform grid")
        if len(names) != len(channels):
            raise ValueError("channel_names count must match channels")
        if len(set(names)) != len(names):
            raise ValueError(f"channel names must be unique, got {names}")
        for name, c in zip(names, channels):
            if c.ndim != 1 or len(c) != len(times):
                raise ValueError(f"channel {name!r} length does not match times")
        times.flags.writeable = False
        for c in channels:
            c.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "channel_names", names)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def end_time(self) -> float:
        return float(self.times[-1])

    def channel(self, name: str) -> np.ndarray:
        try:
            return self.channels[self.channel_names.index(name)]
        except ValueError:
            raise KeyError(f"no channel named {name!r}; have {self.channel_names}")


def merge_signals(a: Signal, b: Signal) -> Signal:
    """Combine two signals sharing the same grid into one multi-channel signal."""
    if len(a.times) != len(b.times) or not np.array_equal(a.times, b.times):
        raise ValueError("signals must share an identical time grid")
    return Signal(
        times=a.times,
        channels=a.channels + b.channels,
        channel_names=a.channel_names + b.channel_names,
    )


def synthesize_pulse(
    params: PulseParams,
    rng: InputRange,
    horizon: float,
    dt: float,
    name: str = "u",
) -> Signal:
    """Synthesize a single-channel pulse-train signal on a uniform grid."""
    pulse = denormalize(params, rng, horizon)
    times = uniform_grid(horizon, dt)
    values = pulse_values(pulse, times)
    return Signal(times=times, channels=(values,), channel_names=(name,))


def sample_at(signal: Signal, t: float) -> tuple[float, ...]:
    """Zero-order-hold sample of every channel at time ``t``."""
    if not (0.0 <= t <= signal.end_time):
        raise ValueError(f"t={t} outside signal domain [0, {signal.end_time}]")
    idx = int(np.searchsorted(signal.times, t, side="right")) - 1
    return tuple(float(c[idx]) for c in signal.channels)
