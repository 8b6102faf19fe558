"""Empirical switching-rate model of a voltage-driven memristive device.

The resistive state R evolves under a bias voltage v as

    dR/dt = A_p * (exp(|v|/t_p) - 1) * (r_p(v) - R)^2    if v > 0 and R < r_p(v)
    dR/dt = A_n * (exp(|v|/t_n) - 1) * (R - r_n(v))^2    if v <= 0 and R >= r_n(v)
    dR/dt = 0                                            otherwise (dead zone)

with voltage-dependent boundary resistances

    r_p(v) = a0_p + a1_p * v      (v > 0)
    r_n(v) = a0_n + a1_n * v      (v <= 0).

State updates use explicit Euler with a fixed step dt. The quadratic term
makes the rate vanish at the boundary, so the continuous model saturates;
a discrete Euler step can overshoot, which we clamp to the boundary value
to keep the saturation semantics at any dt.

The fit is meaningful only while the boundary lines stay positive; keep
|v| below a0_n/|a1_n| (resp. a0_p/|a1_p|) on the negative (positive) side
or the saturation floor itself goes negative.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from numba import njit

from .errors import ConfigError

DEFAULT_DT = 1e-6


@dataclass(frozen=True)
class DeviceParams:
    """The eight fitted constants of the switching-rate model."""

    A_p: float
    A_n: float
    t_p: float
    t_n: float
    a0_p: float
    a1_p: float
    a0_n: float
    a1_n: float

    def __post_init__(self):
        if not (self.t_p > 0 and self.t_n > 0):
            raise ConfigError("device constants t_p and t_n must be positive")
        if not (self.A_p > 0 and self.A_n < 0):
            warnings.warn(
                "expected A_p > 0 and A_n < 0 for monotone switching; "
                f"got A_p={self.A_p}, A_n={self.A_n}",
                stacklevel=2,
            )

    def as_tuple(self) -> tuple:
        return (self.A_p, self.A_n, self.t_p, self.t_n,
                self.a0_p, self.a1_p, self.a0_n, self.a1_n)


@dataclass
class DeviceState:
    """A single device's resistive state, in ohms."""

    R: float

    def __post_init__(self):
        if not self.R > 0:
            raise ConfigError(f"resistive state must be positive, got {self.R}")


@dataclass(frozen=True)
class PulseSpec:
    """One programming pulse: signed magnitude (V) and width (s)."""

    voltage: float
    pulsewidth: float

    def __post_init__(self):
        if self.pulsewidth < 0:
            raise ConfigError(f"pulsewidth must be >= 0, got {self.pulsewidth}")


@njit(cache=True)
def _boundary(v, a0p, a1p, a0n, a1n):
    if v > 0.0:
        return a0p + a1p * v
    return a0n + a1n * v


@njit(cache=True)
def _rate(R, v, Ap, An, tp, tn, a0p, a1p, a0n, a1n):
    if v > 0.0:
        r = a0p + a1p * v
        if R < r:
            return Ap * math.expm1(abs(v) / tp) * (r - R) * (r - R)
        return 0.0
    r = a0n + a1n * v
    if R >= r:
        return An * math.expm1(abs(v) / tn) * (R - r) * (R - r)
    return 0.0


@njit(cache=True)
def _step_n(R, v, n, dt, Ap, An, tp, tn, a0p, a1p, a0n, a1n):
    # n Euler steps at constant v, clamped at the boundary on overshoot.
    if v > 0.0:
        r = a0p + a1p * v
        k = Ap * math.expm1(abs(v) / tp)
        for _ in range(n):
            if R < r:
                d = r - R
                R2 = R + k * d * d * dt
                R = r if R2 > r else R2
        return R
    r = a0n + a1n * v
    k = An * math.expm1(abs(v) / tn)
    for _ in range(n):
        if R >= r:
            d = R - r
            R2 = R + k * d * d * dt
            R = r if R2 < r else R2
    return R


def boundary(params: DeviceParams, v: float) -> float:
    """Boundary resistance the state approaches under bias v."""
    return _boundary(v, params.a0_p, params.a1_p, params.a0_n, params.a1_n)


def switching_rate(params: DeviceParams, R: float, v: float) -> float:
    """dR/dt at state R under bias v; exactly 0 in the dead zone."""
    return _rate(R, v, *params.as_tuple())


def step_dt(state: DeviceState, params: DeviceParams, v: float,
            dt: float = DEFAULT_DT) -> DeviceState:
    """One explicit-Euler step of width dt, clamped at the boundary."""
    if not dt > 0:
        raise ConfigError(f"dt must be positive, got {dt}")
    return DeviceState(_step_n(state.R, v, 1, dt, *params.as_tuple()))


def pulse_step_count(pulsewidth: float, dt: float) -> int:
    """Number of Euler steps for a pulse: nearest integer, at least 1 if the
    width is nonzero."""
    if pulsewidth == 0:
        return 0
    n = int(math.floor(pulsewidth / dt + 0.5))
    return max(n, 1)


def apply_pulse(state: DeviceState, params: DeviceParams, pulse: PulseSpec,
                dt: float = DEFAULT_DT) -> DeviceState:
    """Apply one pulse as sequential Euler steps; returns the final state."""
    if not dt > 0:
        raise ConfigError(f"dt must be positive, got {dt}")
    n = pulse_step_count(pulse.pulsewidth, dt)
    if n == 0:
        return DeviceState(state.R)
    return DeviceState(_step_n(state.R, pulse.voltage, n, dt, *params.as_tuple()))
