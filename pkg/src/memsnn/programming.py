"""Weight-conductance mapping and model-in-the-loop pulse programming.

Weights are linear in conductance, W = a*G + b with G = 1/R. Programming a
target resistance is done by exhaustive search over a finite pulse menu:
every option is simulated on a scratch device initialised to the freshly
read resistance, and the option landing closest to the target is applied.
The predict-write-verify loop repeats until the read-back resistance is
within r_tolerance of the target or max_steps pulses have been issued. The
tolerance check runs before the first pulse, so sub-tolerance requests
issue no pulse at all.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .crossbar import Biasing, CrossbarArray, _pulse_selectorless
from .device import DeviceParams, PulseSpec, pulse_step_count, _step_n
from .errors import ConfigError, MappingDomainError


@dataclass(frozen=True)
class LinearMap:
    """W = a * (1/R) + b; a in ohm-weights, b dimensionless."""

    a: float
    b: float

    def __post_init__(self):
        if self.a == 0:
            raise ConfigError("mapping scale a must be nonzero")


@dataclass(frozen=True)
class PulseMenu:
    """Ordered programming options; order is the documented tie-break."""

    options: tuple[PulseSpec, ...]

    def __post_init__(self):
        if not self.options:
            raise ConfigError("pulse menu must not be empty")
        for opt in self.options:
            if not opt.pulsewidth > 0:
                raise ConfigError("menu pulsewidths must be positive")

    def as_arrays(self, dt: float):
        volts = np.array([o.voltage for o in self.options], dtype=np.float64)
        nsteps = np.array([pulse_step_count(o.pulsewidth, dt) for o in self.options],
                          dtype=np.int64)
        return volts, nsteps


@dataclass(frozen=True)
class ProgramConfig:
    r_tolerance: float
    max_steps: int
    dt: float
    menu: PulseMenu

    def __post_init__(self):
        if self.r_tolerance < 0:
            raise ConfigError("r_tolerance must be >= 0")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")


@dataclass
class ProgramReport:
    pulses_issued: int
    final_R: float
    converged: bool
    requested_R: float


def weight_of_resistance(map: LinearMap, R):
    """Weight read from a resistance: W = a/R + b. Accepts arrays."""
    return map.a / R + map.b


def resistance_of_weight(map: LinearMap, W):
    """Exact inverse of weight_of_resistance: R = a/(W - b)."""
    G = (np.asarray(W) - map.b) / map.a
    if not (G > 0).all():
        raise MappingDomainError(
            f"weight {W} implies non-positive conductance under map {map}")
    R = map.a / (np.asarray(W, dtype=np.float64) - map.b)
    return float(R) if np.ndim(W) == 0 else R


def derive_map(R_min: float, R_max: float) -> LinearMap:
    """Map sending G_max = 1/R_min to weight 1 and G_min = 1/R_max to 0."""
    if not 0 < R_min < R_max:
        raise ConfigError(f"need 0 < R_min < R_max, got ({R_min}, {R_max})")
    G_max = 1.0 / R_min
    G_min = 1.0 / R_max
    a = 1.0 / (G_max - G_min)
    return LinearMap(a=a, b=-G_min * a)


@njit(cache=True)
def _plan_index(R0, Rt, volts, nsteps, dt, Ap, An, tp, tn, a0p, a1p, a0n, a1n):
    # Simulate every menu option from R0; first strict minimum of the
    # distance to Rt wins (earliest menu position on ties).
    best = 0
    best_d = np.inf
    for o in range(len(volts)):
        Rf = _step_n(R0, volts[o], nsteps[o], dt, Ap, An, tp, tn, a0p, a1p, a0n, a1n)
        d = abs(Rf - Rt)
        if d < best_d:
            best_d = d
            best = o
    return best


@njit(cache=True)
def _program_batch(R, ws, bs, Rts, tol, max_steps, noise, volts, nsteps, dt,
                   selectorless, Ap, An, tp, tn, a0p, a1p, a0n, a1n):
    # Predict-write-verify for a batch of synapses, in the order given.
    # noise[s, k] is the relative read error of synapse s's k-th read.
    n = len(ws)
    pulses = np.zeros(n, dtype=np.int64)
    converged = np.zeros(n, dtype=np.bool_)
    for s in range(n):
        w = ws[s]
        b = bs[s]
        Rt = Rts[s]
        for it in range(max_steps + 1):
            Rnow = R[w, b] * (1.0 + noise[s, it])
            if abs(Rnow - Rt) / Rt <= tol:
                converged[s] = True
                break
            if pulses[s] >= max_steps:
                break
            o = _plan_index(Rnow, Rt, volts, nsteps, dt,
                            Ap, An, tp, tn, a0p, a1p, a0n, a1n)
            if selectorless:
                _pulse_selectorless(R, w, b, volts[o], nsteps[o], dt,
                                    Ap, An, tp, tn, a0p, a1p, a0n, a1n)
            else:
                R[w, b] = _step_n(R[w, b], volts[o], nsteps[o], dt,
                                  Ap, An, tp, tn, a0p, a1p, a0n, a1n)
            pulses[s] += 1
    return pulses, converged


def plan_pulse(params: DeviceParams, R_current: float, R_target: float,
               menu: PulseMenu, dt: float) -> PulseSpec:
    """Pick the menu option whose simulated endpoint lands nearest the target.

    Dead-zone options simply leave the scratch device at R_current and
    compete with that distance.
    """
    if not (R_current > 0 and R_target > 0):
        raise ConfigError("resistances must be positive")
    volts, nsteps = menu.as_arrays(dt)
    idx = _plan_index(R_current, R_target, volts, nsteps, dt, *params.as_tuple())
    return menu.options[idx]


def write_verify(array: CrossbarArray, w: int, b: int, R_target: float,
                 cfg: ProgramConfig) -> ProgramReport:
    """Program device (w, b) toward R_target through the array interface.

    Each iteration reads the device (noisy), stops if the read value is
    within r_tolerance of the target, otherwise plans from the read value
    and pulses under the array's biasing mode (selectorless disturbs
    line-sharing neighbours).
    """
    if not R_target > 0:
        raise ConfigError("R_target must be positive")
    params = array.config.device_params
    pulses = 0
    R_now = array.read(w, b)
    while True:
        if abs(R_now - R_target) / R_target <= cfg.r_tolerance:
            return ProgramReport(pulses, R_now, True, R_target)
        if pulses >= cfg.max_steps:
            return ProgramReport(pulses, R_now, False, R_target)
        choice = plan_pulse(params, R_now, R_target, cfg.menu, cfg.dt)
        array.pulse(w, b, choice.voltage, choice.pulsewidth)
        pulses += 1
        R_now = array.read(w, b)


def program_batch(array: CrossbarArray, ws: np.ndarray, bs: np.ndarray,
                  R_targets: np.ndarray, cfg: ProgramConfig):
    """Run write_verify over many synapses with block-drawn read noise.

    Per-synapse semantics are identical to write_verify; the read noise for
    the whole batch is drawn as one (n, max_steps+1) block from the array's
    read stream, consumed row-per-synapse in the order given. Synapses are
    processed strictly sequentially, so selectorless disturb is applied in
    the caller's (row-major) order.
    """
    noise = array.draw_read_noise((len(ws), cfg.max_steps + 1))
    volts, nsteps = cfg.menu.as_arrays(cfg.dt)
    return _program_batch(
        array.R, ws.astype(np.int64), bs.astype(np.int64),
        np.asarray(R_targets, dtype=np.float64),
        cfg.r_tolerance, cfg.max_steps, noise, volts, nsteps, cfg.dt,
        array.config.biasing is Biasing.SELECTORLESS,
        *array.config.device_params.as_tuple())
