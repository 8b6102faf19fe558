"""Virtual memristor crossbar: addressable read/pulse access with read noise.

Two biasing schemes are supported. With selectors, a pulse reaches only the
addressed device. Without selectors, every other device on the selected
wordline and bitline sees a half-magnitude pulse of the same polarity for
the full pulse duration (half-select disturb).

Reads are non-disturbing and return R_true * (1 + eps) with
eps ~ Normal(0, read_noise_frac) drawn from a dedicated substream of the
array's seed, so interleaving reads never perturbs initialisation.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from numba import njit

from .device import DeviceParams, pulse_step_count, _step_n
from .errors import AddressError, ConfigError


class Biasing(str, enum.Enum):
    SELECTOR_BASED = "selector"
    SELECTORLESS = "selectorless"


@dataclass(frozen=True)
class ArrayConfig:
    rows: int
    cols: int
    biasing: Biasing
    read_noise_frac: float
    init_R: float
    init_R_variation: float
    dt: float
    device_params: DeviceParams
    seed: int

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ConfigError(f"array must be at least 1x1, got {self.rows}x{self.cols}")
        if self.read_noise_frac < 0:
            raise ConfigError("read_noise_frac must be >= 0")
        if self.init_R_variation < 0:
            raise ConfigError("init_R_variation must be >= 0")
        if not self.init_R - self.init_R_variation > 0:
            raise ConfigError("init_R - init_R_variation must stay positive")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")


@njit(cache=True)
def _pulse_selectorless(R, w, b, v, n, dt, Ap, An, tp, tn, a0p, a1p, a0n, a1n):
    # Selected device gets the full pulse; wordline/bitline neighbours get
    # v/2 for the same duration. Devices are independent under a constant
    # voltage, so integrating each for its full n steps is exact.
    rows, cols = R.shape
    R[w, b] = _step_n(R[w, b], v, n, dt, Ap, An, tp, tn, a0p, a1p, a0n, a1n)
    hv = v / 2.0
    for j in range(cols):
        if j != b:
            R[w, j] = _step_n(R[w, j], hv, n, dt, Ap, An, tp, tn, a0p, a1p, a0n, a1n)
    for i in range(rows):
        if i != w:
            R[i, b] = _step_n(R[i, b], hv, n, dt, Ap, An, tp, tn, a0p, a1p, a0n, a1n)


class CrossbarArray:
    """Grid of virtual devices with deterministic, seeded noise streams."""

    def __init__(self, config: ArrayConfig, _R: np.ndarray | None = None):
        self.config = config
        rng_init = np.random.default_rng([config.seed, 0])
        self._rng_read = np.random.default_rng([config.seed, 1])
        if _R is not None:
            if _R.shape != (config.rows, config.cols):
                raise ConfigError("resistance matrix shape does not match config")
            if not (_R > 0).all():
                raise ConfigError("all resistances must be positive")
            self.R = _R.astype(np.float64).copy()
        else:
            lo = config.init_R - config.init_R_variation
            hi = config.init_R + config.init_R_variation
            self.R = rng_init.uniform(lo, hi, size=(config.rows, config.cols))

    def _check_address(self, w: int, b: int):
        if not (0 <= w < self.config.rows and 0 <= b < self.config.cols):
            raise AddressError(
                f"address ({w},{b}) outside {self.config.rows}x{self.config.cols} array")

    def read(self, w: int, b: int) -> float:
        """Noisy, non-disturbing read of device (w, b)."""
        self._check_address(w, b)
        eps = self._rng_read.normal(0.0, self.config.read_noise_frac)
        return float(self.R[w, b] * (1.0 + eps))

    def read_block(self, ws: np.ndarray, bs: np.ndarray) -> np.ndarray:
        """Noisy read of many devices in one draw, in the given order."""
        eps = self._rng_read.normal(0.0, self.config.read_noise_frac, size=len(ws))
        return self.R[ws, bs] * (1.0 + eps)

    def draw_read_noise(self, shape) -> np.ndarray:
        """Expose the read-noise substream for block-structured consumers."""
        return self._rng_read.normal(0.0, self.config.read_noise_frac, size=shape)

    def pulse(self, w: int, b: int, v: float, pw: float) -> None:
        """Apply a pulse to device (w, b) under the configured biasing."""
        self._check_address(w, b)
        n = pulse_step_count(pw, self.config.dt)
        if n == 0:
            return
        p = self.config.device_params.as_tuple()
        if self.config.biasing is Biasing.SELECTORLESS:
            _pulse_selectorless(self.R, w, b, v, n, self.config.dt, *p)
        else:
            self.R[w, b] = _step_n(self.R[w, b], v, n, self.config.dt, *p)

    def snapshot(self) -> np.ndarray:
        """Noiseless copy of all true resistances, row-major."""
        return self.R.copy()


def new_array(config: ArrayConfig) -> CrossbarArray:
    """Build an array with R drawn uniformly from init_R +/- variation."""
    return CrossbarArray(config)


def array_from_snapshot(config: ArrayConfig, R: np.ndarray) -> CrossbarArray:
    """Rebuild an array from a snapshot matrix (same noise substreams)."""
    return CrossbarArray(config, _R=np.asarray(R, dtype=np.float64))


def save_snapshot_csv(path, R: np.ndarray) -> None:
    """Rows are wordlines; values in ohms with 6 significant digits."""
    with open(path, "w", encoding="utf-8") as f:
        for row in np.atleast_2d(R):
            f.write(",".join(f"{x:.6g}" for x in row))
            f.write("\n")


def load_snapshot_csv(path) -> np.ndarray:
    rows = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                rows.append([float(x) for x in line.split(",")])
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise ConfigError(f"malformed snapshot file: {path}")
    return np.asarray(rows, dtype=np.float64)
