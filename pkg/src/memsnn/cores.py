"""Neuron/plasticity core pairs: LIF forward dynamics with backprop deltas,
plus the winner-take-all softmax/cross-entropy variant.

Membrane update (one discrete time step):

    V_t = W x_t + alpha * V_{t-1} * (1 - y_{t-1})
    y_t = step(V_t - V_th)        step(z) = 1 if z > 0 else 0

The step function has no usable derivative, so backprop replaces h' with
noise sampled uniformly from [0, noise_scale], drawn once per plasticity
event and shared between the output-layer delta and the back-propagated
recursion.

Squared-error rule (no WTA):

    E       = 1/(2N) * sum_i (y_i - yhat_i)^2
    delta_K = 1/N * (y_K - yhat) * h'(V_K - V_th)
    delta_k = (W_{k+1}^T delta_{k+1}) * h'(V_k - V_th)
    dW_k    = -eta * outer(delta_k, x_k)

WTA rule: a softmax over the gated voltages Z = V * y constrains the output
layer to at most one firing neuron, with cross-entropy cost:

    S       = softmax(V * y)
    E       = -ln(S_j)            j = target neuron
    delta_K = (S - yhat) * (y + V * h'(V - V_th))

and the same hidden-layer recursion.

Cores register by name; the built-ins are "lif_bp" and "lif_bp_wta".
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError, TargetError


@dataclass(frozen=True)
class CoreParams:
    V_th: float
    alpha: float
    eta: float
    noise_scale: float
    seed: int

    def __post_init__(self):
        if self.noise_scale < 0:
            raise ConfigError("noise_scale must be >= 0")
        if self.eta < 0:
            raise ConfigError("eta must be >= 0")
        if not -1.0 <= self.alpha <= 1.0:
            raise ConfigError(f"leakage alpha must lie in [-1, 1], got {self.alpha}")
        if not 0.0 <= self.alpha <= 1.0:
            warnings.warn(
                f"leakage alpha={self.alpha} outside [0, 1]; using it as configured",
                stacklevel=2,
            )


@dataclass
class LayerState:
    V: np.ndarray
    y: np.ndarray
    x: np.ndarray
    W_read: np.ndarray
    fire_history: list = field(default_factory=list)


@dataclass
class WtaState:
    S: np.ndarray
    y_hat: np.ndarray
    Z: np.ndarray

    def __post_init__(self):
        if (self.S < 0).any() or abs(float(self.S.sum()) - 1.0) > 1e-9:
            raise ConfigError("softmax vector must be non-negative and sum to 1")
        nz = int(np.count_nonzero(self.y_hat))
        if nz > 1 or (nz == 1 and not np.isclose(self.y_hat.max(), 1.0)):
            raise TargetError("y_hat must be one-hot or all-zero")


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max())
    return e / e.sum()


def lif_forward(params: CoreParams, prev: LayerState | None, x: np.ndarray,
                W_read: np.ndarray) -> LayerState:
    """One LIF step. A neuron that fired last step contributes no leak term."""
    x = np.asarray(x, dtype=np.float64)
    if W_read.ndim != 2 or W_read.shape[1] != x.shape[0]:
        raise ShapeError(
            f"weight matrix {W_read.shape} does not accept input of size {x.shape[0]}")
    n = W_read.shape[0]
    if prev is None:
        V_prev = np.zeros(n)
        y_prev = np.zeros(n)
        history = []
    else:
        if prev.V.shape[0] != n:
            raise ShapeError("previous state size does not match weight matrix")
        V_prev, y_prev, history = prev.V, prev.y, prev.fire_history
    V = W_read @ x + params.alpha * V_prev * (1.0 - y_prev)
    y = (V - params.V_th > 0).astype(np.float64)
    return LayerState(V=V, y=y, x=x, W_read=W_read, fire_history=history + [y])


def wta_select(V: np.ndarray, y: np.ndarray):
    """Softmax over the gated voltages; returns (S, winner index).

    Ties in S break toward the largest membrane voltage, then the lowest
    index, so an all-quiet layer still yields a usable prediction.
    """
    if V.shape != y.shape:
        raise ShapeError("V and y must have the same shape")
    S = softmax(V * y)
    cand = np.flatnonzero(S == S.max())
    if len(cand) > 1:
        cand = cand[V[cand] == V[cand].max()]
    return S, int(cand[0])


def wta_fire_vector(S: np.ndarray, winner: int) -> np.ndarray:
    """Post-selection fire vector: one-hot at the winner."""
    out = np.zeros_like(S)
    out[winner] = 1.0
    return out


def surrogate_deriv(params: CoreParams, shape, rng: np.random.Generator) -> np.ndarray:
    """Noise stand-in for h': uniform on [0, noise_scale], per element."""
    return rng.uniform(0.0, params.noise_scale, size=shape)


def _backprop_hidden(deltas_out, states, hprime):
    # Walk from the output layer down, filling hidden deltas.
    deltas = [None] * len(states)
    deltas[-1] = deltas_out
    for k in range(len(states) - 2, -1, -1):
        W_up = states[k + 1].W_read
        deltas[k] = (W_up.T @ deltas[k + 1]) * hprime[k]
    return deltas


def bp_deltas_mse(states: list[LayerState], y_hat: np.ndarray, params: CoreParams,
                  hprime: list[np.ndarray]):
    """Squared-error deltas; returns (per-layer dW list, cost)."""
    out = states[-1]
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if out.y.shape != y_hat.shape:
        raise ShapeError(
            f"target size {y_hat.shape[0]} does not match output layer {out.y.shape[0]}")
    N = y_hat.shape[0]
    delta_K = (out.y - y_hat) / N * hprime[-1]
    deltas = _backprop_hidden(delta_K, states, hprime)
    dW = [-params.eta * np.outer(d, s.x) for d, s in zip(deltas, states)]
    cost = float(((out.y - y_hat) ** 2).sum() / (2.0 * N))
    return dW, cost


def bp_deltas_wta(states: list[LayerState], wta: WtaState, params: CoreParams,
                  hprime: list[np.ndarray]):
    """Softmax/cross-entropy deltas; returns (per-layer dW list, cost)."""
    out = states[-1]
    if int(np.count_nonzero(wta.y_hat)) != 1:
        raise TargetError("WTA training target must be one-hot")
    delta_K = (wta.S - wta.y_hat) * (out.y + out.V * hprime[-1])
    deltas = _backprop_hidden(delta_K, states, hprime)
    dW = [-params.eta * np.outer(d, s.x) for d, s in zip(deltas, states)]
    j = int(np.argmax(wta.y_hat))
    cost = float(-np.log(wta.S[j]))
    return dW, cost


class LifBpCore:
    """LIF forward pass with squared-error backprop; prediction is the
    highest-voltage neuron."""

    name = "lif_bp"

    def __init__(self, params: CoreParams):
        self.params = params
        self._rng = np.random.default_rng([params.seed, 2])

    def forward_pass(self, x: np.ndarray, weights: list[np.ndarray]) -> list[LayerState]:
        states = []
        for W in weights:
            states.append(lif_forward(self.params, None, x, W))
            x = states[-1].y
        return states

    def select(self, states: list[LayerState]):
        out = states[-1]
        S, winner = wta_select(out.V, np.ones_like(out.y))
        return None, winner

    def sample_hprime(self, states):
        return [surrogate_deriv(self.params, s.V.shape, self._rng) for s in states]

    def deltas(self, states, label: int, hprime):
        y_hat = np.zeros(states[-1].y.shape[0])
        y_hat[label] = 1.0
        return bp_deltas_mse(states, y_hat, self.params, hprime)


class LifBpWtaCore:
    """LIF forward pass with WTA softmax selection and cross-entropy backprop."""

    name = "lif_bp_wta"

    def __init__(self, params: CoreParams):
        self.params = params
        self._rng = np.random.default_rng([params.seed, 2])

    def forward_pass(self, x: np.ndarray, weights: list[np.ndarray]) -> list[LayerState]:
        states = []
        for W in weights:
            states.append(lif_forward(self.params, None, x, W))
            x = states[-1].y
        return states

    def select(self, states: list[LayerState]):
        out = states[-1]
        S, winner = wta_select(out.V, out.y)
        return S, winner

    def sample_hprime(self, states):
        return [surrogate_deriv(self.params, s.V.shape, self._rng) for s in states]

    def deltas(self, states, label: int, hprime):
        out = states[-1]
        S, _ = wta_select(out.V, out.y)
        y_hat = np.zeros(out.y.shape[0])
        y_hat[label] = 1.0
        wta = WtaState(S=S, y_hat=y_hat, Z=out.V * out.y)
        return bp_deltas_wta(states, wta, self.params, hprime)


CORE_REGISTRY = {
    LifBpCore.name: LifBpCore,
    LifBpWtaCore.name: LifBpWtaCore,
}


def register_core(name: str, factory) -> None:
    """Register a user-defined core under a new name."""
    if name in CORE_REGISTRY:
        raise ConfigError(f"core name '{name}' is already registered")
    CORE_REGISTRY[name] = factory


def get_core(name: str, params: CoreParams):
    try:
        factory = CORE_REGISTRY[name]
    except KeyError:
        raise ConfigError(
            f"unknown core '{name}'; available: {sorted(CORE_REGISTRY)}") from None
    return factory(params)
