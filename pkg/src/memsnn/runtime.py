"""Network assembly and the inference/plasticity loop.

One presentation ("epoch") is one stimulus vector: weights are read from the
array (noisy), the core runs its forward pass and selection, the plasticity
rule produces requested weight changes, and each changed synapse is
programmed through the predict-write-verify loop in row-major (wordline,
bitline) order. Evaluation skips the plasticity phase entirely and leaves
device states untouched.

Baseline mode swaps the array for ideal software weights (W += dW directly,
no mapping, no pulses, no read noise); everything else is identical, and a
virtual resistance view of the weights stays available for probe traces.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .cores import get_core
from .crossbar import ArrayConfig, CrossbarArray, new_array
from .errors import ConfigError, MappingDomainError, TopologyError
from .programming import (LinearMap, ProgramConfig, program_batch,
                          resistance_of_weight, weight_of_resistance)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Sample:
    spikes: np.ndarray
    label: int


@dataclass
class TraceRecord:
    epoch: int
    predicted: int
    label: int
    correct: bool
    cost: float
    pulses_issued: int
    snapshot_ref: str | None = None


class NetworkTopology:
    """Synapse-to-device map. Every (pre, post) pair of every layer appears
    exactly once and every device address is distinct."""

    def __init__(self, layer_sizes, layers):
        # layers: per layer, dict of int arrays {pre, post, w, b} sorted
        # row-major by (w, b).
        self.layer_sizes = list(layer_sizes)
        self.layers = layers

    @classmethod
    def from_rows(cls, rows):
        """Build and validate from (layer, pre, post, wordline, bitline) rows."""
        if not rows:
            raise TopologyError("connectivity map is empty")
        by_layer = {}
        for r in rows:
            by_layer.setdefault(r[0], []).append(r[1:])
        n_layers = max(by_layer) + 1
        if sorted(by_layer) != list(range(n_layers)):
            raise TopologyError(f"layer indices must be contiguous from 0, got {sorted(by_layer)}")

        seen_dev = {}
        layer_sizes = None
        layers = []
        for l in range(n_layers):
            arr = np.asarray(by_layer[l], dtype=np.int64)
            pre, post, w, b = arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3]
            n_pre = int(pre.max()) + 1
            n_post = int(post.max()) + 1
            if len(arr) != n_pre * n_post:
                raise TopologyError(
                    f"layer {l} maps {len(arr)} synapses, expected {n_pre}x{n_post}")
            if len({(p, q) for p, q in zip(pre, post)}) != len(arr):
                raise TopologyError(f"layer {l} maps a (pre, post) pair more than once")
            for i, (wi, bi) in enumerate(zip(w, b)):
                key = (int(wi), int(bi))
                if key in seen_dev:
                    raise TopologyError(
                        f"device {key} mapped twice: layer {seen_dev[key][0]} synapse "
                        f"{seen_dev[key][1]} and layer {l} synapse ({pre[i]},{post[i]})")
                seen_dev[key] = (l, (int(pre[i]), int(post[i])))
            if layer_sizes is None:
                layer_sizes = [n_pre, n_post]
            else:
                if n_pre != layer_sizes[-1]:
                    raise TopologyError(
                        f"layer {l} expects {layer_sizes[-1]} inputs, found {n_pre}")
                layer_sizes.append(n_post)
            order = np.lexsort((b, w))
            layers.append({"pre": pre[order], "post": post[order],
                           "w": w[order], "b": b[order]})
        return cls(layer_sizes, layers)

    def validate_bounds(self, rows: int, cols: int):
        for l, lay in enumerate(self.layers):
            if lay["w"].max() >= rows or lay["b"].max() >= cols or \
               lay["w"].min() < 0 or lay["b"].min() < 0:
                raise TopologyError(
                    f"layer {l} maps addresses outside the {rows}x{cols} array")

    @property
    def n_synapses(self) -> int:
        return sum(len(lay["w"]) for lay in self.layers)


def default_connectivity(layer_sizes, rows: int, cols: int):
    """Default map: flat synapse index s (layer-major, then post*n_pre+pre)
    lands on wordline s // cols, bitline s % cols."""
    total = sum(layer_sizes[l] * layer_sizes[l + 1] for l in range(len(layer_sizes) - 1))
    if total > rows * cols:
        raise TopologyError(f"{total} synapses do not fit a {rows}x{cols} array")
    out = []
    s = 0
    for l in range(len(layer_sizes) - 1):
        n_pre = layer_sizes[l]
        for post in range(layer_sizes[l + 1]):
            for pre in range(n_pre):
                out.append((l, pre, post, s // cols, s % cols))
                s += 1
    return out


def read_weights(array: CrossbarArray, topo: NetworkTopology, map: LinearMap):
    """Per-layer weight matrices from one row-major noisy read of all
    mapped devices."""
    ws = np.concatenate([lay["w"] for lay in topo.layers])
    bs = np.concatenate([lay["b"] for lay in topo.layers])
    vals = weight_of_resistance(map, array.read_block(ws, bs))
    mats = []
    ofs = 0
    for l, lay in enumerate(topo.layers):
        n = len(lay["w"])
        W = np.zeros((topo.layer_sizes[l + 1], topo.layer_sizes[l]))
        W[lay["post"], lay["pre"]] = vals[ofs:ofs + n]
        mats.append(W)
        ofs += n
    return mats


@dataclass
class TrainResult:
    records: list
    accuracy_curve: list
    probe_R: dict = field(default_factory=dict)
    probe_last_pulse: dict = field(default_factory=dict)
    clamp_events: int = 0
    final_train_acc: float = float("nan")


class Network:
    """A spiking network whose synapses live on a virtual crossbar (or, in
    baseline mode, in an ideal software weight matrix)."""

    def __init__(self, topology: NetworkTopology, array_config: ArrayConfig,
                 core_name: str, core_params, map: LinearMap,
                 prog_cfg: ProgramConfig, mode: str = "memristor",
                 array: CrossbarArray | None = None):
        if mode not in ("memristor", "baseline"):
            raise ConfigError(f"mode must be 'memristor' or 'baseline', got '{mode}'")
        topology.validate_bounds(array_config.rows, array_config.cols)
        self.topology = topology
        self.array_config = array_config
        self.core = get_core(core_name, core_params)
        self.map = map
        self.prog_cfg = prog_cfg
        self.mode = mode
        self.array = array if array is not None else new_array(array_config)
        self.last_clamp_events = 0
        # software weights (baseline mode), derived from the array's
        # noiseless initial state so both modes start identically
        self._soft_W = None
        if mode == "baseline":
            self._soft_W = [weight_of_resistance(map, self._layer_R(l))
                            for l in range(len(topology.layers))]

    def _layer_R(self, l: int) -> np.ndarray:
        lay = self.topology.layers[l]
        R = np.zeros((self.topology.layer_sizes[l + 1], self.topology.layer_sizes[l]))
        R[lay["post"], lay["pre"]] = self.array.R[lay["w"], lay["b"]]
        return R

    def current_weights(self):
        if self.mode == "baseline":
            return [W.copy() for W in self._soft_W]
        return read_weights(self.array, self.topology, self.map)

    def virtual_resistance(self, layer: int, pre: int, post: int) -> float:
        """Resistance view of one synapse: the device's true state in
        memristor mode, the mapped software weight in baseline mode."""
        if self.mode == "baseline":
            return float(resistance_of_weight(self.map, self._soft_W[layer][post, pre]))
        lay = self.topology.layers[layer]
        i = np.flatnonzero((lay["pre"] == pre) & (lay["post"] == post))
        if len(i) == 0:
            raise TopologyError(f"synapse ({pre},{post}) not mapped in layer {layer}")
        return float(self.array.R[lay["w"][i[0]], lay["b"][i[0]]])

    def snapshot(self) -> np.ndarray:
        """Array state; in baseline mode, virtual resistances laid onto the
        device grid so the same export path serves both modes."""
        if self.mode == "baseline":
            R = self.array.snapshot()
            for l, lay in enumerate(self.topology.layers):
                R[lay["w"], lay["b"]] = resistance_of_weight(
                    self.map, self._soft_W[l][lay["post"], lay["pre"]])
            return R
        return self.array.snapshot()

    def _forward(self, x):
        states = self.core.forward_pass(x, self.current_weights())
        S, winner = self.core.select(states)
        return states, S, winner

    def evaluate_step(self, sample: Sample) -> int:
        _, _, winner = self._forward(sample.spikes)
        return winner

    def evaluate(self, samples) -> float:
        """Forward + selection only; device states are untouched."""
        if len(samples) == 0:
            return float("nan")
        ok = sum(self.evaluate_step(s) == s.label for s in samples)
        return ok / len(samples)

    def train_step(self, sample: Sample, epoch: int = 0,
                   _probe_hits: dict | None = None) -> TraceRecord:
        states, _, winner = self._forward(sample.spikes)
        hprime = self.core.sample_hprime(states)
        dW_list, cost = self.core.deltas(states, sample.label, hprime)

        pulses = 0
        self.last_clamp_events = 0
        if self.mode == "baseline":
            for W, dW in zip(self._soft_W, dW_list):
                np.clip(W + dW, 0.0, 1.0, out=W)
        else:
            pulses = self._apply_updates(states, dW_list, _probe_hits)
        return TraceRecord(epoch=epoch, predicted=winner, label=sample.label,
                           correct=winner == sample.label, cost=cost,
                           pulses_issued=pulses)

    def _apply_updates(self, states, dW_list, probe_hits=None) -> int:
        """Program every synapse with a requested change, row-major by (w, b).

        Target weights clamp to [0, 1] before inversion (out-of-range
        targets are unreachable under saturation anyway); requests whose
        mapped resistance change is already within tolerance are skipped
        without touching the device.
        """
        tol = self.prog_cfg.r_tolerance
        pend_w, pend_b, pend_t, pend_key = [], [], [], []
        clamped = 0
        for l, lay in enumerate(self.topology.layers):
            dW = dW_list[l][lay["post"], lay["pre"]]
            W_now = states[l].W_read[lay["post"], lay["pre"]]
            R_now = self.map.a / (W_now - self.map.b)
            W_tgt = W_now + dW
            oob = (W_tgt < 0.0) | (W_tgt > 1.0)
            clamped += int(oob.sum())
            np.clip(W_tgt, 0.0, 1.0, out=W_tgt)
            R_tgt = self.map.a / (W_tgt - self.map.b)
            if not (R_tgt > 0).all():
                raise MappingDomainError(
                    "weight map does not keep the clamped [0, 1] range on "
                    "positive conductances")
            mask = (dW != 0.0) & (np.abs(R_now - R_tgt) / R_tgt > tol)
            if mask.any():
                pend_w.append(lay["w"][mask])
                pend_b.append(lay["b"][mask])
                pend_t.append(R_tgt[mask])
                pend_key.append(np.full(mask.sum(), l, dtype=np.int64))
        if clamped:
            log.debug("clamped %d weight targets to the [0, 1] operating range", clamped)
        self.last_clamp_events = clamped
        if not pend_w:
            return 0
        ws = np.concatenate(pend_w)
        bs = np.concatenate(pend_b)
        ts = np.concatenate(pend_t)
        order = np.lexsort((bs, ws))
        ws, bs, ts = ws[order], bs[order], ts[order]
        pulse_counts, _ = program_batch(self.array, ws, bs, ts, self.prog_cfg)
        if probe_hits is not None:
            for (pw, pb), _ in probe_hits.items():
                i = np.flatnonzero((ws == pw) & (bs == pb))
                if len(i) and pulse_counts[i[0]] > 0:
                    probe_hits[(pw, pb)] = True
        return int(pulse_counts.sum())

    def train(self, samples, epochs: int, minibatch_acc: int = 100,
              snapshot_interval: int = 1000, snapshot_sink=None,
              probes=None, shuffle: bool = False) -> TrainResult:
        """Present one sample per epoch, cycling the set in order (or in a
        seed-controlled shuffled order); report running accuracy over
        consecutive windows of minibatch_acc records."""
        if epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {epochs}")
        if len(samples) == 0:
            raise ConfigError("training sample set is empty")
        if minibatch_acc < 1:
            raise ConfigError("minibatch_acc must be >= 1")
        n_in = self.topology.layer_sizes[0]
        n_out = self.topology.layer_sizes[-1]
        for s in samples:
            if s.spikes.shape[0] != n_in:
                raise ConfigError(
                    f"stimuli have {s.spikes.shape[0]} inputs, network expects {n_in}")
        if any(not 0 <= s.label < n_out for s in samples):
            raise ConfigError(f"labels must lie in [0, {n_out})")

        order = np.arange(len(samples))
        if shuffle:
            rng = np.random.default_rng([self.array_config.seed, 3])
            order = rng.permutation(len(samples))

        probes = probes or []
        probe_addr = {}
        for (pre, post) in probes:
            lay = self.topology.layers[0]
            i = np.flatnonzero((lay["pre"] == pre) & (lay["post"] == post))
            if len(i) == 0:
                raise TopologyError(f"probe synapse ({pre},{post}) is not mapped")
            probe_addr[(pre, post)] = (int(lay["w"][i[0]]), int(lay["b"][i[0]]))

        result = TrainResult(records=[], accuracy_curve=[],
                             probe_R={p: [] for p in probes},
                             probe_last_pulse={p: -1 for p in probes})
        if snapshot_sink is not None:
            snapshot_sink(0, self.snapshot())
        window = []
        for epoch in range(epochs):
            sample = samples[order[epoch % len(samples)]]
            hits = {probe_addr[p]: False for p in probes} or None
            rec = self.train_step(sample, epoch=epoch, _probe_hits=hits)
            result.records.append(rec)
            result.clamp_events += self.last_clamp_events
            window.append(rec.correct)
            for p in probes:
                result.probe_R[p].append(self.virtual_resistance(0, p[0], p[1]))
                if self.mode != "baseline" and hits[probe_addr[p]]:
                    result.probe_last_pulse[p] = epoch
            if len(window) == minibatch_acc:
                result.accuracy_curve.append((epoch + 1, float(np.mean(window))))
                window = []
            if snapshot_sink is not None and (epoch + 1) % snapshot_interval == 0:
                snapshot_sink(epoch + 1, self.snapshot())
        if window:
            result.accuracy_curve.append((epochs, float(np.mean(window))))
        if result.accuracy_curve:
            result.final_train_acc = result.accuracy_curve[-1][1]
        return result


def baseline_mode(net: Network) -> Network:
    """Switch to ideal software weights initialised from the current array
    state; forward behaviour is unchanged."""
    out = Network(net.topology, net.array_config, net.core.name,
                  net.core.params, net.map, net.prog_cfg, mode="baseline",
                  array=net.array)
    return out
