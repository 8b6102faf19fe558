"""Input file handling: run configuration, connectivity map, stimuli, and
MNIST preprocessing.

Concrete formats:

* config - strict JSON (schema below; unknown or missing keys are errors)
* connectivity - CSV with header ``layer,pre,post,wordline,bitline``
* stimuli - CSV, one sample per line: N binary pixel columns then the label

MNIST raw files are the standard big-endian IDX layout, optionally gzipped.
Images are centre-cropped from 28x28 to 22x22 (3 pixels off each side),
binarised at threshold 128, and unrolled row-major to 484 bits; a set bit
sends a spike.
"""

from __future__ import annotations

import gzip
import json
import struct
from dataclasses import dataclass

import numpy as np

from .cores import CoreParams
from .crossbar import ArrayConfig, Biasing
from .device import DeviceParams, PulseSpec
from .errors import ParseError
from .programming import LinearMap, ProgramConfig, PulseMenu, derive_map
from .runtime import NetworkTopology, Sample

_DEVICE_KEYS = ("A_p", "A_n", "t_p", "t_n", "a0_p", "a1_p", "a0_n", "a1_n")

_SCHEMA = {
    "array": {
        "rows": int, "cols": int, "biasing": str, "read_noise_frac": float,
        "init_R": float, "init_R_variation": float, "dt": float,
        "device_params": {k: float for k in _DEVICE_KEYS},
    },
    "core": {
        "name": str, "V_th": float, "alpha": float, "eta": float,
        "noise_scale": float,
    },
    "programming": {
        "r_tolerance": float, "max_steps": int, "menu": list,
    },
    "mapping": dict,
    "run": {
        "epochs": int, "minibatch_acc": int, "snapshot_interval": int,
        "seed": int, "mode": str, "shuffle": bool,
    },
}

_OPTIONAL = {("run", "shuffle")}

# the reference parameter set the shipped configs are measured against;
# manifests list every field that deviates from it
REFERENCE_DEFAULTS = {
    "array.rows": 100, "array.cols": 100, "array.biasing": "selector",
    "array.read_noise_frac": 0.001, "array.init_R": 11000.0,
    "array.init_R_variation": 500.0, "array.dt": 1e-6,
    "array.device_params.A_p": 0.21389, "array.device_params.A_n": -0.81302,
    "array.device_params.t_p": 1.6591, "array.device_params.t_n": 1.5148,
    "array.device_params.a0_p": 37087.0, "array.device_params.a1_p": -20193.0,
    "array.device_params.a0_n": 43430.0, "array.device_params.a1_n": 34333.0,
    "core.V_th": 25.16, "core.alpha": -0.3, "core.eta": 3.5e-6,
    "core.noise_scale": 1e-6,
    "programming.r_tolerance": 0.001, "programming.max_steps": 5,
    "programming.menu": [
        [0.9, 1e-6], [-0.9, 1e-6], [1.1, 1e-6], [-1.1, 1e-6],
        [1.2, 1e-6], [-1.2, 1e-6], [1.2, 5e-6], [-1.2, 5e-6],
        [1.2, 1e-5], [-1.2, 1e-5], [1.2, 5e-5], [-1.2, 5e-5],
    ],
}


def _want_number(kind):
    return kind is float


def _check_section(data, schema, path, src):
    if not isinstance(data, dict):
        raise ParseError(f"section must be an object", path=src, key=path)
    for key in data:
        full = f"{path}.{key}" if path else key
        if key not in schema:
            raise ParseError("unknown key", path=src, key=full)
    for key, kind in schema.items():
        full = f"{path}.{key}" if path else key
        if key not in data:
            if tuple(full.split(".", 1)) in _OPTIONAL or (path, key) in _OPTIONAL:
                continue
            raise ParseError("missing key", path=src, key=full)
        val = data[key]
        if isinstance(kind, dict):
            _check_section(val, kind, full, src)
        elif kind is float:
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                raise ParseError(f"expected a number, got {type(val).__name__}",
                                 path=src, key=full)
        elif kind is int:
            if isinstance(val, bool) or not isinstance(val, int):
                raise ParseError(f"expected an integer, got {type(val).__name__}",
                                 path=src, key=full)
        elif not isinstance(val, kind):
            raise ParseError(f"expected {kind.__name__}, got {type(val).__name__}",
                             path=src, key=full)


@dataclass
class RunConfig:
    """Validated run configuration; `raw` is the normalised dict form."""

    raw: dict

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.raw == other.raw

    def device_params(self) -> DeviceParams:
        return DeviceParams(**self.raw["array"]["device_params"])

    def array_config(self) -> ArrayConfig:
        a = self.raw["array"]
        return ArrayConfig(
            rows=a["rows"], cols=a["cols"], biasing=Biasing(a["biasing"]),
            read_noise_frac=a["read_noise_frac"], init_R=a["init_R"],
            init_R_variation=a["init_R_variation"], dt=a["dt"],
            device_params=self.device_params(), seed=self.raw["run"]["seed"])

    def core_params(self) -> CoreParams:
        c = self.raw["core"]
        return CoreParams(V_th=c["V_th"], alpha=c["alpha"], eta=c["eta"],
                          noise_scale=c["noise_scale"], seed=self.raw["run"]["seed"])

    def core_name(self) -> str:
        return self.raw["core"]["name"]

    def linear_map(self) -> LinearMap:
        m = self.raw["mapping"]
        if m["mode"] == "derive":
            return derive_map(m["R_min"], m["R_max"])
        return LinearMap(a=m["a"], b=m["b"])

    def pulse_menu(self) -> PulseMenu:
        return PulseMenu(tuple(PulseSpec(v, pw)
                               for v, pw in self.raw["programming"]["menu"]))

    def prog_config(self) -> ProgramConfig:
        p = self.raw["programming"]
        return ProgramConfig(r_tolerance=p["r_tolerance"], max_steps=p["max_steps"],
                             dt=self.raw["array"]["dt"], menu=self.pulse_menu())

    @property
    def run(self) -> dict:
        return self.raw["run"]

    def deviations_from_reference(self) -> list:
        """Fields that differ from the reference parameter set."""
        out = []
        for dotted, ref in REFERENCE_DEFAULTS.items():
            node = self.raw
            for part in dotted.split("."):
                node = node[part]
            if node != ref:
                out.append({"key": dotted, "reference": ref, "value": node})
        return out


def parse_config(data: dict, src=None) -> RunConfig:
    _check_section(data, _SCHEMA, "", src)
    m = data["mapping"]
    if not isinstance(m, dict) or "mode" not in m:
        raise ParseError("missing key", path=src, key="mapping.mode")
    if m["mode"] == "derive":
        want = {"mode", "R_min", "R_max"}
    elif m["mode"] == "explicit":
        want = {"mode", "a", "b"}
    else:
        raise ParseError(f"mapping.mode must be 'derive' or 'explicit', got {m['mode']!r}",
                         path=src, key="mapping.mode")
    if set(m) != want:
        raise ParseError(f"mapping with mode '{m['mode']}' needs keys {sorted(want)}",
                         path=src, key="mapping")
    for key in want - {"mode"}:
        if isinstance(m[key], bool) or not isinstance(m[key], (int, float)):
            raise ParseError("expected a number", path=src, key=f"mapping.{key}")
    if data["array"]["biasing"] not in ("selector", "selectorless"):
        raise ParseError("biasing must be 'selector' or 'selectorless'",
                         path=src, key="array.biasing")
    if data["run"]["mode"] not in ("memristor", "baseline"):
        raise ParseError("run.mode must be 'memristor' or 'baseline'",
                         path=src, key="run.mode")
    for i, opt in enumerate(data["programming"]["menu"]):
        if (not isinstance(opt, list) or len(opt) != 2
                or not all(isinstance(x, (int, float)) and not isinstance(x, bool)
                           for x in opt)):
            raise ParseError("menu entries must be [voltage, pulsewidth] pairs",
                             path=src, key=f"programming.menu[{i}]")
    raw = json.loads(json.dumps(data))  # deep copy, JSON-normalised
    raw["run"].setdefault("shuffle", False)
    cfg = RunConfig(raw)
    # construct the typed objects once so invariant violations surface here
    cfg.array_config()
    cfg.core_params()
    cfg.linear_map()
    cfg.prog_config()
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ParseError("config file not found", path=path) from None
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e.msg}", path=path, line=e.lineno) from None
    return parse_config(data, src=path)


def dump_config(cfg: RunConfig) -> str:
    return json.dumps(cfg.raw, indent=2, sort_keys=True)


def load_connectivity(path, topo_check: ArrayConfig | None = None) -> NetworkTopology:
    """Parse and validate a connectivity CSV into a NetworkTopology."""
    rows = []
    try:
        f = open(path, encoding="utf-8")
    except FileNotFoundError:
        raise ParseError("connectivity file not found", path=path) from None
    with f:
        header = f.readline().strip()
        if header != "layer,pre,post,wordline,bitline":
            raise ParseError("expected header 'layer,pre,post,wordline,bitline'",
                             path=path, line=1)
        for ln, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 5:
                raise ParseError(f"expected 5 columns, got {len(parts)}",
                                 path=path, line=ln)
            try:
                vals = [int(p) for p in parts]
            except ValueError:
                raise ParseError("connectivity values must be integers",
                                 path=path, line=ln) from None
            if any(v < 0 for v in vals):
                raise ParseError("connectivity values must be non-negative",
                                 path=path, line=ln)
            rows.append(tuple(vals))
    topo = NetworkTopology.from_rows(rows)
    if topo_check is not None:
        topo.validate_bounds(topo_check.rows, topo_check.cols)
    return topo


def write_connectivity(rows, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("layer,pre,post,wordline,bitline\n")
        for r in rows:
            f.write(",".join(str(int(x)) for x in r) + "\n")


def load_stimuli(path) -> list:
    """One sample per line: binary pixels then the class label (0-9)."""
    samples = []
    width = None
    try:
        f = open(path, encoding="utf-8")
    except FileNotFoundError:
        raise ParseError("stimuli file not found", path=path) from None
    with f:
        for ln, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if width is None:
                width = len(parts)
                if width < 2:
                    raise ParseError("stimulus lines need pixels and a label",
                                     path=path, line=ln)
            elif len(parts) != width:
                raise ParseError(f"expected {width} columns, got {len(parts)}",
                                 path=path, line=ln)
            try:
                vals = [int(p) for p in parts]
            except ValueError:
                raise ParseError("stimulus values must be integers",
                                 path=path, line=ln) from None
            pixels, label = vals[:-1], vals[-1]
            if any(p not in (0, 1) for p in pixels):
                raise ParseError("pixels must be 0 or 1", path=path, line=ln)
            if not 0 <= label <= 9:
                raise ParseError(f"label must be in [0, 9], got {label}",
                                 path=path, line=ln)
            samples.append(Sample(spikes=np.array(pixels, dtype=np.float64),
                                  label=label))
    return samples


def write_stimuli(samples, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for s in samples:
            bits = ",".join(str(int(v)) for v in s.spikes)
            f.write(f"{bits},{s.label}\n")


CROP = 3          # pixels removed from each side of the 28x28 frame
BIN_THRESHOLD = 128


def preprocess_mnist(raw_images: np.ndarray, raw_labels: np.ndarray) -> list:
    """Centre-crop to 22x22, binarise at 128, unroll row-major to 484 bits."""
    imgs = np.asarray(raw_images)
    if imgs.ndim != 3 or imgs.shape[1:] != (28, 28):
        raise ParseError(f"expected images of shape (n, 28, 28), got {imgs.shape}")
    labels = np.asarray(raw_labels)
    if labels.shape != (imgs.shape[0],):
        raise ParseError("images and labels disagree in length")
    crop = imgs[:, CROP:28 - CROP, CROP:28 - CROP]
    bits = (crop >= BIN_THRESHOLD).astype(np.float64).reshape(len(imgs), -1)
    return [Sample(spikes=bits[i], label=int(labels[i])) for i in range(len(imgs))]


def _read_idx(path) -> bytes:
    with open(path, "rb") as f:
        head = f.read(2)
        f.seek(0)
        if head == b"\x1f\x8b":
            return gzip.decompress(f.read())
        return f.read()


def load_idx_images(path) -> np.ndarray:
    data = _read_idx(path)
    if len(data) < 16:
        raise ParseError("truncated IDX image file", path=path)
    magic, n, r, c = struct.unpack(">IIII", data[:16])
    if magic != 0x803:
        raise ParseError(f"bad IDX image magic 0x{magic:x}", path=path)
    if len(data) != 16 + n * r * c:
        raise ParseError("IDX image payload size mismatch", path=path)
    return np.frombuffer(data, np.uint8, offset=16).reshape(n, r, c)


def load_idx_labels(path) -> np.ndarray:
    data = _read_idx(path)
    if len(data) < 8:
        raise ParseError("truncated IDX label file", path=path)
    magic, n = struct.unpack(">II", data[:8])
    if magic != 0x801:
        raise ParseError(f"bad IDX label magic 0x{magic:x}", path=path)
    if len(data) != 8 + n:
        raise ParseError("IDX label payload size mismatch", path=path)
    return np.frombuffer(data, np.uint8, offset=8)
