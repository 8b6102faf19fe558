"""Command-line front end.

Subcommands: train, eval, sweep-rtol, compare-bias, gen-connectivity,
preprocess-mnist, export-heatmap. Every run writes a manifest.json holding
the fully resolved configuration, its SHA-256, the seed, any overrides
verbatim, and the package version, which is sufficient to reproduce the
run byte-identically. Exit codes: 0 success, 1 usage/parse error,
2 runtime error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import warnings
from pathlib import Path

from . import __version__
from .crossbar import array_from_snapshot, load_snapshot_csv, save_snapshot_csv
from .device import DeviceParams
from .errors import ConfigError, ParseError, TopologyError
from .ingest import (dump_config, load_config, load_connectivity,
                     load_idx_images, load_idx_labels, load_stimuli,
                     parse_config, preprocess_mnist, write_connectivity,
                     write_stimuli)
from .programming import LinearMap, weight_of_resistance
from .runtime import Network, default_connectivity


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _apply_overrides(raw: dict, overrides: list[str]) -> dict:
    for item in overrides:
        if "=" not in item:
            raise ParseError(f"override '{item}' is not of the form key=value")
        dotted, text = item.split("=", 1)
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = raw
        parts = dotted.split(".")
        for part in parts[:-1]:
            if not isinstance(node, dict) or part not in node:
                raise ParseError(f"override key '{dotted}' not found in config")
            node = node[part]
        if not isinstance(node, dict) or parts[-1] not in node:
            raise ParseError(f"override key '{dotted}' not found in config")
        node[parts[-1]] = value
    return raw


def _load_run_config(args):
    cfg = load_config(args.config)
    raw = cfg.raw
    overrides = list(getattr(args, "override", None) or [])
    if overrides:
        raw = _apply_overrides(raw, overrides)
    if getattr(args, "seed", None) is not None:
        raw["run"]["seed"] = args.seed
    return parse_config(raw, src=args.config), overrides


def _write_manifest(out_dir: Path, command: str, cfg, overrides, extra=None):
    blob = dump_config(cfg)
    manifest = {
        "command": command,
        "version": __version__,
        "seed": cfg.run["seed"],
        "overrides": overrides,
        "config_sha256": hashlib.sha256(blob.encode()).hexdigest(),
        "config": cfg.raw,
        "deviations_from_reference": cfg.deviations_from_reference(),
    }
    if extra:
        manifest.update(extra)
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_trace(out_dir: Path, records):
    with open(out_dir / "trace.jsonl", "w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps({
                "epoch": r.epoch, "predicted": r.predicted, "label": r.label,
                "correct": r.correct, "cost": r.cost,
                "pulses_issued": r.pulses_issued}) + "\n")


def _write_accuracy(out_dir: Path, curve):
    with open(out_dir / "accuracy.csv", "w", encoding="utf-8") as f:
        f.write("window_end_epoch,accuracy\n")
        for end, acc in curve:
            f.write(f"{end},{acc!r}\n")


def _run_training(cfg, topo, samples, out_dir: Path, probes=None,
                  test_samples=None):
    out_dir.mkdir(parents=True, exist_ok=True)
    snap_dir = out_dir / "snapshots"
    snap_dir.mkdir(exist_ok=True)

    def sink(epoch, R):
        save_snapshot_csv(snap_dir / f"snapshot_epoch_{epoch:06d}.csv", R)

    net = Network(topo, cfg.array_config(), cfg.core_name(), cfg.core_params(),
                  cfg.linear_map(), cfg.prog_config(), mode=cfg.run["mode"])
    result = net.train(samples, epochs=cfg.run["epochs"],
                       minibatch_acc=cfg.run["minibatch_acc"],
                       snapshot_interval=cfg.run["snapshot_interval"],
                       snapshot_sink=sink, probes=probes,
                       shuffle=cfg.run["shuffle"])
    sink(cfg.run["epochs"], net.snapshot())
    _write_trace(out_dir, result.records)
    _write_accuracy(out_dir, result.accuracy_curve)
    if probes:
        with open(out_dir / "probes.csv", "w", encoding="utf-8") as f:
            f.write("epoch," + ",".join(f"R_{pre}_{post}" for pre, post in probes) + "\n")
            for ep in range(len(result.records)):
                vals = ",".join(f"{result.probe_R[p][ep]:.6g}" for p in probes)
                f.write(f"{ep},{vals}\n")
    summary = {"final_train_acc": result.final_train_acc,
               "epochs": cfg.run["epochs"],
               "clamp_events": result.clamp_events}
    test_acc = None
    if test_samples is not None:
        test_acc = net.evaluate(test_samples)
        summary["test_accuracy"] = test_acc
    (out_dir / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return net, result, test_acc


def cmd_train(args) -> int:
    cfg, overrides = _load_run_config(args)
    topo = load_connectivity(args.connectivity, cfg.array_config())
    samples = load_stimuli(args.stimuli)
    test_samples = load_stimuli(args.test_stimuli) if args.test_stimuli else None
    probes = [_parse_probe(p) for p in (args.probe or [])] or None
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_manifest(out_dir, "train", cfg, overrides)
    _run_training(cfg, topo, samples, out_dir, probes=probes,
                  test_samples=test_samples)
    return 0


def cmd_eval(args) -> int:
    cfg, overrides = _load_run_config(args)
    topo = load_connectivity(args.connectivity, cfg.array_config())
    samples = load_stimuli(args.stimuli)
    R = load_snapshot_csv(args.snapshot)
    array = array_from_snapshot(cfg.array_config(), R)
    net = Network(topo, cfg.array_config(), cfg.core_name(), cfg.core_params(),
                  cfg.linear_map(), cfg.prog_config(), mode=cfg.run["mode"],
                  array=array)
    acc = net.evaluate(samples)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_manifest(out_dir, "eval", cfg, overrides,
                    extra={"snapshot": str(args.snapshot)})
    (out_dir / "eval.json").write_text(
        json.dumps({"accuracy": acc, "n_samples": len(samples)},
                   indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"accuracy: {acc:.4f} over {len(samples)} samples")
    return 0


def _parse_probe(text):
    parts = text.split(",")
    if len(parts) != 2:
        raise ParseError(f"probe must be 'pre,post', got '{text}'")
    return (int(parts[0]), int(parts[1]))


def cmd_sweep_rtol(args) -> int:
    cfg, overrides = _load_run_config(args)
    values = []
    for v in args.values.split(","):
        frac = float(v)
        if frac in values:
            warnings.warn(f"duplicate r_tolerance value {frac} ignored")
        else:
            values.append(frac)
    topo = load_connectivity(args.connectivity, cfg.array_config())
    samples = load_stimuli(args.stimuli)
    test_samples = load_stimuli(args.test_stimuli)
    probe = _parse_probe(args.probe)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    base_seed = cfg.run["seed"]
    rows = []
    arm_seeds = {}
    for i, frac in enumerate(values):
        raw = json.loads(dump_config(cfg))
        raw["programming"]["r_tolerance"] = frac
        raw["run"]["seed"] = base_seed * 1000 + i
        arm_cfg = parse_config(raw, src=args.config)
        arm_dir = out_dir / f"arm_rtol_{frac:g}"
        arm_dir.mkdir(parents=True, exist_ok=True)
        arm_seeds[f"{frac:g}"] = arm_cfg.run["seed"]
        _write_manifest(arm_dir, "sweep-rtol/arm", arm_cfg, overrides,
                        extra={"r_tolerance": frac, "derived_seed": arm_cfg.run["seed"],
                               "probe": list(probe)})
        _, result, test_acc = _run_training(arm_cfg, topo, samples, arm_dir,
                                            probes=[probe],
                                            test_samples=test_samples)
        rows.append((frac, result.final_train_acc, test_acc,
                     result.probe_last_pulse[probe]))
    with open(out_dir / "summary.csv", "w", encoding="utf-8") as f:
        f.write("r_tolerance,final_train_acc,test_acc,cutoff_epoch\n")
        for frac, tr, te, cut in rows:
            f.write(f"{frac:g},{tr!r},{te!r},{cut}\n")
    _write_manifest(out_dir, "sweep-rtol", cfg, overrides,
                    extra={"values": values, "derived_seeds": arm_seeds,
                           "probe": list(probe),
                           "seed_derivation": "base_seed*1000 + arm_index"})
    return 0


def _selectorless_range(params: DeviceParams, menu) -> tuple[float, float]:
    # Voltages a selectorless array can see: every menu voltage and its half.
    seen = []
    for opt in menu.options:
        seen.extend([opt.voltage, opt.voltage / 2.0])
    r_max = max(params.a0_p + params.a1_p * v for v in seen if v > 0)
    r_min = min(params.a0_n + params.a1_n * v for v in seen if v < 0)
    return r_min, r_max


def cmd_compare_bias(args) -> int:
    cfg, overrides = _load_run_config(args)
    topo = load_connectivity(args.connectivity, cfg.array_config())
    samples = load_stimuli(args.stimuli)
    test_samples = load_stimuli(args.test_stimuli)
    probe_stim = _parse_probe(args.probe_stim)
    probe_nonstim = _parse_probe(args.probe_nonstim)
    probes = [probe_stim, probe_nonstim]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    arms = {}
    for biasing in ("selector", "selectorless"):
        raw = json.loads(dump_config(cfg))
        raw["array"]["biasing"] = biasing
        if biasing == "selectorless" and raw["mapping"]["mode"] == "derive":
            r_min, r_max = _selectorless_range(cfg.device_params(), cfg.pulse_menu())
            raw["mapping"]["R_min"] = r_min
            raw["mapping"]["R_max"] = r_max
        arm_cfg = parse_config(raw, src=args.config)
        arm_dir = out_dir / f"arm_{biasing}"
        arm_dir.mkdir(parents=True, exist_ok=True)
        _write_manifest(arm_dir, "compare-bias/arm", arm_cfg, overrides,
                        extra={"biasing": biasing,
                               "probes": [list(p) for p in probes]})
        _, result, test_acc = _run_training(arm_cfg, topo, samples, arm_dir,
                                            probes=probes,
                                            test_samples=test_samples)
        arms[biasing] = (result, test_acc)

    with open(out_dir / "summary.csv", "w", encoding="utf-8") as f:
        f.write("arm,test_accuracy,stim_R_initial,stim_R_final,"
                "nonstim_R_initial,nonstim_R_final\n")
        for biasing, (result, test_acc) in arms.items():
            rs = result.probe_R[probe_stim]
            rn = result.probe_R[probe_nonstim]
            f.write(f"{biasing},{test_acc!r},{rs[0]:.6g},{rs[-1]:.6g},"
                    f"{rn[0]:.6g},{rn[-1]:.6g}\n")
    _write_manifest(out_dir, "compare-bias", cfg, overrides,
                    extra={"probes": [list(p) for p in probes]})
    return 0


def cmd_gen_connectivity(args) -> int:
    layer_sizes = [int(x) for x in args.layers.split(",")]
    rows = default_connectivity(layer_sizes, args.rows, args.cols)
    write_connectivity(rows, args.out)
    print(f"wrote {len(rows)} synapses to {args.out}")
    return 0


def cmd_preprocess_mnist(args) -> int:
    images = load_idx_images(args.images)
    labels = load_idx_labels(args.labels)
    lo = args.offset
    hi = lo + args.count if args.count is not None else len(images)
    samples = preprocess_mnist(images[lo:hi], labels[lo:hi])
    write_stimuli(samples, args.out)
    print(f"wrote {len(samples)} samples to {args.out}")
    return 0


def cmd_export_heatmap(args) -> int:
    R = load_snapshot_csv(args.snapshot)
    if args.config:
        cfg = load_config(args.config)
        lin = cfg.linear_map()
    else:
        lin = LinearMap(a=args.map_a, b=args.map_b)
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    save_snapshot_csv(f"{prefix}_resistance.csv", R)
    save_snapshot_csv(f"{prefix}_weights.csv", weight_of_resistance(lin, R))
    return 0


def build_parser() -> _Parser:
    p = _Parser(prog="memsnn", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp, stimuli=True):
        sp.add_argument("--config", required=True)
        sp.add_argument("--connectivity", required=True)
        if stimuli:
            sp.add_argument("--stimuli", required=True)
        sp.add_argument("--out", required=True)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--override", action="append", metavar="KEY=VALUE")

    sp = sub.add_parser("train", help="train a network and write trace artifacts")
    add_common(sp)
    sp.add_argument("--test-stimuli", default=None,
                    help="optional held-out set evaluated after training")
    sp.add_argument("--probe", action="append", metavar="PRE,POST",
                    help="record a synapse's resistance trace")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="evaluate a snapshot on a stimuli file")
    add_common(sp)
    sp.add_argument("--snapshot", required=True)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("sweep-rtol", help="train once per r_tolerance value")
    add_common(sp)
    sp.add_argument("--values", required=True, help="comma-separated fractions")
    sp.add_argument("--test-stimuli", required=True)
    sp.add_argument("--probe", default="250,6", metavar="PRE,POST")
    sp.set_defaults(func=cmd_sweep_rtol)

    sp = sub.add_parser("compare-bias",
                        help="selector-based vs selectorless arrays")
    add_common(sp)
    sp.add_argument("--test-stimuli", required=True)
    sp.add_argument("--probe-stim", default="250,6", metavar="PRE,POST")
    sp.add_argument("--probe-nonstim", default="10,6", metavar="PRE,POST")
    sp.set_defaults(func=cmd_compare_bias)

    sp = sub.add_parser("gen-connectivity", help="write the default synapse map")
    sp.add_argument("--layers", required=True, help="e.g. 484,10")
    sp.add_argument("--rows", type=int, default=100)
    sp.add_argument("--cols", type=int, default=100)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_gen_connectivity)

    sp = sub.add_parser("preprocess-mnist",
                        help="IDX images/labels to a stimuli CSV")
    sp.add_argument("--images", required=True)
    sp.add_argument("--labels", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--count", type=int, default=None)
    sp.add_argument("--offset", type=int, default=0)
    sp.set_defaults(func=cmd_preprocess_mnist)

    sp = sub.add_parser("export-heatmap",
                        help="snapshot to resistance + weight CSV matrices")
    sp.add_argument("--snapshot", required=True)
    sp.add_argument("--out-prefix", required=True)
    sp.add_argument("--config", default=None,
                    help="derive the weight map from a run config")
    sp.add_argument("--map-a", type=float, default=None)
    sp.add_argument("--map-b", type=float, default=None)
    sp.set_defaults(func=cmd_export_heatmap)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if args.command == "export-heatmap" and not args.config and \
            (args.map_a is None or args.map_b is None):
        print("export-heatmap needs --config or both --map-a and --map-b",
              file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except (ParseError, ConfigError, TopologyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # pragma: no cover - defensive
        print(f"runtime error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
