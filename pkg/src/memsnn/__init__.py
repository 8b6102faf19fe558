"""memsnn: device-in-the-loop simulator for spiking neural networks whose
synapses are virtual memristors on a crossbar array.

The package covers the full loop: an empirical switching-rate device model
integrated with explicit Euler steps, a virtual crossbar with read noise
and selector-based or selectorless (half-bias disturb) pulsing, linear
weight/conductance mapping with menu-based pulse planning and
predict-write-verify programming, LIF neuron cores with surrogate-noise
backprop (squared-error and winner-take-all cross-entropy variants), and a
deterministic training/evaluation runtime driven by three input files
(config, connectivity, stimuli) plus a command-line front end.
"""

__version__ = "0.1.0"

from .cores import (CoreParams, LayerState, WtaState, bp_deltas_mse,
                    bp_deltas_wta, lif_forward, register_core,
                    surrogate_deriv, wta_select)
from .crossbar import (ArrayConfig, Biasing, CrossbarArray,
                       array_from_snapshot, new_array)
from .device import (DeviceParams, DeviceState, PulseSpec, apply_pulse,
                     boundary, step_dt, switching_rate)
from .ingest import (RunConfig, load_config, load_connectivity, load_stimuli,
                     preprocess_mnist)
from .programming import (LinearMap, ProgramConfig, ProgramReport, PulseMenu,
                          derive_map, plan_pulse, resistance_of_weight,
                          weight_of_resistance, write_verify)
from .runtime import (Network, NetworkTopology, Sample, TraceRecord,
                      baseline_mode, default_connectivity, read_weights)

__all__ = [
    "ArrayConfig", "Biasing", "CoreParams", "CrossbarArray", "DeviceParams",
    "DeviceState", "LayerState", "LinearMap", "Network", "NetworkTopology",
    "ProgramConfig", "ProgramReport", "PulseMenu", "PulseSpec", "RunConfig",
    "Sample", "TraceRecord", "WtaState", "apply_pulse", "array_from_snapshot",
    "baseline_mode", "boundary", "bp_deltas_mse", "bp_deltas_wta",
    "default_connectivity", "derive_map", "lif_forward", "load_config",
    "load_connectivity", "load_stimuli", "new_array", "plan_pulse",
    "preprocess_mnist", "read_weights", "register_core",
    "resistance_of_weight", "step_dt", "surrogate_deriv", "switching_rate",
    "weight_of_resistance", "write_verify", "wta_select",
]
