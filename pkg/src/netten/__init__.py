"""Behavioral simulator of a small spiking network for epileptiform event detection."""

__version__ = "0.1.0"

from .errors import (CalibrationError, ConfigError, InputError, NettenError, NumericError,
                     OrderingError, RecordFormatError, SpecError)
from .signals import (LabelEvent, LfpRecord, SynthEvent, SynthSpec, events_to_labels,
                      labels_to_events, load_record, save_record, surrogate_spec, synthesize)
from .encoding import (DW, UP, EncoderConfig, SpikeTrain, calibrate_threshold, reconstruct,
                       sfe_decode, sfe_encode)
from .dynamics import (EpscParams, NeuronParams, NeuronState, StdpParams, SynapseState,
                       neuron_step, stdp_window)
from .network import (MismatchSpec, NetworkConfig, SimulationResult, apply_mismatch,
                      build_topology, simulate)
from .calibration import calibrate_gain
from .metrics import ClassifierThresholds, classify_event, evaluate, precision

__all__ = [
    "CalibrationError",
    "ConfigError",
    "InputError",
    "NettenError",
    "NumericError",
    "OrderingError",
    "RecordFormatError",
    "SpecError",
    "LabelEvent",
    "LfpRecord",
    "SynthEvent",
    "SynthSpec",
    "events_to_labels",
    "labels_to_events",
    "load_record",
    "save_record",
    "surrogate_spec",
    "synthesize",
    "DW",
    "UP",
    "EncoderConfig",
    "SpikeTrain",
    "calibrate_threshold",
    "reconstruct",
    "sfe_decode",
    "sfe_encode",
    "EpscParams",
    "NeuronParams",
    "NeuronState",
    "StdpParams",
    "SynapseState",
    "neuron_step",
    "stdp_window",
    "MismatchSpec",
    "NetworkConfig",
    "SimulationResult",
    "apply_mismatch",
    "build_topology",
    "simulate",
    "calibrate_gain",
    "ClassifierThresholds",
    "classify_event",
    "evaluate",
    "precision",
]
