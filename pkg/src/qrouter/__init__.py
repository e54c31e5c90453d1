"""Simulation and analysis toolkit for a linear-optical quantum router."""

from .analysis import (AccidentalSubtractor, Estimate, FringeFit, FringeFitter, PolarizationDensity,
                       contrast_summary, corrected_visibility, fidelity_from_counts, fidelity_from_state,
                       fit_fringe, mean_fidelity, routing_probability, subtract_accidentals)
from .circuit import (CircuitSpec, DetectionPattern, Detector, evolve, feed_forward, postselect, ppg)
from .fock import ModeLabel, ModeUnitary, PhotonicState, Polarization, apply_unitary, inner_product, tensor
from .router import (ControlSetting, RouterConfig, RouterResult, SignalQubit, build_router,
                     coherence_scan, intermediate_state, run_router)
from .source import (CountRecord, SourceParams, accidental_rate, calibrate_efficiency,
                     photon_number_distribution, simulate_counts)

__version__ = "0.1.0"

__all__ = [
    "accidental_rate",
    "AccidentalSubtractor",
    "apply_unitary",
    "build_router",
    "calibrate_efficiency",
    "CircuitSpec",
    "coherence_scan",
    "contrast_summary",
    "ControlSetting",
    "corrected_visibility",
    "CountRecord",
    "DetectionPattern",
    "Detector",
    "Estimate",
    "evolve",
    "feed_forward",
    "fidelity_from_counts",
    "fidelity_from_state",
    "fit_fringe",
    "FringeFit",
    "FringeFitter",
    "inner_product",
    "intermediate_state",
    "mean_fidelity",
    "ModeLabel",
    "ModeUnitary",
    "photon_number_distribution",
    "PhotonicState",
    "Polarization",
    "PolarizationDensity",
    "postselect",
    "ppg",
    "RouterConfig",
    "RouterResult",
    "routing_probability",
    "run_router",
    "SignalQubit",
    "simulate_counts",
    "SourceParams",
    "subtract_accidentals",
    "tensor",
]
