"""Measurement protocols: circuit builders plus the symbolic detector engine."""

from .base import (
    CYCLE,
    BuiltExperiment,
    CircuitWriter,
    ExperimentSpec,
    FrameLedger,
    LRSchedule,
    PlaquetteTracker,
    PROTOCOLS,
    build_experiment,
    register,
)
from .color import (
    color_code,
    color_transversal_gate,
    logical_chains,
    switching_color_code,
    transversal_action,
)
from .double import (
    aligned_code,
    double_cnot,
    double_floquet,
    double_floquet_cnot_gadget,
    entangling_action,
)
from .floquet import (
    css_floquet,
    dancing_floquet,
    hastings_haah_floquet,
    memory_chain,
    named_schedule,
)
from .synth import (
    Relation,
    deterministic_relations,
    observable_records,
    synthesize_detectors,
)

__all__ = [
    "CYCLE",
    "BuiltExperiment",
    "CircuitWriter",
    "ExperimentSpec",
    "FrameLedger",
    "LRSchedule",
    "PROTOCOLS",
    "PlaquetteTracker",
    "Relation",
    "aligned_code",
    "build_experiment",
    "color_code",
    "color_transversal_gate",
    "css_floquet",
    "dancing_floquet",
    "deterministic_relations",
    "double_cnot",
    "double_floquet",
    "double_floquet_cnot_gadget",
    "entangling_action",
    "hastings_haah_floquet",
    "logical_chains",
    "memory_chain",
    "named_schedule",
    "observable_records",
    "register",
    "switching_color_code",
    "synthesize_detectors",
    "transversal_action",
]
