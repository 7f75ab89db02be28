"""Discrete-time quantum walks on a programmable beamsplitter mesh.

Simulates single-walker transport through a staggered light cone of SU(2)
cells under static and dynamic phase disorder: deterministic parallel
disorder ensembles, transport metrics and fits, and an optional
hardware-imperfection layer.
"""

from .analysis import (
    DegenerateDistributionError,
    EnaqtReport,
    FitFamily,
    FitResult,
    detect_enaqt,
    fit_distribution,
    similarity,
    spread_exponent,
    transport_efficiency,
)
from .ensemble import (
    EnsembleResult,
    LevelRecord,
    SweepPlan,
    make_grid,
    run_level,
    run_sweep,
)
from .lattice import (
    HADAMARD,
    INPUT_SPLITTER,
    WIRE,
    CellCoord,
    Half,
    MeshSpec,
    RbsSetting,
    apply_cell,
    apply_phase_layer,
    cell_unitary,
    full_unitary,
    intensities,
    propagate,
    wrap_angle,
)
from .programs import (
    GENERATOR_IDENTITY,
    DisorderRealization,
    DisorderSpec,
    MeshProgram,
    SeedProvenance,
    SymmetryPolicy,
    apply_disorder,
    build_symmetric_qw,
    build_tomography_program,
    mode_signs,
    sample_realization,
)

__version__ = "0.1.0"

__all__ = [
    "CellCoord",
    "DegenerateDistributionError",
    "DisorderRealization",
    "DisorderSpec",
    "EnaqtReport",
    "EnsembleResult",
    "FitFamily",
    "FitResult",
    "GENERATOR_IDENTITY",
    "HADAMARD",
    "Half",
    "INPUT_SPLITTER",
    "LevelRecord",
    "MeshProgram",
    "MeshSpec",
    "RbsSetting",
    "SeedProvenance",
    "SweepPlan",
    "SymmetryPolicy",
    "WIRE",
    "apply_cell",
    "apply_disorder",
    "apply_phase_layer",
    "build_symmetric_qw",
    "build_tomography_program",
    "cell_unitary",
    "detect_enaqt",
    "fit_distribution",
    "full_unitary",
    "intensities",
    "make_grid",
    "mode_signs",
    "propagate",
    "run_level",
    "run_sweep",
    "sample_realization",
    "similarity",
    "spread_exponent",
    "transport_efficiency",
    "wrap_angle",
]
