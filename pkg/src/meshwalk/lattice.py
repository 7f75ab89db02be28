"""Beamsplitter-mesh geometry and single-walker propagation.

The mesh is a staggered lattice of 4-port reconfigurable beamsplitter (RBS)
cells.  Layer ``t`` (1-based) of the light cone reachable from a central
injection contains exactly ``t`` cells; a walker leaving the top port of a
cell enters the bottom port of a cell in the next layer.  Each cell applies
an SU(2) rotation parametrized by an internal differential phase ``theta``
(splitting ratio) and an external differential phase ``phi``; between cell
layers a per-mode phase screen acts on every waveguide.

States are plain complex numpy vectors of length ``num_modes`` (unit norm in
this lossless model); intensity distributions are the squared magnitudes.
Mode and layer indices are 1-based throughout, matching the usual labeling
of waveguides on chip schematics.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


def wrap_angle(x):
    """Wrap an angle (scalar or array) to the interval (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(x), TWO_PI)


class Half(enum.Enum):
    """Position of a cell relative to the cone's mirror axis."""

    UPPER = "upper"
    LOWER = "lower"
    CENTER = "center"


@dataclass(frozen=True, order=True)
class CellCoord:
    """Location of one RBS cell: layer index and the coupled mode pair."""

    layer: int
    top_mode: int

    @property
    def bottom_mode(self) -> int:
        return self.top_mode + 1

    def half(self, num_modes: int) -> Half:
        if self.top_mode == num_modes // 2:
            return Half.CENTER
        if self.bottom_mode <= num_modes // 2:
            return Half.UPPER
        return Half.LOWER


@dataclass(frozen=True)
class RbsSetting:
    """Differential phases of one RBS cell, stored wrapped to (-pi, pi]."""

    theta: float
    phi: float

    def __post_init__(self):
        object.__setattr__(self, "theta", float(wrap_angle(self.theta)))
        object.__setattr__(self, "phi", float(wrap_angle(self.phi)))


# Named settings used throughout the walk programs.
WIRE = RbsSetting(np.pi, 0.0)          # bar state: straight-through routing
HADAMARD = RbsSetting(np.pi / 2, 0.0)  # 50/50 with the Hadamard phase pattern
INPUT_SPLITTER = RbsSetting(np.pi / 2, np.pi / 2)


@dataclass(frozen=True)
class MeshSpec:
    """Geometry of the centered light cone.

    ``num_modes`` waveguides, ``depth`` cell layers, injection on the bottom
    port of the single layer-1 cell by default.  Layer ``t`` couples the
    contiguous pairs starting at mode ``num_modes/2 - t + 1``, so the cone
    spans all modes at ``t = num_modes/2``.  Requires an even mode count and
    ``num_modes >= 2 * depth`` so the cone never clips the array edge.
    """

    num_modes: int = 14
    depth: int = 7
    injection_mode: int = 0  # 0 means "default": bottom port of the input cell

    def __post_init__(self):
        if self.num_modes < 2 or self.num_modes % 2:
            raise ValueError(f"num_modes must be even and >= 2, got {self.num_modes}")
        if self.depth < 1:
            raise ValueError(f"depth must be >= 1, got {self.depth}")
        if self.num_modes < 2 * self.depth:
            raise ValueError(
                f"centered cone needs num_modes >= 2*depth, got {self.num_modes} < {2 * self.depth}"
            )
        if self.injection_mode == 0:
            object.__setattr__(self, "injection_mode", self.num_modes // 2 + 1)
        if not 1 <= self.injection_mode <= self.num_modes:
            raise ValueError(f"injection_mode {self.injection_mode} outside [1, {self.num_modes}]")

    def layer_cells(self, layer: int) -> list[CellCoord]:
        """The ``layer`` cells of cone layer ``layer`` (1-based), top to bottom."""
        if not 1 <= layer <= self.depth:
            raise ValueError(f"layer {layer} outside [1, {self.depth}]")
        first_top = self.num_modes // 2 - layer + 1
        return [CellCoord(layer, first_top + 2 * k) for k in range(layer)]

    @property
    def cells(self) -> list[CellCoord]:
        return [c for t in range(1, self.depth + 1) for c in self.layer_cells(t)]


def cell_unitary(setting: RbsSetting) -> np.ndarray:
    """2x2 SU(2) matrix of one RBS cell.

    Half-angle convention: (pi, 0) is a bar-state wire, (pi/2, 0) is exactly
    the Hadamard gate, and (pi/2, pi/2) splits a bottom-port input into
    (|top> + i|bottom>)/sqrt(2) up to a global phase.
    """
    s = np.sin(setting.theta / 2.0)
    c = np.cos(setting.theta / 2.0)
    e = np.exp(1j * setting.phi)
    return np.array([[e * s, e * c], [c, -s]], dtype=complex)


def apply_cell(state: np.ndarray, cell: CellCoord, setting: RbsSetting) -> np.ndarray:
    """Apply one cell unitary to the coupled mode pair; identity elsewhere."""
    state = np.asarray(state, dtype=complex)
    if cell.top_mode < 1 or cell.bottom_mode > state.shape[0]:
        raise IndexError(
            f"cell (layer={cell.layer}, modes {cell.top_mode},{cell.bottom_mode}) "
            f"outside state of length {state.shape[0]}"
        )
    out = state.copy()
    i = cell.top_mode - 1
    out[i : i + 2] = cell_unitary(setting) @ state[i : i + 2]
    return out


def apply_phase_layer(state: np.ndarray, phases: np.ndarray) -> np.ndarray:
    """Per-mode phase screen: a_x -> exp(i phi_x) a_x."""
    state = np.asarray(state, dtype=complex)
    phases = np.asarray(phases, dtype=float)
    if phases.shape != state.shape:
        raise ValueError(f"phase screen length {phases.shape} != state length {state.shape}")
    return state * np.exp(1j * phases)


def intensities(state: np.ndarray) -> np.ndarray:
    """Per-mode output intensities |a_x|^2."""
    state = np.asarray(state)
    return state.real**2 + state.imag**2


def propagate(spec: MeshSpec, program, input_mode: int | None = None,
              up_to_layer: int | None = None) -> np.ndarray:
    """Propagate a single-mode excitation through the programmed mesh.

    For each layer 1..``up_to_layer`` (default: full depth) applies all cell
    unitaries of the layer, then the layer's per-mode phase screen.  Returns
    the complex state after the last applied layer.
    """
    if input_mode is None:
        input_mode = spec.injection_mode
    if not 1 <= input_mode <= spec.num_modes:
        raise ValueError(f"input_mode {input_mode} outside [1, {spec.num_modes}]")
    last = spec.depth if up_to_layer is None else up_to_layer
    if not 1 <= last <= spec.depth:
        raise ValueError(f"up_to_layer {last} outside [1, {spec.depth}]")
    screens = np.asarray(program.phase_screens, dtype=float)
    if screens.shape != (spec.num_modes, spec.depth):
        raise ValueError(
            f"phase screens shaped {screens.shape}, expected {(spec.num_modes, spec.depth)}"
        )

    state = np.zeros(spec.num_modes, dtype=complex)
    state[input_mode - 1] = 1.0
    for t in range(1, last + 1):
        for cell in spec.layer_cells(t):
            try:
                setting = program.cell_settings[cell]
            except KeyError:
                raise KeyError(
                    f"program has no setting for cell (layer={cell.layer}, "
                    f"top_mode={cell.top_mode})"
                ) from None
            state = apply_cell(state, cell, setting)
        state = apply_phase_layer(state, screens[:, t - 1])
    return state


def full_unitary(spec: MeshSpec, program, up_to_layer: int | None = None) -> np.ndarray:
    """Compose the whole mesh into one num_modes x num_modes unitary.

    Test oracle: built by plain matrix multiplication of per-layer
    block-diagonal cell matrices and diagonal phase screens, so it exercises
    a different code path than :func:`propagate`.
    """
    last = spec.depth if up_to_layer is None else up_to_layer
    if not 1 <= last <= spec.depth:
        raise ValueError(f"up_to_layer {last} outside [1, {spec.depth}]")
    screens = np.asarray(program.phase_screens, dtype=float)
    n = spec.num_modes
    total = np.eye(n, dtype=complex)
    for t in range(1, last + 1):
        layer = np.eye(n, dtype=complex)
        for cell in spec.layer_cells(t):
            try:
                setting = program.cell_settings[cell]
            except KeyError:
                raise KeyError(
                    f"program has no setting for cell (layer={cell.layer}, "
                    f"top_mode={cell.top_mode})"
                ) from None
            i = cell.top_mode - 1
            layer[i : i + 2, i : i + 2] = cell_unitary(setting)
        total = np.diag(np.exp(1j * screens[:, t - 1])) @ layer @ total
    return total
