"""Hardware-realism layer: imperfect couplers, thermo-optic response, loss.

The ideal cell assumes exact 50% directional couplers.  Here each coupler
carries a power-reflectivity error delta (sampled from a zero-mean Gaussian
whose width is calibrated against a target mean interferometric visibility),
phase shifters follow a monotone, saturating phase-versus-squared-bias
table, and propagation loss is a single scalar per pass — so it rescales
every intensity identically and never touches the unitary part.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .lattice import RbsSetting, cell_unitary

#: Reported mean interferometric visibility of the fabricated cells.
TARGET_MEAN_VISIBILITY = 0.9993
#: Reported end-to-end transmission loss bound, dB.
DEFAULT_INSERTION_LOSS_DB = 2.0
DEFAULT_MAX_BIAS_VOLTS = 12.0


def default_phase_table(max_bias: float = DEFAULT_MAX_BIAS_VOLTS,
                        knots: int = 41) -> np.ndarray:
    """Synthetic phase(V^2) table: linear to 1.5*pi, then saturating past 2*pi.

    Shape-only stand-in for the measured thermo-optic response (electron
    velocity saturation bends the curve at high bias); every element exceeds
    2*pi at full bias.  Columns: (squared bias, phase).
    """
    u = np.linspace(0.0, 1.0, knots)  # normalized squared bias
    knee, top = 0.6, 2.3 * np.pi
    slope = 1.5 * np.pi / knee
    phase = np.where(
        u <= knee,
        slope * u,
        1.5 * np.pi + (top - 1.5 * np.pi) * (1.0 - (1.0 - (u - knee) / (1.0 - knee)) ** 1.25),
    )
    return np.column_stack([u * max_bias**2, phase])


@dataclass(frozen=True)
class HardwareModel:
    coupler_sigma: float = 0.0          # std dev of the reflectivity error delta
    phase_table: np.ndarray = field(default_factory=default_phase_table)
    visibility_floor: float = 1.0       # measurement floor for transmission sweeps
    insertion_loss_db: float = 0.0

    def __post_init__(self):
        table = np.asarray(self.phase_table, dtype=float)
        if table.ndim != 2 or table.shape[1] != 2 or table.shape[0] < 2:
            raise ValueError("phase_table must be a (k>=2, 2) array of (V^2, phase)")
        if (np.diff(table[:, 0]) <= 0).any():
            raise ValueError("phase_table squared-bias column must increase strictly")
        if (np.diff(table[:, 1]) < 0).any():
            raise ValueError("phase_table phase column must be nondecreasing")
        object.__setattr__(self, "phase_table", table)
        if not 0.0 <= self.visibility_floor <= 1.0:
            raise ValueError("visibility_floor must lie in [0, 1]")
        if self.insertion_loss_db < 0.0:
            raise ValueError("insertion_loss_db must be >= 0")
        if self.coupler_sigma < 0.0:
            raise ValueError("coupler_sigma must be >= 0")

    @property
    def max_bias(self) -> float:
        return float(math.sqrt(self.phase_table[-1, 0]))

    def to_dict(self) -> dict:
        return {
            "coupler_sigma": self.coupler_sigma,
            "phase_table": self.phase_table.tolist(),
            "visibility_floor": self.visibility_floor,
            "insertion_loss_db": self.insertion_loss_db,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "HardwareModel":
        return cls(
            coupler_sigma=float(data["coupler_sigma"]),
            phase_table=np.asarray(data["phase_table"], dtype=float),
            visibility_floor=float(data["visibility_floor"]),
            insertion_loss_db=float(data["insertion_loss_db"]),
        )

    def save(self, path: str) -> None:
        with open(path, "w", newline="\n") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str) -> "HardwareModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def directional_coupler(delta: float) -> np.ndarray:
    """Symmetric coupler with power reflectivity 0.5 + delta."""
    r = 0.5 + delta
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"coupler reflectivity 0.5 + {delta} outside [0, 1]")
    t = math.sqrt(r)
    k = 1j * math.sqrt(1.0 - r)
    return np.array([[t, k], [k, t]], dtype=complex)


def imperfect_cell_unitary(setting: RbsSetting, coupler_errors: tuple[float, float]
                           ) -> np.ndarray:
    """Cell unitary with imperfect couplers; still exactly unitary.

    Built as coupler / internal differential phase / coupler, with the
    external differential phase on the top output arm so that zero coupler
    error reproduces :func:`cell_unitary` up to a global phase.  Loss never
    enters here; it is a separate scalar per pass.
    """
    d1, d2 = coupler_errors
    inner = np.diag([np.exp(1j * setting.theta), 1.0])
    outer = np.diag([np.exp(1j * setting.phi), 1.0])
    return outer @ directional_coupler(d2) @ inner @ directional_coupler(d1)


def visibility(coupler_errors: tuple[float, float], sweep_points: int = 4096) -> float:
    """Interferometric visibility from a numeric sweep of the internal phase.

    Sweeps theta over one period, records the extremal bar-port transmissions
    and returns (I_max - I_min) / (I_max + I_min).
    """
    d1, d2 = coupler_errors
    thetas = np.linspace(0.0, 2.0 * np.pi, sweep_points, endpoint=False)
    trans = np.array(
        [abs(imperfect_cell_unitary(RbsSetting(th, 0.0), (d1, d2))[0, 0]) ** 2
         for th in thetas]
    )
    i_max, i_min = float(trans.max()), float(trans.min())
    return (i_max - i_min) / (i_max + i_min)


def _mean_visibility_analytic(sigma: float, quad_points: int = 41) -> float:
    """Gauss-Hermite expectation of the closed-form visibility over coupler errors."""
    nodes, weights = np.polynomial.hermite_e.hermegauss(quad_points)
    w = weights / weights.sum()
    # far tail nodes can leave the physical reflectivity range; clamp there
    r = np.clip(0.5 + nodes * sigma, 0.0, 1.0)
    acc = 0.0
    for i in range(r.size):
        for j in range(r.size):
            a = r[i] * r[j]
            b = (1.0 - r[i]) * (1.0 - r[j])
            if a + b > 0.0:
                acc += w[i] * w[j] * (2.0 * math.sqrt(a * b) / (a + b))
    return acc


def calibrate_coupler_sigma(target_mean_visibility: float = TARGET_MEAN_VISIBILITY
                            ) -> float:
    """Coupler-error width whose expected visibility matches the target."""
    if not 0.0 < target_mean_visibility < 1.0:
        raise ValueError("target mean visibility must lie in (0, 1)")
    return float(brentq(
        lambda s: _mean_visibility_analytic(s) - target_mean_visibility, 1e-6, 0.1,
        xtol=1e-12,
    ))


def sample_coupler_errors(model: HardwareModel, n_cells: int, seed: int) -> np.ndarray:
    """(n_cells, 2) coupler errors drawn from the model's zero-mean law."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    return rng.normal(0.0, model.coupler_sigma, (n_cells, 2))


def bias_to_phase(model: HardwareModel, bias_volts: float) -> float:
    """Interpolate the monotone phase(V^2) table at a bias voltage."""
    table = model.phase_table
    v2 = float(bias_volts) ** 2
    if bias_volts < 0.0 or v2 > table[-1, 0] * (1 + 1e-12):
        raise ValueError(
            f"bias {bias_volts} V outside table domain [0, {model.max_bias:.4g}] V"
        )
    return float(np.interp(v2, table[:, 0], table[:, 1]))


def phase_to_bias(model: HardwareModel, phase: float) -> float:
    """Right inverse of :func:`bias_to_phase` within the table resolution."""
    table = model.phase_table
    if not table[0, 1] <= phase <= table[-1, 1]:
        raise ValueError(
            f"phase {phase} outside table range [{table[0, 1]:.4g}, {table[-1, 1]:.4g}]"
        )
    return float(math.sqrt(np.interp(phase, table[:, 1], table[:, 0])))


def apply_insertion_loss(model: HardwareModel, intensity_distribution) -> np.ndarray:
    """Scale intensities by the uniform per-pass transmission factor."""
    factor = 10.0 ** (-model.insertion_loss_db / 10.0)
    return np.asarray(intensity_distribution, dtype=float) * factor
