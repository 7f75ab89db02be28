import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # expose tests/oracles.py

from meshwalk import MeshProgram, MeshSpec, RbsSetting, build_symmetric_qw


@pytest.fixture
def spec14() -> MeshSpec:
    return MeshSpec()


@pytest.fixture
def qw_program(spec14) -> MeshProgram:
    return build_symmetric_qw(spec14)


def random_program(spec: MeshSpec, rng: np.random.Generator) -> MeshProgram:
    """Uniformly random cell settings and phase screens."""
    settings = {
        cell: RbsSetting(rng.uniform(-np.pi, np.pi), rng.uniform(-np.pi, np.pi))
        for cell in spec.cells
    }
    screens = rng.uniform(-np.pi, np.pi, (spec.num_modes, spec.depth))
    return MeshProgram(settings, screens)
