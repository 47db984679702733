import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from rnls_lab.core_layer.grid import auto_grid, make_grid  # noqa: E402
from rnls_lab.models import ModelParams  # noqa: E402
from rnls_lab.theory_layer.closed_forms import phi_profile  # noqa: E402


@pytest.fixture
def cubic_params():
    """d=1, k=0, p=2, ω=1: φ = √2 sech x, M = 2, E = -2/3"""
    return ModelParams(d=1, k=0, p=2.0, beta=1.0, omega=1.0)


@pytest.fixture
def cubic_grid(cubic_params):
    return auto_grid(cubic_params)


@pytest.fixture
def cubic_soliton(cubic_params, cubic_grid):
    return phi_profile(cubic_params, cubic_grid)


@pytest.fixture
def regularized_params():
    """d=1, k=1, p=6, β=1, ω=5: m'(ω) > 0"""
    return ModelParams(d=1, k=1, p=6.0, beta=1.0, omega=5.0)


@pytest.fixture
def small_grid_1d():
    return make_grid(1, 0, [256], [40.0])
