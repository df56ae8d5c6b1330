import sys
from pathlib import Path

import numpy as np
import pytest


ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from matcore import Trifactor  # noqa: E402


def random_factor(rng: np.random.Generator, n: int, k: int, density: float = 1.0) -> Trifactor:
    """Random nonnegative (B, C); with density < 1 some entries are zeroed."""
    B = rng.uniform(0.0, 1.0, size=(n, k))
    C = rng.uniform(0.0, 1.0, size=(k, k))
    C = 0.5 * (C + C.T)
    if density < 1.0:
        B[rng.uniform(size=B.shape) > density] = 0.0
        mask = rng.uniform(size=C.shape) > density
        C[mask | mask.T] = 0.0
    return Trifactor(B, C)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def shift_matrix():
    return np.array([[0, 2, 1, 1], [2, 0, 1, 1], [1, 1, 0, 2], [1, 1, 2, 0]], dtype=float)


@pytest.fixture
def obstruction_matrix():
    return np.array([[1, 1, 2, 2], [1, 0, 1, 2], [2, 1, 0, 1], [2, 2, 1, 1]], dtype=float)


@pytest.fixture
def write_mat(tmp_path):
    """Write an array to tmp_path/<name>.mat and return the path as a string."""
    from matrix_io import write_matrix

    def _write(name: str, values) -> str:
        return str(write_matrix(tmp_path / f"{name}.mat", values))

    return _write
