import numpy as np
import pytest

from asdkit.dataset import ColumnInfo, DesignMatrix
from asdkit.numerics import Matrix, SeededRng


def make_design(X, y, continuous=()):
    X = np.asarray(X, dtype=np.float64)
    cols = tuple(
        ColumnInfo(f"f{j}", f"f{j}", continuous=(j in continuous))
        for j in range(X.shape[1])
    )
    return DesignMatrix(Matrix(X), cols, np.asarray(y, dtype=np.int64))


@pytest.fixture
def blob_data():
    """Two well-separated 2-D point clouds, 60 rows per class."""
    rng = SeededRng(99)
    a = rng.normal_array(120).reshape(60, 2) * 0.6
    b = rng.normal_array(120).reshape(60, 2) * 0.6 + 4.0
    X = np.vstack([a, b])
    y = np.array([0] * 60 + [1] * 60)
    return make_design(X, y, continuous=(0, 1))
