import numpy as np
import pytest

from oocutv.store import from_dense


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def tiled(tmp_path):
    """File-backed store of a dense matrix, named for the cache."""

    def make(matrix, nb, name="A"):
        return from_dense(matrix, nb, tmp_path / f"{name}.ooct", name)

    return make
