"""Counter-based Gaussian sampling keyed on (seed, step, tile row)."""

import numpy as np


def stream(*key: int) -> np.random.Generator:
    """Philox generator whose state depends only on key."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in key])))


def gauss_tile(rows: int, cols: int, rng: np.random.Generator | tuple[int, ...]) -> np.ndarray:
    """I.i.d. standard normal rows x cols block, column-major."""
    if isinstance(rng, tuple):
        rng = stream(*rng)
    return np.asfortranarray(rng.standard_normal((rows, cols)))
