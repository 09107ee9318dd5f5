"""Synthetic rank-deficient matrices and the right-hand-side scenarios."""

import logging
from enum import IntEnum
from pathlib import Path

import numpy as np

from .errors import OptionConflictError, RankError, ShapeError
from .kernels import stream
from .store import BaseTileStore, MemoryTileStore, Tile, TileStore, copy_store
from .utils import ceil_div, extent

logger = logging.getLogger(__name__)

# stream keys: (seed, purpose, ...)
BASE, SCALES, X_TRUE, PERTURB = range(4)


class Scenario(IntEnum):
    PROVIDED = 1
    ONES = 2
    CONSISTENT = 3
    PERTURBED = 4


def _new_store(m: int, n: int, nb: int, path: str | Path | None, name: str) -> BaseTileStore:
    if path is None:
        return MemoryTileStore(m, n, nb, name)
    return TileStore.create(m, n, nb, path, name)


def gen_rank_deficient(
    m: int, n: int, r: int, seed: int = 0, nb: int = 64, path: str | Path | None = None
) -> BaseTileStore:
    """
    m x n matrix of rank r.

    The first r rows are uniform(0, 1) with n added to entries (i, i). Every later
    group of r rows repeats them scaled by its own uniform(0.5, 1.5) factor; the
    last group is cut off at m rows.

    Raises:
        RankError: If r is outside [1, min(m, n)]
    """
    if not 1 <= r <= min(m, n):
        raise RankError(f"rank {r} outside [1, {min(m, n)}]")
    nb = min(nb, max(m, n))
    store = _new_store(m, n, nb, path, "A")
    copies = ceil_div(m - r, r) if m > r else 0
    scales = stream(seed, SCALES).uniform(0.5, 1.5, copies)
    base_tiles = ceil_div(r, nb)
    for j in range(store.block_cols):
        cols = extent(n, nb, j)
        strip = np.vstack(
            [stream(seed, BASE, bi, j).uniform(0.0, 1.0, (extent(r, nb, bi), cols)) for bi in range(base_tiles)]
        )
        for g in range(j * nb, min(j * nb + cols, r)):
            strip[g, g - j * nb] += n
        for i in range(store.block_rows):
            g = np.arange(i * nb, i * nb + extent(m, nb, i))
            base = np.where(g < r, g, (g - r) % r)
            factor = np.ones(g.shape)
            replica = g >= r
            factor[replica] = scales[(g[replica] - r) // r]
            store.write_tile(Tile(np.asfortranarray(strip[base] * factor[:, None]), (i, j)))
    logger.debug(f"generated {m}x{n} matrix of rank {r} (seed={seed}, nb={nb})")
    return store


def _multiply(a: BaseTileStore, x: np.ndarray, out: BaseTileStore) -> BaseTileStore:
    nb = a.nb
    for i in range(a.block_rows):
        rows = extent(a.m, nb, i)
        acc = np.zeros((rows, x.shape[1]))
        for j in range(a.block_cols):
            acc += a.read_tile(i, j).data @ x[j * nb : j * nb + extent(a.n, nb, j)]
        out.write_block(i * nb, 0, acc)
    return out


def make_rhs(
    scenario: Scenario | int,
    a: BaseTileStore,
    seed: int = 0,
    provided_b: BaseTileStore | None = None,
    k: int = 1,
    path: str | Path | None = None,
    perturb_frac: float = 0.10,
    perturb_scale: float = 0.999,
) -> tuple[BaseTileStore, np.ndarray | None]:
    """
    Right-hand sides for one of the four test scenarios.

    Returns:
        (B, x_true); x_true is set for the consistent and perturbed scenarios

    Raises:
        OptionConflictError: If the provided scenario has no b, or the fraction is outside [0, 1]
        ShapeError: If the provided b does not have A's height
    """
    scenario = Scenario(scenario)
    nb = min(a.nb, max(a.m, k))
    if scenario is Scenario.PROVIDED:
        if provided_b is None:
            raise OptionConflictError("scenario 1 needs a provided right-hand side")
        if provided_b.m != a.m:
            raise ShapeError(f"provided b has {provided_b.m} rows, A has {a.m}")
        target = min(a.nb, max(a.m, provided_b.n))
        if provided_b.nb == target and path is None:
            return provided_b, None
        return copy_store(provided_b, _new_store(a.m, provided_b.n, target, path, "B")), None
    if not 0.0 <= perturb_frac <= 1.0:
        raise OptionConflictError(f"perturbation fraction {perturb_frac} outside [0, 1]")

    b = _new_store(a.m, k, nb, path, "B")
    if scenario is Scenario.ONES:
        for i, j in b.coordinates():
            b.write_tile(Tile(np.ones(b.tile_shape(i, j), order="F"), (i, j)))
        return b, None

    x_true = stream(seed, X_TRUE).uniform(0.0, 1.0, (a.n, k))
    _multiply(a, x_true, b)
    if scenario is Scenario.PERTURBED:
        count = round(perturb_frac * a.m * k)
        flat = stream(seed, PERTURB).choice(a.m * k, size=count, replace=False)
        # column-major positions, like the tile layout
        rows, cols = flat % a.m, flat // a.m
        for i, j in b.coordinates():
            mask = (rows // nb == i) & (cols // nb == j)
            if not mask.any():
                continue
            tile = b.read_tile(i, j)
            tile.data[rows[mask] - i * nb, cols[mask] - j * nb] *= perturb_scale
            b.write_tile(tile)
        logger.debug(f"perturbed {count} of {a.m * k} entries by {perturb_scale}")
    return b, x_true
