"""Top-level package for oocutv, an out-of-core randUTV least-squares solver."""

from .cache import BlockCache, CachePolicy, CacheStats
from .config import CacheConfig, FactorOptions, SolveOptions, Variant
from .errors import OocError
from .models import CodFactorization, SolveResult
from .randutv import build_task_list, factor
from .solver import estimate_rank, lstsq, nullify_t12, solve_cod, solve_truncated, transform_rhs
from .store import MemoryTileStore, Tile, TileStore, from_dense, to_dense

__all__ = [
    "BlockCache",
    "CacheConfig",
    "CachePolicy",
    "CacheStats",
    "CodFactorization",
    "FactorOptions",
    "MemoryTileStore",
    "OocError",
    "SolveOptions",
    "SolveResult",
    "Tile",
    "TileStore",
    "Variant",
    "build_task_list",
    "estimate_rank",
    "factor",
    "from_dense",
    "lstsq",
    "nullify_t12",
    "solve_cod",
    "solve_truncated",
    "to_dense",
    "transform_rhs",
]
