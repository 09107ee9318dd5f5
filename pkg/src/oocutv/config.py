"""Option models and the variant presets."""

from enum import Enum

from pydantic import BaseModel, Field, model_validator

from .cache import BlockCache, CachePolicy
from .errors import OptionConflictError
from .scheduler import DEFAULT_LOOKAHEAD
from .store import ITEM_BYTES, BaseTileStore

MB = 1 << 20


class CacheConfig(BaseModel):
    """Size and eviction policy of the block cache."""

    capacity_mb: float = Field(64.0, gt=0, description="Cache capacity in MiB")
    policy: CachePolicy = Field(CachePolicy.LFU, description="Eviction policy")
    capacity_tiles: int | None = Field(
        None, ge=1, description="Capacity in nb x nb tiles; overrides capacity_mb when set"
    )

    def capacity_bytes(self, nb: int) -> int:
        if self.capacity_tiles is not None:
            return self.capacity_tiles * nb * nb * ITEM_BYTES
        return int(self.capacity_mb * MB)

    def build(self, nb: int) -> BlockCache:
        return BlockCache(self.capacity_bytes(nb), self.policy)


class FactorOptions(BaseModel):
    """
    Options of one randUTV factorization.

    Example:
        opts = FactorOptions(q=1, nb=64, rhs=b_store)
    """

    q: int = Field(0, ge=0, description="Power-iteration count")
    nb: int = Field(64, ge=1, description="Tile size")
    build_u: bool = Field(False, description="Accumulate the left orthogonal factor U explicitly")
    rhs: BaseTileStore | None = Field(None, description="Right-hand sides updated on the fly to U^T B")
    seed: int = Field(0, ge=0, description="Seed of the Gaussian sampling stream")
    allow_both: bool = Field(False, description="Permit build_u together with rhs (consistency testing)")

    model_config = {"arbitrary_types_allowed": True}

    @model_validator(mode="after")
    def check_left_path(self) -> "FactorOptions":
        if self.build_u and self.rhs is not None and not self.allow_both:
            raise OptionConflictError("build_u and rhs are exclusive unless allow_both is set")
        return self


class SolveOptions(BaseModel):
    """Options of the least-squares pipeline."""

    q: int = Field(0, ge=0, description="Power-iteration count")
    nb: int = Field(64, ge=1, description="Tile size")
    tau: float = Field(1e-10, gt=0, lt=1, description="Relative rank threshold on |diag(T)|")
    nullify: bool = Field(True, description="Zero T12 for the minimal-norm solution")
    build_u: bool = Field(False, description="Build U and transform B afterwards instead of on the fly")
    cache: CacheConfig = Field(default_factory=CacheConfig, description="Block cache settings")
    overlap: bool = Field(False, description="Overlap disk I/O with computation")
    lookahead: int = Field(DEFAULT_LOOKAHEAD, ge=1, description="Tasks the I/O thread may prepare ahead")
    seed: int = Field(0, ge=0, description="Seed of the Gaussian sampling stream")
    in_place: bool = Field(False, description="Overwrite A with T; skips the residual")
    verbose: bool = Field(False, description="Log every task as it runs")


class Variant(str, Enum):
    """Named presets of the solver, from uncached explicit U to overlapped LFU."""

    V21T = "v21t"
    V23T = "v23t"
    V23C = "v23c"
    V23D = "v23d"
    V23E = "v23e"
    V23X = "v23x"
    V24S = "v24s"

    def apply(self, opts: SolveOptions) -> SolveOptions:
        """Return opts with the preset's fields overridden."""
        cache = opts.cache
        update: dict = {"build_u": False, "overlap": False, "nullify": True}
        if self is Variant.V21T:
            update["build_u"] = True
            policy = CachePolicy.NONE
        elif self is Variant.V23T:
            policy = CachePolicy.NONE
        elif self is Variant.V23C:
            policy = CachePolicy.LRU4
        elif self is Variant.V23D:
            policy = CachePolicy.LRU
        elif self is Variant.V23E:
            policy = CachePolicy.LFU
        elif self is Variant.V23X:
            policy = CachePolicy.LFU
            update["overlap"] = True
        elif self is Variant.V24S:
            policy = CachePolicy.LFU
            update["overlap"] = True
            update["nullify"] = False
        else:
            raise OptionConflictError(f"Unknown variant: {self}")
        update["cache"] = cache.model_copy(update={"policy": policy})
        return opts.model_copy(update=update)
