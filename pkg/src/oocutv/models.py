"""Results of the factorization and solve pipeline."""

import math
from dataclasses import dataclass, field

from .cache import BlockCache
from .scheduler import BaseExecutor, ExecutionReport, SequentialExecutor
from .store import BaseTileStore
from .utils import fmt_float
from .workspace import Workspace


@dataclass
class CodFactorization:
    """
    A V = U T with T overwriting the factored store.

    T and Bt keep the cache names "A" and "B" they were computed under, so the
    follow-up task lists reuse resident tiles.
    """

    t: BaseTileStore
    v: BaseTileStore
    nb: int
    q: int
    cache: BlockCache
    executor: BaseExecutor = field(default_factory=SequentialExecutor)
    u: BaseTileStore | None = None
    bt: BaseTileStore | None = None
    rank: int | None = None
    nullified: bool = False
    report: ExecutionReport = field(default_factory=ExecutionReport)
    workspace: Workspace | None = None
    owns_workspace: bool = False
    solved: bool = False

    @property
    def m(self) -> int:
        return self.t.m

    @property
    def n(self) -> int:
        return self.t.n

    def run(self, tasks) -> ExecutionReport:
        """Execute a follow-up task list on this factorization's cache and fold in its report."""
        report = self.executor.execute(tasks, self.cache)
        self.report = self.report.merge(report)
        return report

    def close(self) -> None:
        """Drop the cached tiles of the factors and remove an owned workspace."""
        for name in ("A", "V", "U", "B", "X"):
            if name in self.cache.stores:
                self.cache.unregister(name)
        if self.owns_workspace and self.workspace is not None:
            self.workspace.close()
            self.workspace = None


@dataclass
class SolveResult:
    x: BaseTileStore
    rank: int
    xnorm_fro: float
    residual_fro: float | None = None
    report: ExecutionReport = field(default_factory=ExecutionReport)

    def line(self) -> str:
        residual = math.nan if self.residual_fro is None else self.residual_fro
        return f"rank={self.rank} residual_fro={fmt_float(residual)} xnorm_fro={fmt_float(self.xnorm_fro)}"
