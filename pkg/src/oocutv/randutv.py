"""
Randomized UTV factorization A V = U T by blocks.

`build_task_list` materializes every task of the factorization before anything
runs; `factor` creates the scratch stores, registers them with the cache and
hands the list to an executor.

Store names used by the tasks:
    A   the input, overwritten by T
    V   right orthogonal factor, starts as the identity
    U   left orthogonal factor (build_u only)
    B   right-hand sides, overwritten by U^T B (rhs only)
    G, Y, Z     Gaussian sample, sampled row space, power-iteration product
    TU, TV      triangular factors of the left and right reflector blocks
    SU, SV      left and right singular vectors of the current diagonal block
"""

import logging
from dataclasses import dataclass

from .cache import BlockCache
from .config import FactorOptions
from .errors import ShapeError
from .kernels import GemmMode, Side
from .models import CodFactorization
from .scheduler import BaseExecutor, SequentialExecutor
from .store import BaseTileStore
from .tasks import Intent, Operand, TaskKind, TaskList
from .utils import Timer, ceil_div, extent
from .workspace import Workspace

logger = logging.getLogger(__name__)

R, RW, W = Intent.READ, Intent.READ_WRITE, Intent.WRITE


def _span(b: int, full: int) -> tuple[int, int] | None:
    return None if b == full else (0, b)


@dataclass
class _Builder:
    m: int
    n: int
    nb: int
    q: int
    seed: int
    rhs_cols: int
    build_u: bool

    def __post_init__(self):
        self.mt = ceil_div(self.m, self.nb)
        self.nt = ceil_div(self.n, self.nb)
        self.kt = ceil_div(self.rhs_cols, self.nb) if self.rhs_cols else 0
        self.tasks = TaskList()

    def rh(self, i: int) -> int:
        return extent(self.m, self.nb, i)

    def cw(self, j: int) -> int:
        return extent(self.n, self.nb, j)

    def add(self, kind: TaskKind, step: int, *operands: Operand, **params) -> None:
        self.tasks.add(kind, step, *operands, **params)

    def small(self, store: str, i: int, b: int, intent: Intent) -> Operand:
        """Leading b x b window of a reflector-factor or singular-vector tile."""
        span = _span(b, self.nb)
        return Operand(store, i, 0, intent, span, span)

    def sample_col(self, store: str, i: int, b: int, intent: Intent) -> Operand:
        return Operand(store, i, 0, intent, None, _span(b, self.nb))

    def right_rows(self) -> list[tuple[str, int]]:
        """Every tile row the right transforms act on: all of A and all of V."""
        return [("A", i) for i in range(self.mt)] + [("V", i) for i in range(self.nt)]

    def build(self) -> TaskList:
        for k in range(self.nt):
            b = self.cw(k)
            last = k == self.nt - 1 and self.nt > 1
            if not last:
                self.sample(k, b)
                self.right_transform(k, b)
            if not (last and k == self.mt - 1 and self.rh(k) == b):
                self.left_transform(k, b)
            self.small_svd(k, b)
        return self.tasks

    def sample(self, k: int, b: int) -> None:
        """Y := (A_BR^T A_BR)^q A_BR^T G over the trailing block."""
        rows, cols = range(k, self.mt), range(k, self.nt)
        for i in rows:
            self.add(TaskKind.NORMAL, k, self.sample_col("G", i, b, W), seed=self.seed, row=i)
        self.multiply_tn(k, b, "G", rows, cols)
        for _ in range(self.q):
            for i in rows:
                for t, j in enumerate(cols):
                    self.add(
                        TaskKind.GEMM_NN,
                        k,
                        self.sample_col("Z", i, b, W if t == 0 else RW),
                        Operand("A", i, j, R),
                        self.sample_col("Y", j, b, R),
                        mode=GemmMode.NN.value,
                        beta=0.0 if t == 0 else 1.0,
                    )
            self.multiply_tn(k, b, "Z", rows, cols)

    def multiply_tn(self, k: int, b: int, source: str, rows: range, cols: range) -> None:
        for j in cols:
            for t, i in enumerate(rows):
                self.add(
                    TaskKind.GEMM_TN,
                    k,
                    self.sample_col("Y", j, b, W if t == 0 else RW),
                    Operand("A", i, j, R),
                    self.sample_col(source, i, b, R),
                    mode=GemmMode.TN.value,
                    beta=0.0 if t == 0 else 1.0,
                )

    def right_transform(self, k: int, b: int) -> None:
        """QR of the sample, then A := A Q and V := V Q on every tile row."""
        panel = self.sample_col("Y", k, b, RW)
        self.add(TaskKind.COMP_DE, k, panel, self.small("TV", k, b, W))
        for store, i in self.right_rows():
            self.add(
                TaskKind.APPL_R_DE,
                k,
                self.sample_col("Y", k, b, R),
                self.small("TV", k, b, R),
                Operand(store, i, k, RW),
                side=Side.RIGHT.value,
            )
        for j in range(k + 1, self.nt):
            self.add(
                TaskKind.COMP_TD,
                k,
                self.sample_col("Y", k, b, RW),
                self.sample_col("Y", j, b, RW),
                self.small("TV", j, b, W),
            )
            for store, i in self.right_rows():
                self.add(
                    TaskKind.APPL_R_TD,
                    k,
                    self.sample_col("Y", j, b, R),
                    self.small("TV", j, b, R),
                    Operand(store, i, k, RW),
                    Operand(store, i, j, RW),
                    side=Side.RIGHT.value,
                )

    def left_transform(self, k: int, b: int) -> None:
        """Triangularize column panel k from the left; carry the reflectors to A, B and U."""
        self.add(TaskKind.COMP_DE, k, Operand("A", k, k, RW), self.small("TU", k, b, W))
        targets = [("A", j) for j in range(k + 1, self.nt)] + [("B", c) for c in range(self.kt)]
        for store, j in targets:
            self.add(
                TaskKind.APPL_L_DE,
                k,
                Operand("A", k, k, R),
                self.small("TU", k, b, R),
                Operand(store, k, j, RW),
                side=Side.LEFT_T.value,
            )
        if self.build_u:
            for r in range(self.mt):
                self.add(
                    TaskKind.APPL_R_DE,
                    k,
                    Operand("A", k, k, R),
                    self.small("TU", k, b, R),
                    Operand("U", r, k, RW),
                    side=Side.RIGHT.value,
                )
        top = (0, b) if self.rh(k) != b else None
        for i in range(k + 1, self.mt):
            self.add(
                TaskKind.COMP_TD,
                k,
                Operand("A", k, k, RW, top, None),
                Operand("A", i, k, RW),
                self.small("TU", i, b, W),
            )
            for store, j in targets:
                self.add(
                    TaskKind.APPL_L_TD,
                    k,
                    Operand("A", i, k, R),
                    self.small("TU", i, b, R),
                    Operand(store, k, j, RW, top, None),
                    Operand(store, i, j, RW),
                    side=Side.LEFT_T.value,
                )
            if self.build_u:
                u_cols = _span(b, self.rh(k))
                for r in range(self.mt):
                    self.add(
                        TaskKind.APPL_R_TD,
                        k,
                        Operand("A", i, k, R),
                        self.small("TU", i, b, R),
                        Operand("U", r, k, RW, None, u_cols),
                        Operand("U", r, i, RW),
                        side=Side.RIGHT.value,
                    )
            self.add(TaskKind.ZERO, k, Operand("A", i, k, W))
        self.add(TaskKind.KEEP_UPP, k, Operand("A", k, k, RW))

    def small_svd(self, k: int, b: int) -> None:
        """SVD of the b x b diagonal block and the matching updates of T, V, U and B."""
        self.add(
            TaskKind.SVD, k, Operand("A", k, k, RW), self.small("SU", k, b, W), self.small("SV", k, b, W), b=b
        )
        for i in range(k):
            self.add(
                TaskKind.GEMM_NN, k, Operand("A", i, k, RW), self.small("SV", k, b, R), mode=GemmMode.RIGHT.value
            )
        top = (0, b) if self.rh(k) != b else None
        targets = [("A", j) for j in range(k + 1, self.nt)] + [("B", c) for c in range(self.kt)]
        for store, j in targets:
            self.add(
                TaskKind.GEMM_ABTA,
                k,
                Operand(store, k, j, RW, top, None),
                self.small("SU", k, b, R),
                mode=GemmMode.LEFT_T.value,
            )
        for r in range(self.nt):
            self.add(
                TaskKind.GEMM_NN, k, Operand("V", r, k, RW), self.small("SV", k, b, R), mode=GemmMode.RIGHT.value
            )
        if self.build_u:
            u_cols = _span(b, self.rh(k))
            for r in range(self.mt):
                self.add(
                    TaskKind.GEMM_AAB,
                    k,
                    Operand("U", r, k, RW, None, u_cols),
                    self.small("SU", k, b, R),
                    mode=GemmMode.RIGHT.value,
                )


def _check_shape(m: int, n: int, nb: int) -> None:
    if m < n:
        raise ShapeError(f"factorization needs m >= n, got {m}x{n}; pad with zero rows first")
    if not 1 <= nb <= n:
        raise ShapeError(f"tile size {nb} outside [1, {n}]")


def build_task_list(m: int, n: int, opts: FactorOptions) -> TaskList:
    """
    Every task of the factorization of an m x n matrix, in execution order.

    Raises:
        ShapeError: If m < n, the tile size exceeds n, or the right-hand sides have the wrong height
    """
    _check_shape(m, n, opts.nb)
    rhs_cols = 0
    if opts.rhs is not None:
        if opts.rhs.m != m:
            raise ShapeError(f"right-hand sides have {opts.rhs.m} rows, A has {m}")
        rhs_cols = opts.rhs.n
    builder = _Builder(m, n, opts.nb, opts.q, opts.seed, rhs_cols, opts.build_u)
    return builder.build()


def scratch_shapes(m: int, n: int, nb: int, q: int) -> dict[str, tuple[int, int]]:
    mt, nt = ceil_div(m, nb), ceil_div(n, nb)
    shapes = {
        "G": (m, nb),
        "Y": (n, nb),
        "TU": (mt * nb, nb),
        "TV": (nt * nb, nb),
        "SU": (nt * nb, nb),
        "SV": (nt * nb, nb),
    }
    if q > 0:
        shapes["Z"] = (m, nb)
    return shapes


def factor(
    a: BaseTileStore,
    opts: FactorOptions,
    cache: BlockCache,
    executor: BaseExecutor | None = None,
    workspace: Workspace | None = None,
) -> CodFactorization:
    """
    Factor A V = U T out of core.

    A's store is overwritten by T and opts.rhs (if any) by U^T B. V, and U when
    requested, are created in the workspace, which the returned factorization
    owns when none was passed in.

    Raises:
        ShapeError: If A is wider than tall or its tile size differs from opts.nb
        CacheCapacityError: If one task's tiles do not fit the cache
        TaskFailedError: If a kernel fails
    """
    if a.nb != opts.nb:
        raise ShapeError(f"store tile size {a.nb} differs from requested nb={opts.nb}")
    if opts.rhs is not None and opts.rhs.nb != a.nb:
        raise ShapeError(f"right-hand sides tiled with nb={opts.rhs.nb}, A with nb={a.nb}")
    m, n, nb = a.m, a.n, a.nb
    executor = executor or SequentialExecutor()
    owned = workspace is None
    workspace = workspace or Workspace.from_env()

    with Timer("task list build"):
        tasks = build_task_list(m, n, opts)
    logger.info(f"randUTV of {m}x{n} with nb={nb}, q={opts.q}: {len(tasks)} tasks")

    v = workspace.identity("V", n, nb)
    u = workspace.identity("U", m, nb) if opts.build_u else None
    cache.register("A", a)
    cache.register("V", v)
    if u is not None:
        cache.register("U", u)
    if opts.rhs is not None:
        cache.register("B", opts.rhs)
    shapes = scratch_shapes(m, n, nb, opts.q)
    for name, (rows, cols) in shapes.items():
        cache.register(name, workspace.create(name, rows, cols, nb))

    try:
        report = executor.execute(tasks, cache)
    finally:
        for name in shapes:
            cache.unregister(name)
            workspace.discard(name)

    return CodFactorization(
        t=a,
        v=v,
        nb=nb,
        q=opts.q,
        cache=cache,
        executor=executor,
        u=u,
        bt=opts.rhs,
        report=report,
        workspace=workspace,
        owns_workspace=owned,
    )
