"""
Least-squares solve on top of the randUTV factorization.

After `factor` the pipeline is: estimate the numerical rank r from diag(T),
optionally rotate T(0:r, r:n) to zero from the right, then back-substitute
with T(0:r, 0:r) and map the result through V. All tiled steps are task lists
executed on the factorization's cache.
"""

import logging
import math

import numpy as np

from .config import FactorOptions, SolveOptions
from .errors import OptionConflictError, RankError, ShapeError
from .kernels import GemmMode
from .models import CodFactorization, SolveResult
from .randutv import factor
from .scheduler import make_executor
from .store import BaseTileStore, MemoryTileStore, Tile, copy_store
from .tasks import Intent, Operand, TaskKind, TaskList
from .utils import Timer, ceil_div, extent
from .workspace import Workspace

logger = logging.getLogger(__name__)

R, RW, W = Intent.READ, Intent.READ_WRITE, Intent.WRITE


def _window(lo: int, hi: int, full: int) -> tuple[int, int] | None:
    return None if (lo, hi) == (0, full) else (lo, hi)


def _rank_split(r: int, nb: int) -> tuple[int, int]:
    """Tile holding column r-1 and the number of rank columns inside it."""
    kr = (r - 1) // nb
    return kr, r - kr * nb


def estimate_rank(t: BaseTileStore, tau: float = 1e-10) -> int:
    """
    Count diagonal entries of T above tau times the largest one.

    Raises:
        RankError: If tau is outside (0, 1)
    """
    if not 0.0 < tau < 1.0:
        raise RankError(f"tau must lie in (0, 1), got {tau}")
    diag = np.concatenate(
        [np.diagonal(t.read_tile(k, k).data) for k in range(min(t.block_rows, t.block_cols))]
    )
    top = float(np.max(np.abs(diag), initial=0.0))
    if top == 0.0:
        return 0
    return int(np.count_nonzero(np.abs(diag) > tau * top))


def build_nullify_tasks(n: int, nb: int, r: int) -> tuple[TaskList, int]:
    """
    Tasks that rotate T(0:r, r:n) to zero, sweeping diagonal blocks bottom-up.

    Returns:
        The task list and the number of column pieces right of the rank boundary
    """
    tasks = TaskList()
    if r <= 0 or r >= n:
        return tasks, 0
    nt = ceil_div(n, nb)
    kr, off = _rank_split(r, nb)
    pieces = []
    if off < extent(n, nb, kr):
        pieces.append((kr, off, extent(n, nb, kr)))
    pieces += [(j, 0, extent(n, nb, j)) for j in range(kr + 1, nt)]

    for k in range(kr, -1, -1):
        bk = off if k == kr else nb
        rows = _window(0, bk, nb)
        for p, (j, c0, c1) in enumerate(pieces):
            cols = _window(c0, c1, extent(n, nb, j))
            tz = Operand("TZ", k, p, W, _window(0, bk, nb), _window(0, bk, nb))
            tasks.add(
                TaskKind.COMP_RZ,
                k,
                Operand("A", k, k, RW, rows, rows),
                Operand("A", k, j, RW, rows, cols),
                tz,
            )
            updates = [("A", i) for i in range(k)] + [("V", i) for i in range(nt)]
            for store, i in updates:
                tasks.add(
                    TaskKind.APPL_R_RZ,
                    k,
                    Operand("A", k, j, R, rows, cols),
                    Operand("TZ", k, p, R, tz.rows, tz.cols),
                    Operand(store, i, k, RW, None, rows),
                    Operand(store, i, j, RW, None, cols),
                )
            whole = rows is None and cols is None
            tasks.add(TaskKind.ZERO, k, Operand("A", k, j, W if whole else RW, rows, cols))
    return tasks, len(pieces)


def nullify_t12(fac: CodFactorization, r: int | None = None) -> CodFactorization:
    """
    Zero T(0:r, r:n) with right rotations, carried into V.

    Raises:
        RankError: If r is outside [0, n] or the rank was never estimated
    """
    r = fac.rank if r is None else r
    if r is None or not 0 <= r <= fac.n:
        raise RankError(f"rank {r} outside [0, {fac.n}]")
    tasks, pieces = build_nullify_tasks(fac.n, fac.nb, r)
    if len(tasks):
        kr, _ = _rank_split(r, fac.nb)
        workspace = fac.workspace or Workspace.from_env()
        tz = workspace.create("TZ", (kr + 1) * fac.nb, pieces * fac.nb, fac.nb)
        fac.cache.register("TZ", tz)
        try:
            with Timer("nullify"):
                fac.run(tasks)
        finally:
            fac.cache.unregister("TZ")
            workspace.discard("TZ")
    fac.rank = r
    fac.nullified = True
    return fac


def build_solve_tasks(n: int, nb: int, r: int, k: int, m: int | None = None) -> TaskList:
    """
    Back-substitution with T(0:r, 0:r) on Bt, then X = V(:, 0:r) Bt(0:r, :).

    m is the height of Bt (defaults to n) and sets its tile extents.
    """
    tasks = TaskList()
    if r <= 0:
        return tasks
    m = m or n
    nt, ct = ceil_div(n, nb), ceil_div(k, nb)
    kr, off = _rank_split(r, nb)

    def head(step: int) -> int:
        return off if step == kr else nb

    for s in range(kr, -1, -1):
        bs = head(s)
        rows = _window(0, bs, extent(m, nb, s))
        diag = _window(0, bs, nb)
        for c in range(ct):
            tasks.add(TaskKind.TRSM, s, Operand("A", s, s, R, diag, diag), Operand("B", s, c, RW, rows, None))
        for i in range(s):
            for c in range(ct):
                tasks.add(
                    TaskKind.GEMM_AABT,
                    s,
                    Operand("B", i, c, RW),
                    Operand("A", i, s, R, None, diag),
                    Operand("B", s, c, R, rows, None),
                    mode=GemmMode.NN.value,
                    alpha=-1.0,
                )
    for i in range(nt):
        for c in range(ct):
            for s in range(kr + 1):
                bs = head(s)
                tasks.add(
                    TaskKind.GEMM_AABT,
                    kr + 1,
                    Operand("X", i, c, W if s == 0 else RW),
                    Operand("V", i, s, R, None, _window(0, bs, extent(n, nb, s))),
                    Operand("B", s, c, R, _window(0, bs, extent(m, nb, s)), None),
                    mode=GemmMode.NN.value,
                    beta=0.0 if s == 0 else 1.0,
                )
    return tasks


def _solve(fac: CodFactorization, r: int, out: BaseTileStore | None) -> SolveResult:
    if fac.bt is None:
        raise OptionConflictError("factorization carries no transformed right-hand side")
    if fac.solved:
        raise OptionConflictError("the transformed right-hand side was already consumed by a solve")
    if not 0 <= r <= fac.n:
        raise RankError(f"rank {r} outside [0, {fac.n}]")
    k = fac.bt.n
    if out is None:
        workspace = fac.workspace or Workspace.from_env()
        x = workspace.create("X", fac.n, k, fac.nb)
    else:
        if out.shape != (fac.n, k) or out.nb != fac.nb:
            raise ShapeError(f"output store {out.shape} nb={out.nb} does not fit X {fac.n}x{k} nb={fac.nb}")
        x = out
        if r == 0:
            for i, j in x.coordinates():
                x.write_tile(Tile.zeros(*x.tile_shape(i, j), (i, j)))
    tasks = build_solve_tasks(fac.n, fac.nb, r, k, fac.m)
    fac.cache.register("B", fac.bt)
    fac.cache.register("X", x)
    with Timer("solve"):
        report = fac.run(tasks)
    fac.cache.unregister("X")
    fac.solved = True
    return SolveResult(x=x, rank=r, xnorm_fro=xnorm_fro(x), report=report)


def solve_cod(fac: CodFactorization, out: BaseTileStore | None = None) -> SolveResult:
    """
    Minimal-norm solution X = V(:, 0:r) T(0:r, 0:r)^{-1} Bt(0:r, :).

    Raises:
        RankError: If the rank was never estimated
        OptionConflictError: If T12 was not nullified for a rank-deficient T
    """
    if fac.rank is None:
        raise RankError("estimate the rank before solving")
    if fac.rank < fac.n and not fac.nullified:
        raise OptionConflictError(f"rank {fac.rank} < n={fac.n}: nullify T12 first or use solve_truncated")
    return _solve(fac, fac.rank, out)


def solve_truncated(fac: CodFactorization, r: int | None = None, out: BaseTileStore | None = None) -> SolveResult:
    """Same formula with T12 ignored: a least-squares solution, not necessarily of minimal norm."""
    r = fac.rank if r is None else r
    if r is None:
        raise RankError("estimate the rank before solving")
    fac.rank = r
    return _solve(fac, r, out)


def transform_rhs(fac: CodFactorization, b: BaseTileStore) -> BaseTileStore:
    """
    Bt = U^T B for a factorization that built U.

    Raises:
        OptionConflictError: If U was not built
        ShapeError: If B's height or tile size does not match U
    """
    if fac.u is None:
        raise OptionConflictError("transform_rhs needs a factorization with build_u")
    if b.m != fac.m or b.nb != fac.nb:
        raise ShapeError(f"right-hand sides {b.shape} nb={b.nb} do not match U {fac.m}x{fac.m} nb={fac.nb}")
    workspace = fac.workspace or Workspace.from_env()
    bt = workspace.create("Bt", b.m, b.n, b.nb)
    mt, ct = b.block_rows, b.block_cols
    tasks = TaskList()
    for i in range(mt):
        for c in range(ct):
            for s in range(mt):
                tasks.add(
                    TaskKind.GEMM_TN,
                    0,
                    Operand("B", i, c, W if s == 0 else RW),
                    Operand("U", s, i, R),
                    Operand("RHS", s, c, R),
                    mode=GemmMode.TN.value,
                    beta=0.0 if s == 0 else 1.0,
                )
    if "B" in fac.cache.stores:
        fac.cache.unregister("B")
    fac.cache.register("B", bt)
    fac.cache.register("RHS", b)
    try:
        fac.run(tasks)
    finally:
        fac.cache.unregister("RHS")
    fac.bt = bt
    fac.solved = False
    return bt


def residual_fro(a: BaseTileStore, x: BaseTileStore, b: BaseTileStore) -> float:
    """||A X - B||_F streamed one tile row of A at a time."""
    if a.n != x.m or a.m != b.m or x.n != b.n:
        raise ShapeError(f"residual of {a.shape} x {x.shape} against {b.shape}")
    total = 0.0
    nb = a.nb
    for i in range(a.block_rows):
        r0, r1 = i * nb, min((i + 1) * nb, a.m)
        res = -b.read_block(r0, r1, 0, b.n)
        for j in range(a.block_cols):
            c0, c1 = j * nb, min((j + 1) * nb, a.n)
            res += a.read_tile(i, j).data @ x.read_block(c0, c1, 0, x.n)
        total += float(np.sum(res * res))
    return math.sqrt(total)


def xnorm_fro(x: BaseTileStore) -> float:
    return math.sqrt(sum(float(np.sum(x.read_tile(i, j).data ** 2)) for i, j in x.coordinates()))


def lstsq(
    a: BaseTileStore,
    b: BaseTileStore,
    opts: SolveOptions | None = None,
    workspace: Workspace | None = None,
    out: BaseTileStore | None = None,
) -> SolveResult:
    """
    Solve min ||A X - B||_F out of core.

    A and B are copied into the workspace at the requested tile size (A is
    factored in place only with opts.in_place). Wide systems are padded with
    zero rows, which leaves the minimal-norm solution unchanged. Without `out`
    and without a caller-owned workspace, X is returned as an in-memory store.

    Raises:
        ShapeError: If A and B differ in height
    """
    opts = opts or SolveOptions()
    if a.m != b.m:
        raise ShapeError(f"A has {a.m} rows, B has {b.m}")
    m, n = a.shape
    rows = max(m, n)
    nb = min(opts.nb, n)
    owned = workspace is None
    workspace = workspace or Workspace.from_env()
    if m < n:
        logger.info(f"padding {m}x{n} system with {n - m} zero rows")

    in_place = opts.in_place and rows == m and a.nb == nb and a.writable
    if opts.in_place and not in_place:
        logger.warning("in-place factorization not possible for this store; working on a copy")
    fac: CodFactorization | None = None
    try:
        with Timer("working copies"):
            work_a = a if in_place else workspace.copy("A", a, nb, rows)
            work_b = workspace.copy("B", b, nb, rows)
        cache = opts.cache.build(nb)
        executor = make_executor(opts.overlap, opts.lookahead, opts.verbose)
        fopts = FactorOptions(q=opts.q, nb=nb, build_u=opts.build_u, seed=opts.seed)
        if not opts.build_u:
            fopts = fopts.model_copy(update={"rhs": work_b})
        with Timer("factor"):
            fac = factor(work_a, fopts, cache, executor, workspace)
        if opts.build_u:
            transform_rhs(fac, work_b)
        fac.rank = estimate_rank(fac.t, opts.tau)
        logger.info(f"estimated rank {fac.rank} of {n} columns (tau={opts.tau:g})")
        if opts.nullify:
            nullify_t12(fac)
            result = solve_cod(fac, out)
        else:
            result = solve_truncated(fac, out=out)
        result.report = fac.report
        if owned and out is None:
            result.x = copy_store(result.x, MemoryTileStore(result.x.m, result.x.n, result.x.nb, "X"))
        if not in_place:
            with Timer("residual"):
                result.residual_fro = residual_fro(a, result.x, b)
        logger.info(f"disk traffic {fac.report.stats.line()}")
        return result
    finally:
        if fac is not None:
            fac.close()
        if owned:
            workspace.close()
