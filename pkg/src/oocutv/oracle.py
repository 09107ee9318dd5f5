"""
Dense in-core references for differential testing.

Nothing here is used by the out-of-core path. The least-squares references go
through LAPACK drivers unrelated to the tile kernels. The randUTV reference
applies the tile kernels to tile copies of whole arrays. The trace simulator replays
a task list against a model of the cache without touching any tile data.
"""

import math
from collections.abc import Callable, Mapping

import numpy as np
import scipy.linalg

from .cache import ASSOCIATIVE_SETS, CachePolicy, CacheStats, set_index
from .errors import CacheCapacityError, RankError, ShapeError
from .kernels import (
    CompactReflectors,
    GemmMode,
    ReflectorShape,
    Side,
    apply_q_dense,
    apply_q_td,
    gauss_tile,
    gemm,
    keep_upper,
    qr_dense,
    qr_triangular_dense,
    svd_dense,
    unit_lower,
)
from .store import ITEM_BYTES
from .tasks import BlockId, Intent, TaskList, parse_trace
from .utils import ceil_div, extent


def _as_2d(b: np.ndarray) -> tuple[np.ndarray, bool]:
    b = np.asarray(b, dtype=np.float64)
    return (b[:, None], True) if b.ndim == 1 else (b, False)


def _check(a: np.ndarray, b: np.ndarray) -> None:
    if a.ndim != 2 or a.shape[0] != b.shape[0]:
        raise ShapeError(f"A {a.shape} and B {b.shape} do not conform")


def svd_lstsq_dense(a: np.ndarray, b: np.ndarray, tau: float = 1e-10) -> tuple[np.ndarray, int]:
    """
    Minimal-norm least-squares solution through the full SVD.

    Singular values at or below tau * sigma_1 are treated as zero.

    Returns:
        (X, numerical rank); X is 1-D when b is
    """
    if not 0.0 < tau < 1.0:
        raise RankError(f"tau must lie in (0, 1), got {tau}")
    a = np.asarray(a, dtype=np.float64)
    b2, flat = _as_2d(b)
    _check(a, b2)
    u, s, vt = scipy.linalg.svd(a, full_matrices=False, lapack_driver="gesvd")
    rank = int(np.count_nonzero(s > tau * s[0])) if s.size and s[0] > 0 else 0
    x = vt[:rank].T @ ((u[:, :rank].T @ b2) / s[:rank, None])
    return (x[:, 0] if flat else x), rank


def qr_lstsq_dense(a: np.ndarray, b: np.ndarray, tau: float = 1e-10) -> np.ndarray:
    """
    x = R^{-1} Q^T b from an unpivoted QR; full column rank only.

    Raises:
        ShapeError: If A is wider than tall
        RankError: If some |R_ii| is at or below tau * max |R_ii|
    """
    a = np.asarray(a, dtype=np.float64)
    b2, flat = _as_2d(b)
    _check(a, b2)
    if a.shape[0] < a.shape[1]:
        raise ShapeError(f"unpivoted QR needs m >= n, got {a.shape}")
    q, r = scipy.linalg.qr(a, mode="economic")
    diag = np.abs(np.diagonal(r))
    if diag.size and diag.min() <= tau * diag.max():
        raise RankError("matrix is numerically rank deficient; unpivoted QR does not apply")
    x = scipy.linalg.solve_triangular(r, q.T @ b2)
    return x[:, 0] if flat else x


def gelsy_lstsq_dense(a: np.ndarray, b: np.ndarray, tau: float = 1e-10) -> tuple[np.ndarray, int]:
    """Column-pivoted complete orthogonal decomposition through LAPACK xGELSY."""
    a = np.asarray(a, dtype=np.float64)
    b2, flat = _as_2d(b)
    _check(a, b2)
    x, _, rank, _ = scipy.linalg.lstsq(a, b2, cond=tau, lapack_driver="gelsy")
    return (x[:, 0] if flat else x), int(rank)


def singular_values(a: np.ndarray) -> np.ndarray:
    return scipy.linalg.svdvals(np.asarray(a, dtype=np.float64))


def residual_dense(a: np.ndarray, x: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a @ x - b))


class _InCoreRandUtv:
    """
    randUTV over whole arrays.

    Every kernel operand is a fresh column-major copy of one nb x nb tile of an
    array, the layout a tile store hands out, and is written back after the call.
    Steps run in the order of the out-of-core task list, so the results agree
    bit for bit without sharing the task list, the stores or the cache.
    """

    def __init__(self, a: np.ndarray, nb: int, q: int, seed: int, build_u: bool, b: np.ndarray | None):
        m, n = a.shape
        self.m, self.n, self.nb, self.q, self.seed = m, n, nb, q, seed
        self.mt, self.nt = ceil_div(m, nb), ceil_div(n, nb)
        self.kt = 0 if b is None else ceil_div(b.shape[1], nb)
        self.arrays = {
            "A": a,
            "V": np.eye(n, order="F"),
            "G": np.zeros((m, nb), order="F"),
            "Y": np.zeros((n, nb), order="F"),
            "Z": np.zeros((m, nb), order="F"),
            "TU": np.zeros((self.mt * nb, nb), order="F"),
            "TV": np.zeros((self.nt * nb, nb), order="F"),
            "SU": np.zeros((self.nt * nb, nb), order="F"),
            "SV": np.zeros((self.nt * nb, nb), order="F"),
        }
        self.build_u = build_u
        if build_u:
            self.arrays["U"] = np.eye(m, order="F")
        if b is not None:
            self.arrays["B"] = b

    def tile(self, name: str, i: int, j: int) -> np.ndarray:
        nb = self.nb
        return np.array(self.arrays[name][i * nb : (i + 1) * nb, j * nb : (j + 1) * nb], order="F")

    def put(self, name: str, i: int, j: int, data: np.ndarray) -> None:
        nb = self.nb
        self.arrays[name][i * nb : (i + 1) * nb, j * nb : (j + 1) * nb] = data

    def targets(self, k: int) -> list[tuple[str, int]]:
        return [("A", j) for j in range(k + 1, self.nt)] + [("B", c) for c in range(self.kt)]

    def run(self) -> None:
        for k in range(self.nt):
            b = extent(self.n, self.nb, k)
            last = k == self.nt - 1 and self.nt > 1
            if not last:
                self.sample(k, b)
                self.right_transform(k, b)
            if not (last and k == self.mt - 1 and extent(self.m, self.nb, k) == b):
                self.left_transform(k, b)
            self.small_svd(k, b)

    def sample(self, k: int, b: int) -> None:
        rows, cols = range(k, self.mt), range(k, self.nt)
        for i in rows:
            g = self.tile("G", i, 0)
            g[:, :b] = gauss_tile(g.shape[0], b, (self.seed, k, i))
            self.put("G", i, 0, g)
        self.multiply_tn(b, "G", rows, cols)
        for _ in range(self.q):
            for i in rows:
                z = self.tile("Z", i, 0)
                for t, j in enumerate(cols):
                    gemm(GemmMode.NN, z[:, :b], self.tile("A", i, j), self.tile("Y", j, 0)[:, :b], beta=float(t > 0))
                self.put("Z", i, 0, z)
            self.multiply_tn(b, "Z", rows, cols)

    def multiply_tn(self, b: int, source: str, rows: range, cols: range) -> None:
        for j in cols:
            y = self.tile("Y", j, 0)
            for t, i in enumerate(rows):
                gemm(GemmMode.TN, y[:, :b], self.tile("A", i, j), self.tile(source, i, 0)[:, :b], beta=float(t > 0))
            self.put("Y", j, 0, y)

    def right_transform(self, k: int, b: int) -> None:
        sides = [("A", i) for i in range(self.mt)] + [("V", i) for i in range(self.nt)]
        y, tv = self.tile("Y", k, 0), self.tile("TV", k, 0)
        tv[:b, :b] = qr_dense(y[:, :b]).tf
        self.put("Y", k, 0, y)
        self.put("TV", k, 0, tv)
        refl = CompactReflectors(unit_lower(y[:, :b]), tv[:b, :b])
        for name, i in sides:
            c = self.tile(name, i, k)
            apply_q_dense(refl, Side.RIGHT, c)
            self.put(name, i, k, c)
        for j in range(k + 1, self.nt):
            top, d, tv = self.tile("Y", k, 0), self.tile("Y", j, 0), self.tile("TV", j, 0)
            tv[:b, :b] = qr_triangular_dense(top[:, :b], d[:, :b]).tf
            self.put("Y", k, 0, top)
            self.put("Y", j, 0, d)
            self.put("TV", j, 0, tv)
            refl = CompactReflectors(d[:, :b], tv[:b, :b], ReflectorShape.STACKED)
            for name, i in sides:
                c_top, c_bot = self.tile(name, i, k), self.tile(name, i, j)
                apply_q_td(refl, Side.RIGHT, c_top, c_bot)
                self.put(name, i, k, c_top)
                self.put(name, i, j, c_bot)

    def left_transform(self, k: int, b: int) -> None:
        a_kk, tu = self.tile("A", k, k), self.tile("TU", k, 0)
        tu[:b, :b] = qr_dense(a_kk).tf
        self.put("A", k, k, a_kk)
        self.put("TU", k, 0, tu)
        refl = CompactReflectors(unit_lower(a_kk), tu[:b, :b])
        for name, j in self.targets(k):
            c = self.tile(name, k, j)
            apply_q_dense(refl, Side.LEFT_T, c)
            self.put(name, k, j, c)
        if self.build_u:
            for r in range(self.mt):
                c = self.tile("U", r, k)
                apply_q_dense(refl, Side.RIGHT, c)
                self.put("U", r, k, c)
        for i in range(k + 1, self.mt):
            a_kk, a_ik, tu = self.tile("A", k, k), self.tile("A", i, k), self.tile("TU", i, 0)
            tu[:b, :b] = qr_triangular_dense(a_kk[:b], a_ik).tf
            self.put("A", k, k, a_kk)
            self.put("TU", i, 0, tu)
            refl = CompactReflectors(a_ik, tu[:b, :b], ReflectorShape.STACKED)
            for name, j in self.targets(k):
                c_top, c_bot = self.tile(name, k, j), self.tile(name, i, j)
                apply_q_td(refl, Side.LEFT_T, c_top[:b], c_bot)
                self.put(name, k, j, c_top)
                self.put(name, i, j, c_bot)
            if self.build_u:
                for r in range(self.mt):
                    c_top, c_bot = self.tile("U", r, k), self.tile("U", r, i)
                    apply_q_td(refl, Side.RIGHT, c_top[:, :b], c_bot)
                    self.put("U", r, k, c_top)
                    self.put("U", r, i, c_bot)
            self.put("A", i, k, 0.0)
        a_kk = self.tile("A", k, k)
        keep_upper(a_kk)
        self.put("A", k, k, a_kk)

    def small_svd(self, k: int, b: int) -> None:
        a_kk, su, sv = self.tile("A", k, k), self.tile("SU", k, 0), self.tile("SV", k, 0)
        result = svd_dense(a_kk[:b, :b])
        a_kk[...] = 0.0
        a_kk[np.arange(b), np.arange(b)] = result.sigma
        su[:b, :b] = result.u
        sv[:b, :b] = result.v
        self.put("A", k, k, a_kk)
        self.put("SU", k, 0, su)
        self.put("SV", k, 0, sv)
        updates = [("A", i, k, slice(None), GemmMode.RIGHT, sv) for i in range(k)]
        updates += [(name, k, j, slice(0, b), GemmMode.LEFT_T, su) for name, j in self.targets(k)]
        updates += [("V", r, k, slice(None), GemmMode.RIGHT, sv) for r in range(self.nt)]
        for name, i, j, rows, mode, rotation in updates:
            c = self.tile(name, i, j)
            gemm(mode, c[rows], rotation[:b, :b])
            self.put(name, i, j, c)
        if self.build_u:
            for r in range(self.mt):
                c = self.tile("U", r, k)
                gemm(GemmMode.RIGHT, c[:, :b], su[:b, :b])
                self.put("U", r, k, c)


def randutv_dense_reference(
    a: np.ndarray, q: int = 0, nb: int = 64, seed: int = 0, build_u: bool = False, b: np.ndarray | None = None
) -> tuple[np.ndarray | None, np.ndarray, np.ndarray, np.ndarray | None]:
    """
    In-core randUTV with the tile kernels applied to whole arrays.

    Draws the same Gaussian tiles and runs the kernels in the same order as
    `factor`, so T, V, U and U^T b match the out-of-core results exactly.

    Returns:
        (U, T, V, U^T b); U is None unless build_u, U^T b is None unless b is given

    Raises:
        ShapeError: If A is wider than tall or b has the wrong height
    """
    t = np.array(a, dtype=np.float64, order="F")
    if t.ndim != 2 or t.shape[0] < t.shape[1]:
        raise ShapeError(f"factorization needs m >= n, got {t.shape}")
    bt = None
    if b is not None:
        bt, _ = _as_2d(np.array(b, dtype=np.float64, order="F"))
        _check(t, bt)
    run = _InCoreRandUtv(t, min(nb, t.shape[1]), q, seed, build_u, bt)
    run.run()
    return run.arrays.get("U"), t, run.arrays["V"], bt


class _Line:
    __slots__ = ("block", "dirty", "last_use", "nbytes", "pinned", "set_index")

    def __init__(self, block: BlockId, nbytes: int, set_index: int | None, last_use: int):
        self.block = block
        self.nbytes = nbytes
        self.set_index = set_index
        self.last_use = last_use
        self.dirty = False
        self.pinned = False


def simulate_cache_trace(
    trace: TaskList | str,
    policy: CachePolicy | str,
    capacity: int,
    nbytes: Mapping[BlockId, int] | Callable[[BlockId], int],
    slot_bytes: int | None = None,
) -> CacheStats:
    """
    Replay a task access string against a model of the block cache.

    Each task pins its distinct blocks (resident ones first), runs, and unpins
    them; a final flush writes back every dirty line. No tile data is moved.

    Args:
        trace: Task list or its text trace
        policy: Eviction policy to model
        capacity: Cache capacity in bytes
        nbytes: Byte size of each block
        slot_bytes: Fixed slot size for lru4; defaults to the largest block

    Raises:
        CacheCapacityError: If one task's blocks cannot be held at once
    """
    tasks = parse_trace(trace) if isinstance(trace, str) else trace
    policy = CachePolicy(policy)
    size = nbytes if callable(nbytes) else nbytes.__getitem__
    if policy is CachePolicy.LRU4 and slot_bytes is None:
        slot_bytes = max((size(block) for task in tasks for block, _ in task.blocks()), default=ITEM_BYTES)
    uses = tasks.schedule()

    lines: dict[BlockId, _Line] = {}
    used = 0
    tick = 0
    reads = writes = hits = misses = 0

    def charge(block: BlockId) -> int:
        return slot_bytes if policy is CachePolicy.LRU4 else size(block)

    def fits(need: int, bucket: int | None) -> bool:
        if policy is CachePolicy.LRU4:
            slots = capacity // need // ASSOCIATIVE_SETS
            return sum(1 for line in lines.values() if line.set_index == bucket) < slots
        return used + need <= capacity

    def next_use(block: BlockId, now: int) -> float:
        for index in uses.get(block, []):
            if index >= now:
                return index
        return math.inf

    def victim_key(line: _Line, now: int) -> tuple:
        if policy is CachePolicy.LFU:
            return (next_use(line.block, now), -line.last_use)
        return (-line.last_use,)

    def drop(line: _Line) -> None:
        nonlocal used, writes
        if line.dirty:
            writes += 1
        used -= line.nbytes
        del lines[line.block]

    for task in tasks:
        now = task.index
        requests = task.blocks()
        requests.sort(key=lambda request: request[0] not in lines)
        pinned: list[_Line] = []
        for block, intent in requests:
            tick += 1
            line = lines.get(block)
            if line is None:
                need = charge(block)
                bucket = set_index(block) if policy is CachePolicy.LRU4 else None
                too_big = capacity // need // ASSOCIATIVE_SETS < 1 if policy is CachePolicy.LRU4 else need > capacity
                if too_big:
                    raise CacheCapacityError(f"block {block} cannot fit a {capacity}-byte cache")
                while not fits(need, bucket):
                    candidates = [
                        c for c in lines.values() if not c.pinned and (bucket is None or c.set_index == bucket)
                    ]
                    if not candidates:
                        raise CacheCapacityError(f"task {now} does not fit a {capacity}-byte cache")
                    drop(max(candidates, key=lambda c: victim_key(c, now)))
                if intent is not Intent.WRITE:
                    reads += 1
                    misses += 1
                line = _Line(block, need, bucket, tick)
                lines[block] = line
                used += need
            elif intent is not Intent.WRITE:
                hits += 1
            line.pinned = True
            line.last_use = tick
            if intent is not Intent.READ:
                line.dirty = True
            pinned.append(line)
        for line in pinned:
            line.pinned = False
            if policy is CachePolicy.NONE:
                drop(line)

    writes += sum(1 for line in lines.values() if line.dirty)
    return CacheStats(disk_reads=reads, disk_writes=writes, hits=hits, misses=misses)
