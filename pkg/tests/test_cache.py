import threading
from collections import Counter

import numpy as np
import pytest

from oocutv.cache import ASSOCIATIVE_SETS, BlockCache, CachePolicy, CacheStats, set_index
from oocutv.config import CacheConfig, FactorOptions, SolveOptions
from oocutv.errors import CacheCapacityError, PinError, UnknownBlockError
from oocutv.matgen import Scenario, gen_rank_deficient, make_rhs
from oocutv.oracle import simulate_cache_trace
from oocutv.randutv import build_task_list, factor, scratch_shapes
from oocutv.solver import lstsq
from oocutv.store import ITEM_BYTES, MemoryTileStore, from_dense, to_dense
from oocutv.tasks import Intent, Operand, TaskKind, TaskList
from oocutv.utils import extent
from oocutv.workspace import Workspace

NB = 2
TILE = NB * NB * ITEM_BYTES


def cache_with(policy=CachePolicy.LRU, capacity=8 * TILE, n=8):
    cache = BlockCache(capacity, policy)
    cache.register("A", from_dense(np.arange(float(n * n)).reshape(n, n), NB, name="A"))
    return cache


def test_second_acquire_is_a_hit():
    cache = cache_with()
    cache.release(cache.acquire(("A", 0, 0)))
    cache.release(cache.acquire(("A", 0, 0)))
    assert cache.stats == CacheStats(disk_reads=1, hits=1, misses=1)


def test_write_only_acquire_skips_the_read():
    cache = cache_with()
    handle = cache.acquire(("A", 1, 1), Intent.WRITE)
    assert not handle.data.any()
    handle.data[...] = 7.0
    cache.release(handle)
    assert cache.stats == CacheStats()
    cache.flush()
    assert cache.stats.disk_writes == 1
    assert np.array_equal(cache.stores["A"].read_tile(1, 1).data, np.full((NB, NB), 7.0))


def test_release_of_dirty_tile_defers_the_write():
    cache = cache_with()
    cache.release(cache.acquire(("A", 0, 0), Intent.READ_WRITE))
    assert cache.stats.disk_writes == 0
    assert cache.is_dirty(("A", 0, 0))
    cache.flush()
    assert cache.stats.disk_writes == 1
    assert not cache.is_dirty(("A", 0, 0))


def test_flush_of_empty_cache_writes_nothing():
    assert cache_with().flush() == CacheStats()


def test_no_cache_reloads_between_tasks():
    cache = cache_with(CachePolicy.NONE)
    cache.release(cache.acquire(("A", 0, 0), Intent.READ_WRITE))
    assert not cache.resident(("A", 0, 0))
    assert cache.stats.disk_writes == 1
    cache.release(cache.acquire(("A", 0, 0)))
    assert cache.stats.disk_reads == 2


def test_pinned_tiles_are_never_evicted():
    cache = cache_with(capacity=2 * TILE)
    first = cache.acquire(("A", 0, 0))
    second = cache.acquire(("A", 0, 1))
    with pytest.raises(CacheCapacityError):
        cache.acquire(("A", 1, 0))
    cache.release(second)
    third = cache.acquire(("A", 1, 0))
    assert cache.resident(("A", 0, 0))
    assert not cache.resident(("A", 0, 1))
    cache.release(first)
    cache.release(third)


def test_acquire_many_is_all_or_nothing():
    cache = cache_with(capacity=2 * TILE)
    blocks = [(("A", 0, 0), Intent.READ), (("A", 0, 1), Intent.WRITE), (("A", 1, 1), Intent.READ)]
    with pytest.raises(CacheCapacityError):
        cache.acquire_many(blocks)
    assert cache.pinned_bytes == 0
    assert not cache.is_dirty(("A", 0, 1))


def test_pin_errors():
    cache = cache_with()
    handle = cache.acquire(("A", 0, 0))
    with pytest.raises(PinError):
        cache.flush()
    cache.release(handle)
    with pytest.raises(PinError):
        cache.release(handle)


def test_unknown_store():
    with pytest.raises(UnknownBlockError):
        cache_with().acquire(("B", 0, 0))


def test_lru_victim():
    cache = cache_with()
    for block in [("A", 0, 0), ("A", 0, 1), ("A", 1, 0)]:
        cache.release(cache.acquire(block))
    cache.release(cache.acquire(("A", 0, 0)))
    assert cache.choose_victim() == ("A", 0, 1)


def test_lfu_evicts_the_latest_next_use():
    cache = cache_with(CachePolicy.LFU)
    schedule = TaskList()
    uses = {5: ("A", 0, 0), 90: ("A", 0, 1)}
    for index in range(100):
        store, i, j = uses.get(index, ("A", 3, 3))
        schedule.add(TaskKind.KEEP_UPP, 0, Operand(store, i, j, Intent.READ_WRITE))
    cache.set_schedule(schedule)
    cache.release(cache.acquire(("A", 0, 0)))
    cache.release(cache.acquire(("A", 0, 1)))
    assert cache.choose_victim(now=1) == ("A", 0, 1)
    cache.release(cache.acquire(("A", 1, 0)))
    # never used again ranks latest of all
    assert cache.choose_victim(now=1) == ("A", 1, 0)


def test_victim_needs_an_unpinned_tile():
    cache = cache_with()
    cache.acquire(("A", 0, 0))
    with pytest.raises(CacheCapacityError):
        cache.choose_victim()


def test_fixed_associativity_evicts_within_the_set():
    cache = cache_with(CachePolicy.LRU4, capacity=ASSOCIATIVE_SETS * TILE)
    blocks = [("A", i, j) for i in range(4) for j in range(4)]
    target = Counter(map(set_index, blocks)).most_common(1)[0][0]
    same = [b for b in blocks if set_index(b) == target]
    other = next(b for b in blocks if set_index(b) != target)
    assert len(same) >= 2
    cache.release(cache.acquire(same[0]))
    cache.release(cache.acquire(other))
    cache.release(cache.acquire(same[1]))
    assert not cache.resident(same[0])
    assert cache.resident(other)


def test_fixed_slots_are_full_tiles():
    cache = BlockCache(ASSOCIATIVE_SETS * TILE - 1, CachePolicy.LRU4)
    cache.register("A", MemoryTileStore(3, 3, NB, "A"))
    with pytest.raises(CacheCapacityError):
        cache.acquire(("A", 1, 1))


def test_capacity_from_config():
    assert CacheConfig(capacity_mb=1.0).capacity_bytes(4) == 1 << 20
    assert CacheConfig(capacity_tiles=25).capacity_bytes(4) == 25 * 16 * ITEM_BYTES
    assert CacheConfig(policy="lru").build(4).policy_kind is CachePolicy.LRU


def block_sizes(m, n, nb, q, k):
    shapes = scratch_shapes(m, n, nb, q) | {"A": (m, n), "V": (n, n), "B": (m, k)}

    def size(block):
        name, i, j = block
        rows, cols = shapes[name]
        return extent(rows, nb, i) * extent(cols, nb, j) * ITEM_BYTES

    return size


def replay(policy, capacity_tiles, m=24, n=24, nb=4, q=0):
    rng = np.random.default_rng(7)
    a = from_dense(rng.standard_normal((m, n)), nb, name="A")
    b = from_dense(rng.standard_normal((m, 1)), nb, name="B")
    opts = FactorOptions(q=q, nb=nb, rhs=b)
    cache = BlockCache(capacity_tiles * nb * nb * ITEM_BYTES, policy)
    with Workspace(memory=True) as workspace:
        fac = factor(a, opts, cache, workspace=workspace)
        t = to_dense(fac.t)
    tasks = build_task_list(m, n, opts)
    return fac.report.stats, tasks, block_sizes(m, n, nb, q, 1), t


@pytest.mark.parametrize("policy", list(CachePolicy))
def test_counters_match_trace_simulation(policy):
    stats, tasks, size, _ = replay(policy, 16)
    simulated = simulate_cache_trace(tasks.to_trace(), policy, 16 * 4 * 4 * ITEM_BYTES, size, 4 * 4 * ITEM_BYTES)
    assert stats == simulated


def test_policy_ordering_on_a_solve():
    a = gen_rank_deficient(72, 72, 70, seed=3, nb=8)
    b, _ = make_rhs(Scenario.CONSISTENT, a, seed=3)
    stats = {}
    for policy in CachePolicy:
        opts = SolveOptions(nb=8, cache=CacheConfig(capacity_tiles=25, policy=policy))
        stats[policy] = lstsq(a, b, opts).report.stats
    reads = [stats[policy].disk_reads for policy in CachePolicy]
    writes = [stats[policy].disk_writes for policy in CachePolicy]
    assert reads[0] > reads[1] >= reads[2] >= reads[3]
    assert writes[0] > writes[1] >= writes[2] >= writes[3]
    assert reads[2] <= 0.7 * reads[0]
    assert reads[3] <= 0.6 * reads[0]


def test_policies_agree_on_values():
    results = [replay(policy, 16)[3] for policy in CachePolicy]
    for t in results[1:]:
        assert np.array_equal(t, results[0])


class LockWatchingStore(MemoryTileStore):
    """Records whether another thread could take the cache lock during each transfer."""

    def __init__(self, m, n, nb, name):
        super().__init__(m, n, nb, name)
        self.cache = None
        self.lock_free = []

    def _check(self):
        if self.cache is None:
            return
        done = threading.Event()
        threading.Thread(target=lambda: (self.cache.stats, done.set()), daemon=True).start()
        self.lock_free.append(done.wait(timeout=2.0))

    def _load(self, i, j, rows, cols):
        self._check()
        return super()._load(i, j, rows, cols)

    def _save(self, i, j, data):
        self._check()
        super()._save(i, j, data)


@pytest.mark.parametrize("policy", [CachePolicy.LRU, CachePolicy.NONE])
def test_transfers_run_without_the_lock(policy):
    store = LockWatchingStore(4, 4, NB, "A")
    cache = BlockCache(2 * TILE, policy)
    cache.register("A", store)
    store.cache = cache
    handle = cache.acquire(("A", 0, 0), Intent.READ_WRITE)
    handle.data[...] = 1.0
    cache.release(handle)
    for block in (("A", 0, 1), ("A", 1, 0), ("A", 1, 1)):
        cache.release(cache.acquire(block))
    assert cache.stats.disk_writes == 1
    assert len(store.lock_free) == 5
    assert all(store.lock_free)
