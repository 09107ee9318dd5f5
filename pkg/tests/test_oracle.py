import numpy as np
import pytest

from oocutv.cache import BlockCache, CachePolicy, CacheStats
from oocutv.errors import CacheCapacityError, RankError, ShapeError
from oocutv.oracle import (
    gelsy_lstsq_dense,
    qr_lstsq_dense,
    randutv_dense_reference,
    residual_dense,
    simulate_cache_trace,
    singular_values,
    svd_lstsq_dense,
)
from oocutv.scheduler import execute_sequential
from oocutv.store import from_dense
from oocutv.tasks import Intent, Operand, TaskKind, TaskList


def test_identity(rng):
    b = rng.standard_normal(5)
    x, rank = svd_lstsq_dense(np.eye(5), b)
    assert rank == 5
    assert np.allclose(x, b)
    assert np.allclose(qr_lstsq_dense(np.eye(5), b), b)


def test_rank_one_minimal_norm():
    x, rank = svd_lstsq_dense(np.array([[1.0, 0.0], [0.0, 0.0]]), np.array([1.0, 1.0]))
    assert rank == 1
    assert np.allclose(x, [1.0, 0.0])


def test_svd_and_gelsy_agree(rng):
    a = rng.standard_normal((30, 8)) @ rng.standard_normal((8, 20))
    b = rng.standard_normal((30, 2))
    x_svd, r_svd = svd_lstsq_dense(a, b)
    x_gelsy, r_gelsy = gelsy_lstsq_dense(a, b)
    assert r_svd == r_gelsy == 8
    assert np.allclose(x_svd, x_gelsy, atol=1e-9)
    assert residual_dense(a, x_svd, b) == pytest.approx(residual_dense(a, x_gelsy, b), rel=1e-9)


def test_qr_refuses_rank_deficiency(rng):
    a = rng.standard_normal((6, 2)) @ rng.standard_normal((2, 4))
    with pytest.raises(RankError):
        qr_lstsq_dense(a, np.ones(6))
    with pytest.raises(ShapeError):
        qr_lstsq_dense(np.ones((2, 3)), np.ones(2))


def test_tau_and_shape_checks():
    with pytest.raises(RankError):
        svd_lstsq_dense(np.eye(2), np.ones(2), tau=1.0)
    with pytest.raises(ShapeError):
        svd_lstsq_dense(np.eye(2), np.ones(3))


def test_singular_values_sorted(rng):
    s = singular_values(rng.standard_normal((6, 4)))
    assert s.shape == (4,)
    assert np.all(np.diff(s) <= 0.0)


def test_reference_factorization(rng):
    a = rng.standard_normal((13, 9))
    u, t, v, bt = randutv_dense_reference(a, q=1, nb=4, build_u=True)
    assert bt is None
    assert np.allclose(a @ v, u @ t, atol=1e-12)
    assert np.linalg.norm(t) == pytest.approx(np.linalg.norm(a))
    assert np.max(np.abs(t)) <= singular_values(a)[0] * (1 + 1e-12)


def test_reference_single_tile_is_an_svd(rng):
    a = rng.standard_normal((4, 4))
    u, t, v, _ = randutv_dense_reference(a, nb=4, build_u=True)
    assert np.allclose(t, np.diag(singular_values(a)), atol=1e-12)
    assert np.allclose(u @ t @ v.T, a, atol=1e-12)


def test_reference_needs_a_tall_matrix():
    with pytest.raises(ShapeError):
        randutv_dense_reference(np.ones((2, 3)))


def hand_trace() -> TaskList:
    tasks = TaskList()
    tasks.add(TaskKind.KEEP_UPP, 0, Operand("A", 0, 0, Intent.READ_WRITE))
    tasks.add(TaskKind.TRSM, 0, Operand("A", 0, 0), Operand("B", 0, 0, Intent.READ_WRITE))
    tasks.add(TaskKind.ZERO, 0, Operand("A", 1, 0, Intent.WRITE))
    return tasks


def run_hand_trace(policy: CachePolicy, capacity: int) -> CacheStats:
    cache = BlockCache(capacity, policy)
    cache.register("A", from_dense(np.ones((4, 2)), 2, name="A"))
    cache.register("B", from_dense(np.ones((2, 1)), 2, name="B"))
    return execute_sequential(hand_trace(), cache).stats


def test_simulator_without_cache():
    stats = simulate_cache_trace(hand_trace(), CachePolicy.NONE, 1 << 20, lambda block: 32)
    assert stats == CacheStats(disk_reads=3, disk_writes=3, hits=0, misses=3)


def test_simulator_with_room_for_everything():
    stats = simulate_cache_trace(hand_trace().to_trace(), "lru", 1 << 20, lambda block: 32)
    assert stats == CacheStats(disk_reads=2, disk_writes=3, hits=1, misses=2)


@pytest.mark.parametrize("policy", [CachePolicy.NONE, CachePolicy.LRU, CachePolicy.LFU])
def test_simulator_matches_the_cache(policy):
    sizes = {("A", 0, 0): 32, ("A", 1, 0): 32, ("B", 0, 0): 16}
    assert simulate_cache_trace(hand_trace(), policy, 1 << 20, sizes) == run_hand_trace(policy, 1 << 20)


def test_simulator_capacity_error():
    with pytest.raises(CacheCapacityError):
        simulate_cache_trace(hand_trace(), CachePolicy.LRU, 40, lambda block: 32)
