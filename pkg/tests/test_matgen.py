import numpy as np
import pytest

from oocutv.errors import OptionConflictError, RankError, ShapeError
from oocutv.matgen import Scenario, gen_rank_deficient, make_rhs
from oocutv.oracle import singular_values, svd_lstsq_dense
from oocutv.store import MemoryTileStore, TileStore, from_dense, to_dense


def test_full_rank_when_r_is_square():
    dense = to_dense(gen_rank_deficient(6, 6, 6, nb=4))
    assert np.linalg.matrix_rank(dense) == 6


@pytest.mark.parametrize("r", [3, 5, 8])
def test_gap_after_r(r):
    dense = to_dense(gen_rank_deficient(2 * r, r + 2, r, seed=r, nb=4))
    s = singular_values(dense)
    assert s[r - 1] >= 1e10 * s[r]
    assert svd_lstsq_dense(dense, np.ones(2 * r), tau=1e-8)[1] == r


def test_replica_rows_are_scaled_copies():
    r = 5
    dense = to_dense(gen_rank_deficient(13, 7, r, seed=2, nb=3))
    for start in (r, 2 * r):
        group = dense[start : min(start + r, 13)]
        base = dense[: len(group)]
        scale = group[0, 0] / base[0, 0]
        assert 0.5 <= scale <= 1.5
        assert np.allclose(group, scale * base)


def test_diagonal_shift():
    dense = to_dense(gen_rank_deficient(8, 6, 4, nb=4))
    assert np.all(np.diagonal(dense)[:4] >= 6.0)
    assert np.all(dense[:4, :4][~np.eye(4, dtype=bool)] < 1.0)


def test_deterministic_in_seed():
    first = to_dense(gen_rank_deficient(10, 8, 4, seed=9, nb=4))
    assert np.array_equal(first, to_dense(gen_rank_deficient(10, 8, 4, seed=9, nb=4)))
    assert not np.array_equal(first, to_dense(gen_rank_deficient(10, 8, 4, seed=10, nb=4)))


def test_written_to_file(tmp_path):
    store = gen_rank_deficient(9, 6, 3, nb=4, path=tmp_path / "A.ooct")
    assert isinstance(store, TileStore)
    store.close()
    with TileStore.open(tmp_path / "A.ooct") as reopened:
        assert reopened.shape == (9, 6)
        assert np.linalg.matrix_rank(to_dense(reopened)) == 3


@pytest.mark.parametrize("r", [0, 7])
def test_rank_out_of_range(r):
    with pytest.raises(RankError):
        gen_rank_deficient(8, 6, r)


def test_ones_scenario():
    a = gen_rank_deficient(10, 6, 3, nb=4)
    b, x_true = make_rhs(Scenario.ONES, a, k=2)
    assert x_true is None
    assert np.array_equal(to_dense(b), np.ones((10, 2)))


def test_consistent_scenario():
    a = gen_rank_deficient(12, 8, 4, nb=4)
    b, x_true = make_rhs(Scenario.CONSISTENT, a, seed=1)
    assert x_true.shape == (8, 1)
    assert np.all((x_true >= 0.0) & (x_true < 1.0))
    assert np.allclose(to_dense(b), to_dense(a) @ x_true)


def test_perturbed_scenario_changes_a_tenth():
    a = gen_rank_deficient(40, 10, 5, nb=8)
    clean, _ = make_rhs(Scenario.CONSISTENT, a, seed=3, k=2)
    noisy, x_true = make_rhs(Scenario.PERTURBED, a, seed=3, k=2)
    changed = to_dense(clean) != to_dense(noisy)
    assert changed.sum() == 8
    assert np.allclose(to_dense(noisy)[changed], 0.999 * to_dense(clean)[changed])
    assert x_true is not None


def test_provided_scenario():
    a = gen_rank_deficient(6, 4, 2, nb=2)
    b = from_dense(np.arange(6.0).reshape(6, 1), 2, name="B")
    assert make_rhs(Scenario.PROVIDED, a, provided_b=b)[0] is b
    retiled, _ = make_rhs(1, a, provided_b=from_dense(np.arange(6.0).reshape(6, 1), 1))
    assert retiled.nb == 2
    assert np.array_equal(to_dense(retiled), np.arange(6.0).reshape(6, 1))


def test_scenario_errors():
    a = gen_rank_deficient(6, 4, 2, nb=2)
    with pytest.raises(OptionConflictError):
        make_rhs(Scenario.PROVIDED, a)
    with pytest.raises(ShapeError):
        make_rhs(Scenario.PROVIDED, a, provided_b=MemoryTileStore(5, 1, 2))
    with pytest.raises(OptionConflictError):
        make_rhs(Scenario.PERTURBED, a, perturb_frac=1.5)
    with pytest.raises(ValueError):
        make_rhs(5, a)
