import numpy as np
import pytest

from oocutv.cache import BlockCache, CachePolicy
from oocutv.config import FactorOptions
from oocutv.errors import ShapeError
from oocutv.oracle import randutv_dense_reference
from oocutv.randutv import factor
from oocutv.scheduler import OverlappedExecutor, SequentialExecutor
from oocutv.store import ITEM_BYTES, from_dense, to_dense
from oocutv.workspace import Workspace


def tiles(count: int, nb: int) -> int:
    return count * nb * nb * ITEM_BYTES


def run_factor(a, nb, tmp_path, policy=CachePolicy.LFU, capacity=8, executor=None, b=None, **options):
    tmp_path.mkdir(parents=True, exist_ok=True)
    store = from_dense(a, nb, tmp_path / "A.ooct", "A")
    rhs = None if b is None else from_dense(b, nb, tmp_path / "B.ooct", "B")
    opts = FactorOptions(nb=nb, rhs=rhs, **options)
    cache = BlockCache(tiles(capacity, nb), policy)
    workspace = Workspace(tmp_path)
    fac = factor(store, opts, cache, executor, workspace)
    out = {
        "T": to_dense(fac.t),
        "V": to_dense(fac.v),
        "U": None if fac.u is None else to_dense(fac.u),
        "Bt": None if fac.bt is None else to_dense(fac.bt),
        "report": fac.report,
    }
    fac.close()
    workspace.close()
    return out


@pytest.mark.parametrize("shape, nb", [((30, 20), 6), ((17, 17), 5), ((12, 12), 4), ((11, 3), 3)])
def test_factor_invariants(tmp_path, rng, shape, nb):
    a = rng.standard_normal(shape)
    out = run_factor(a, nb, tmp_path, build_u=True, q=1)
    t, v, u = out["T"], out["V"], out["U"]
    m, n = shape
    assert np.linalg.norm(a @ v - u @ t) <= 1e-10 * np.linalg.norm(a)
    assert np.linalg.norm(v.T @ v - np.eye(n)) <= 1e-11 * n
    assert np.linalg.norm(u.T @ u - np.eye(m)) <= 1e-11 * m
    assert not np.tril(t, -1).any()
    assert np.all(np.diagonal(t) >= 0.0)
    assert np.linalg.norm(t) == pytest.approx(np.linalg.norm(a), rel=1e-12)


def test_identity_input(tmp_path):
    out = run_factor(np.eye(4), 2, tmp_path, build_u=True)
    t = out["T"]
    assert np.allclose(np.abs(np.diagonal(t)), 1.0)
    assert np.allclose(np.eye(4) @ out["V"], out["U"] @ t, atol=1e-12)


def test_diagonal_reveals_singular_values(tmp_path):
    out = run_factor(np.diag([5.0, 3.0, 1.0, 1e-14]), 2, tmp_path, q=2)
    diag = np.diagonal(out["T"])
    assert np.all(np.abs(diag[:3] - [5.0, 3.0, 1.0]) <= 0.01 * np.array([5.0, 3.0, 1.0]))
    assert diag[3] < 1e-10


def test_rhs_is_transformed_on_the_fly(tmp_path, rng):
    a, b = rng.standard_normal((14, 10)), rng.standard_normal((14, 3))
    u, _, _, bt = randutv_dense_reference(a, q=1, nb=4, seed=5, build_u=True, b=b)
    assert np.linalg.norm(bt - u.T @ b) <= 1e-12 * np.linalg.norm(b)


@pytest.mark.parametrize("shape, nb", [((23, 16), 5), ((16, 16), 4), ((11, 3), 3)])
def test_matches_whole_array_reference(tmp_path, rng, shape, nb):
    a, b = rng.standard_normal(shape), rng.standard_normal((shape[0], 2))
    out = run_factor(a, nb, tmp_path, capacity=6, b=b, q=1, seed=3)
    _, t_ref, v_ref, bt_ref = randutv_dense_reference(a, q=1, nb=nb, seed=3, b=b)
    assert np.array_equal(out["T"], t_ref)
    assert np.array_equal(out["V"], v_ref)
    assert np.array_equal(out["Bt"], bt_ref)


@pytest.mark.parametrize("policy", list(CachePolicy))
def test_policy_does_not_change_values(tmp_path, rng, policy):
    a = rng.standard_normal((16, 16))
    reference = run_factor(a, 4, tmp_path / "reference", CachePolicy.NONE, capacity=64)
    capacity = 16 if policy is CachePolicy.LRU4 else 5
    out = run_factor(a, 4, tmp_path / policy.value, policy, capacity=capacity)
    assert np.array_equal(out["T"], reference["T"])
    assert np.array_equal(out["V"], reference["V"])


def test_overlapped_matches_sequential(tmp_path, rng):
    a, b = rng.standard_normal((20, 16)), rng.standard_normal((20, 1))
    seq = run_factor(a, 4, tmp_path / "seq", executor=SequentialExecutor(), b=b)
    ovl = run_factor(a, 4, tmp_path / "ovl", executor=OverlappedExecutor(lookahead=4), b=b)
    for key in ("T", "V", "Bt"):
        assert np.array_equal(seq[key], ovl[key])
    assert ovl["report"].counts() == seq["report"].counts()


def test_factor_rejects_mismatched_tiles(tmp_path, rng):
    store = from_dense(rng.standard_normal((8, 8)), 4, tmp_path / "A.ooct", "A")
    with pytest.raises(ShapeError):
        factor(store, FactorOptions(nb=2), BlockCache(tiles(8, 4)))



def with_spectrum(rng, m, s):
    n = len(s)
    u, _ = np.linalg.qr(rng.standard_normal((m, n)))
    v, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return (u * s) @ v.T


def test_power_steps_sharpen_the_diagonal(tmp_path):
    s = np.logspace(0.0, -2.0, 64)
    lead = 40
    ordered = 0
    for seed in range(10):
        a = with_spectrum(np.random.default_rng(seed), 64, s)
        errors = []
        for q in range(3):
            diag = np.diagonal(run_factor(a, 8, tmp_path / f"{seed}-{q}", capacity=64, q=q, seed=seed)["T"])
            errors.append(np.max(np.abs(diag[:lead] - s[:lead]) / s[:lead]))
        ordered += errors[0] >= errors[1] >= errors[2]
    assert ordered >= 9


def test_first_block_is_a_low_rank_approximation(tmp_path):
    nb = 8
    s = np.concatenate([np.logspace(0.0, -0.5, nb), 1e-3 * np.logspace(0.0, -1.0, 40)])
    best = np.sqrt(np.sum(s[nb:] ** 2))
    close = 0
    for seed in range(10):
        a = with_spectrum(np.random.default_rng(seed), 60, s)
        out = run_factor(a, nb, tmp_path / str(seed), capacity=64, build_u=True, q=1, seed=seed)
        u, t, v = out["U"][:, :nb], out["T"][:nb, :nb], out["V"][:, :nb]
        close += np.linalg.norm(a - u @ t @ v.T) <= 1.1 * best
    assert close >= 8
