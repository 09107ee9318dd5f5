import numpy as np
from typer.testing import CliRunner

from oocutv.__main__ import app
from oocutv.mmio import read_matrix_market
from oocutv.oracle import svd_lstsq_dense
from oocutv.store import TileStore, to_dense

runner = CliRunner()


def generate(tmp_path, *extra):
    a, b = tmp_path / "A.ooct", tmp_path / "B.ooct"
    args = ["generate", str(a), "--m", "40", "--n", "24", "--rank", "12", "--nb", "8", "--rhs", str(b), *extra]
    result = runner.invoke(app, args)
    assert result.exit_code == 0, result.output
    return a, b


def dense(path):
    with TileStore.open(path) as store:
        return to_dense(store)


def test_generate_writes_a_and_b(tmp_path):
    a, b = generate(tmp_path, "--x-out", str(tmp_path / "x.mtx"))
    assert np.linalg.matrix_rank(dense(a)) == 12
    x_true = to_dense(read_matrix_market(tmp_path / "x.mtx"))
    assert np.allclose(dense(a) @ x_true, dense(b))


def test_generate_rejects_bad_rank(tmp_path):
    result = runner.invoke(app, ["generate", str(tmp_path / "A.ooct"), "--m", "4", "--n", "4", "--rank", "9"])
    assert result.exit_code == 1


def test_dump_header(tmp_path):
    a, _ = generate(tmp_path)
    result = runner.invoke(app, ["dump-header", str(a)])
    assert result.exit_code == 0
    for token in ("magic=OOCT", "m=40", "n=24", "nb=8", "block_rows=5"):
        assert token in result.stdout


def test_dump_header_of_a_foreign_file(tmp_path):
    path = tmp_path / "junk.ooct"
    path.write_bytes(b"not a tile store" * 8)
    assert runner.invoke(app, ["dump-header", str(path)]).exit_code == 1


def test_factor_then_rank(tmp_path):
    a, b = generate(tmp_path)
    out = tmp_path / "factors"
    result = runner.invoke(app, ["factor", str(a), "-o", str(out), "--rhs", str(b), "--nb", "8", "--q", "1"])
    assert result.exit_code == 0, result.output
    t, v = dense(out / "T.ooct"), dense(out / "V.ooct")
    assert np.allclose(v.T @ v, np.eye(24), atol=1e-12)
    assert np.isclose(np.linalg.norm(t), np.linalg.norm(dense(a)))
    assert (out / "Bt.ooct").exists()
    assert not (out / "U.ooct").exists()
    result = runner.invoke(app, ["rank", str(out / "T.ooct")])
    assert result.exit_code == 0
    assert "rank=12" in result.stdout


def test_solve_writes_x(tmp_path):
    a, b = generate(tmp_path)
    x_path = tmp_path / "X.mtx"
    args = ["solve", "--a", str(a), "--b", str(b), "--nb", "8", "--q", "1", "--x-out", str(x_path)]
    result = runner.invoke(app, [*args, "--tmpdir", str(tmp_path)])
    assert result.exit_code == 0, result.output
    assert "rank=12" in result.stdout
    x_ref, _ = svd_lstsq_dense(dense(a), dense(b))
    assert np.allclose(to_dense(read_matrix_market(x_path)), x_ref, atol=1e-9)


def test_solve_variant_with_csv_report(tmp_path):
    a, b = generate(tmp_path)
    x_path = tmp_path / "X.ooct"
    args = ["solve", "--a", str(a), "--b", str(b), "--nb", "8", "--variant", "v24s", "--format", "csv"]
    result = runner.invoke(app, [*args, "--x-out", str(x_path)])
    assert result.exit_code == 0, result.output
    assert "kind,count,seconds,mean_seconds" in result.stdout
    assert "Svd,3," in result.stdout
    assert dense(x_path).shape == (24, 1)


def test_bench_csv(tmp_path):
    args = ["bench", "--n", "16", "--rank", "12", "--nb", "4", "--cache-tiles", "16", "--policies", "none,lfu"]
    result = runner.invoke(app, [*args, "--format", "csv", "--tmpdir", str(tmp_path)])
    assert result.exit_code == 0, result.output
    lines = result.stdout.splitlines()
    header = next(i for i, line in enumerate(lines) if line.startswith("policy,reads,writes"))
    rows = {line.split(",")[0]: line.split(",") for line in lines[header + 1 : header + 3]}
    assert int(rows["lfu"][1]) <= int(rows["none"][1])


def test_bench_rejects_unknown_policy(tmp_path):
    result = runner.invoke(app, ["bench", "--n", "8", "--nb", "4", "--policies", "mru"])
    assert result.exit_code == 2


def test_verify_small_system(tmp_path):
    args = ["verify", "--m", "30", "--n", "20", "--rank", "12", "--nb", "8", "--tmpdir", str(tmp_path)]
    result = runner.invoke(app, args)
    assert result.exit_code == 0, result.output
    assert "All checks passed" in result.stdout
