"""compare the out-of-core solver against the dense references on one desk-scale system"""

import logging
from pathlib import Path
from typing import Annotated

import numpy as np
import typer
from rich import print
from rich.table import Table

from oocutv import oracle
from oocutv.cache import CachePolicy
from oocutv.config import CacheConfig, FactorOptions, SolveOptions
from oocutv.errors import RankError
from oocutv.matgen import Scenario, gen_rank_deficient, make_rhs
from oocutv.randutv import factor
from oocutv.solver import lstsq
from oocutv.store import from_dense, to_dense
from oocutv.utils import fmt_float, setup_logging
from oocutv.workspace import Workspace

from .common import NB, CacheMb, Policy, Q, Seed, Tau, TmpDir, Verbose, cli_errors, load_matrix
from .generate import default_rank

logger = logging.getLogger(__name__)

DESK_SCALE = 1500
RELATIVE = 1e-6


def _within(value: float, reference: float, scale: float) -> bool:
    return value <= reference * (1 + RELATIVE) + 1e-9 * scale


def _dense_row(method: str, rank: int, a: np.ndarray, x: np.ndarray, b: np.ndarray) -> tuple:
    return method, rank, oracle.residual_dense(a, x, b), float(np.linalg.norm(x))


def main(
    a: Annotated[Path | None, typer.Option("--a", help="Matrix (default: generated)")] = None,
    b: Annotated[Path | None, typer.Option("--b", help="Right-hand sides (default: scenario 3)")] = None,
    m: Annotated[int, typer.Option("--m", min=1, help="Rows of the generated matrix")] = 300,
    n: Annotated[int, typer.Option("--n", min=1, help="Columns of the generated matrix")] = 200,
    rank: Annotated[int | None, typer.Option("--rank", help="Rank of the generated matrix")] = None,
    scenario: Annotated[int, typer.Option("--scenario", min=2, max=4, help="Right-hand side scenario")] = 3,
    q: Q = 0,
    nb: NB = 32,
    tau: Tau = 1e-10,
    cache_mb: CacheMb = 16.0,
    policy: Policy = CachePolicy.LFU,
    seed: Seed = 0,
    tmpdir: TmpDir = None,
    verbose: Verbose = False,
):
    setup_logging(verbose)
    checks: list[tuple[str, bool, str]] = []
    with cli_errors(), Workspace(tmpdir) as workspace:
        if a is None:
            a_store = gen_rank_deficient(m, n, rank or default_rank(m, n), seed, nb)
        else:
            a_store = load_matrix(a, nb, workspace, "verify_A")
        if b is None:
            b_store, _ = make_rhs(Scenario(scenario), a_store, seed)
        else:
            b_store = load_matrix(b, nb, workspace, "verify_B")
        if max(a_store.shape) > DESK_SCALE:
            logger.warning(f"{a_store.m}x{a_store.n} exceeds desk scale; the dense references may be slow")
        dense_a, dense_b = to_dense(a_store), to_dense(b_store)
        scale = float(np.linalg.norm(dense_b))

        cache = CacheConfig(capacity_mb=cache_mb, policy=policy)
        opts = SolveOptions(q=q, nb=nb, tau=tau, seed=seed, cache=cache)
        cod = lstsq(a_store, b_store, opts, workspace=workspace)
        truncated = lstsq(a_store, b_store, opts.model_copy(update={"nullify": False}), workspace=workspace)

        x_svd, rank_svd = oracle.svd_lstsq_dense(dense_a, dense_b, tau)
        x_gelsy, rank_gelsy = oracle.gelsy_lstsq_dense(dense_a, dense_b, tau)
        rows = [
            ("ooc cod", cod.rank, cod.residual_fro, cod.xnorm_fro),
            ("ooc truncated", truncated.rank, truncated.residual_fro, truncated.xnorm_fro),
            _dense_row("svd", rank_svd, dense_a, x_svd, dense_b),
            _dense_row("gelsy", rank_gelsy, dense_a, x_gelsy, dense_b),
        ]
        try:
            x_qr = oracle.qr_lstsq_dense(dense_a, dense_b, tau)
            rows.append(_dense_row("qr", dense_a.shape[1], dense_a, x_qr, dense_b))
        except RankError:
            logger.info("unpivoted QR skipped: matrix is rank deficient")
        except ValueError as e:
            logger.info(f"unpivoted QR skipped: {e}")

        svd_residual, svd_norm = rows[2][2], rows[2][3]
        checks.append(("rank matches svd", cod.rank == rank_svd, f"{cod.rank} vs {rank_svd}"))
        checks.append(
            ("residual parity", _within(cod.residual_fro, svd_residual, scale), fmt_float(cod.residual_fro))
        )
        checks.append(("minimal norm", _within(cod.xnorm_fro, svd_norm, svd_norm), fmt_float(cod.xnorm_fro)))
        checks.append(
            (
                "truncated residual",
                _within(truncated.residual_fro, cod.residual_fro, scale),
                fmt_float(truncated.residual_fro),
            )
        )
        norm_ok = truncated.xnorm_fro >= cod.xnorm_fro - 1e-9
        checks.append(("truncated norm >= cod norm", norm_ok, fmt_float(truncated.xnorm_fro)))

        if a_store.m >= a_store.n:
            fnb = min(nb, a_store.n)
            _, t_ref, v_ref, _ = oracle.randutv_dense_reference(dense_a, q, fnb, seed, build_u=True)
            work = from_dense(dense_a, fnb, workspace.path("verify_T"), "A")
            workspace.adopt("verify_T", work)
            fopts = FactorOptions(q=q, nb=fnb, build_u=True, seed=seed)
            fac = factor(work, fopts, cache.build(fnb), workspace=workspace)
            t, v = to_dense(fac.t), to_dense(fac.v)
            u = to_dense(fac.u) if fac.u is not None else np.eye(a_store.m)
            fac.close()
            identical = np.array_equal(t, t_ref) and np.array_equal(v, v_ref)
            checks.append(("factor matches in-core reference", identical, "bit-identical" if identical else "differs"))
            err = float(np.linalg.norm(dense_a @ v - u @ t))
            bound = 1e-10 * float(np.linalg.norm(dense_a))
            checks.append(("A V = U T", err <= bound, fmt_float(err)))

    table = Table(title="Least-squares comparison")
    for column in ("Method", "Rank", "Residual", "||X||_F"):
        table.add_column(column, justify="left" if column == "Method" else "right")
    for method, r, residual, norm in rows:
        table.add_row(method, str(r), fmt_float(residual), fmt_float(norm))
    print(table)
    failed = 0
    for name, ok, detail in checks:
        print(f"{'✓' if ok else '✗'} {name}: {detail}")
        failed += not ok
    if failed:
        print(f"[red]{failed} check(s) failed[/red]")
        raise typer.Exit(1)
    print("✓ All checks passed")
