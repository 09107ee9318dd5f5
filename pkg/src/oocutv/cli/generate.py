"""generate a rank-deficient test matrix (or densify a Matrix Market file) and its right-hand sides"""

from pathlib import Path
from typing import Annotated

import typer
from rich import print

from oocutv.matgen import Scenario, gen_rank_deficient, make_rhs
from oocutv.mmio import read_matrix_market, write_matrix_market
from oocutv.store import from_dense
from oocutv.utils import setup_logging
from oocutv.workspace import Workspace

from .common import NB, Seed, Verbose, cli_errors, load_matrix

# desk-scale default: rank 1000 at dimension 1024
RANK_RATIO = 1000 / 1024


def default_rank(m: int, n: int) -> int:
    return max(1, round(min(m, n) * RANK_RATIO))


def main(
    out: Annotated[Path, typer.Argument(help="Store file for A")],
    m: Annotated[int, typer.Option("--m", min=1, help="Rows")] = 1024,
    n: Annotated[int, typer.Option("--n", min=1, help="Columns")] = 1024,
    rank: Annotated[int | None, typer.Option("--rank", help="Rank of A (default: 1000/1024 of min(m, n))")] = None,
    nb: NB = 64,
    seed: Seed = 0,
    from_mtx: Annotated[Path | None, typer.Option("--from-mtx", help="Densify this Matrix Market file")] = None,
    rhs: Annotated[Path | None, typer.Option("--rhs", help="Store file for the right-hand sides")] = None,
    scenario: Annotated[int, typer.Option("--scenario", min=1, max=4, help="1 given, 2 ones, 3 A x, 4 perturbed")] = 3,
    k: Annotated[int, typer.Option("--k", min=1, help="Number of right-hand sides")] = 1,
    provided: Annotated[Path | None, typer.Option("--provided", help="Right-hand side for scenario 1")] = None,
    perturb_frac: Annotated[float, typer.Option("--perturb-frac", help="Fraction of B perturbed")] = 0.10,
    perturb_scale: Annotated[float, typer.Option("--perturb-scale", help="Factor applied to them")] = 0.999,
    x_out: Annotated[Path | None, typer.Option("--x-out", help="Matrix Market file for the true solution")] = None,
    verbose: Verbose = False,
):
    setup_logging(verbose)
    with cli_errors(), Workspace(memory=True) as workspace:
        if from_mtx is not None:
            a = read_matrix_market(from_mtx, nb, out, "A")
            print(f"✓ Densified {from_mtx} into {a.m}x{a.n} store {out}")
        else:
            rank = default_rank(m, n) if rank is None else rank
            a = gen_rank_deficient(m, n, rank, seed, nb, out)
            print(f"✓ Generated {m}x{n} matrix of rank {rank} in {out}")

        if rhs is not None:
            given = None if provided is None else load_matrix(provided, a.nb, workspace, "provided")
            b, x_true = make_rhs(Scenario(scenario), a, seed, given, k, rhs, perturb_frac, perturb_scale)
            print(f"✓ Wrote {b.m}x{b.n} right-hand sides (scenario {scenario}) to {rhs}")
            if x_true is not None and x_out is not None:
                write_matrix_market(from_dense(x_true, min(nb, max(x_true.shape))), x_out)
                print(f"✓ Wrote true solution to {x_out}")
            b.close()
        a.close()
