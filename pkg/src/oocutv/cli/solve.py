"""solve min ||A X - B||_F out of core and print rank, residual and solution norm"""

from pathlib import Path
from typing import Annotated

import typer
from rich import print

from oocutv.cache import CachePolicy
from oocutv.config import CacheConfig, SolveOptions, Variant
from oocutv.mmio import write_matrix_market
from oocutv.scheduler import DEFAULT_LOOKAHEAD
from oocutv.solver import lstsq
from oocutv.utils import setup_logging
from oocutv.workspace import Workspace

from .common import (
    NB,
    CacheMb,
    Format,
    Lookahead,
    Overlap,
    Policy,
    Q,
    Seed,
    Tau,
    TmpDir,
    Verbose,
    cli_errors,
    emit_report,
    load_matrix,
)


def main(
    a: Annotated[Path, typer.Option("--a", help="Store (.ooct) or Matrix Market (.mtx) file of A")],
    b: Annotated[Path, typer.Option("--b", help="Store (.ooct) or Matrix Market (.mtx) file of B")],
    x_out: Annotated[Path | None, typer.Option("--x-out", help="Write X as .ooct store or .mtx file")] = None,
    q: Q = 0,
    nb: NB = 64,
    tau: Tau = 1e-10,
    cache_mb: CacheMb = 64.0,
    policy: Policy = CachePolicy.LFU,
    overlap: Overlap = False,
    lookahead: Lookahead = DEFAULT_LOOKAHEAD,
    no_nullify: Annotated[bool, typer.Option("--no-nullify", help="Skip T12 nullification")] = False,
    build_u: Annotated[bool, typer.Option("--build-u", help="Build U, then transform B")] = False,
    variant: Annotated[Variant | None, typer.Option("--variant", help="Preset overriding policy and flags")] = None,
    in_place: Annotated[bool, typer.Option("--in-place", help="Overwrite A with T; no residual")] = False,
    seed: Seed = 0,
    fmt: Format = None,
    tmpdir: TmpDir = None,
    verbose: Verbose = False,
):
    setup_logging(verbose)
    with cli_errors(), Workspace(tmpdir) as workspace:
        opts = SolveOptions(
            q=q,
            nb=nb,
            tau=tau,
            nullify=not no_nullify,
            build_u=build_u,
            cache=CacheConfig(capacity_mb=cache_mb, policy=policy),
            overlap=overlap,
            lookahead=lookahead,
            seed=seed,
            in_place=in_place,
            verbose=verbose,
        )
        if variant is not None:
            opts = variant.apply(opts)
        a_store = load_matrix(a, nb, workspace, "input_A", writable=in_place)
        b_store = load_matrix(b, nb, workspace, "input_B")
        result = lstsq(a_store, b_store, opts, workspace=workspace)
        if x_out is not None:
            if x_out.suffix == ".mtx":
                write_matrix_market(result.x, x_out)
            else:
                workspace.export("X", x_out)
        print(result.line())
        emit_report(result.report, fmt, "Solve tasks")
