"""factor a stored matrix A V = U T and keep T, V (and U or U^T B) as stores"""

from pathlib import Path
from typing import Annotated

import typer
from rich import print

from oocutv.cache import CachePolicy
from oocutv.config import CacheConfig, FactorOptions
from oocutv.randutv import factor
from oocutv.scheduler import DEFAULT_LOOKAHEAD, make_executor
from oocutv.store import TileStore, copy_store
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
    TmpDir,
    Verbose,
    cli_errors,
    emit_report,
    load_matrix,
)


def main(
    a_path: Annotated[Path, typer.Argument(help="Store (.ooct) or Matrix Market (.mtx) file of A")],
    out_dir: Annotated[Path, typer.Option("--out-dir", "-o", help="Directory for the factor stores")] = Path("."),
    rhs: Annotated[Path | None, typer.Option("--rhs", help="Right-hand sides transformed on the fly")] = None,
    build_u: Annotated[bool, typer.Option("--build-u", help="Accumulate U explicitly")] = False,
    q: Q = 0,
    nb: NB = 64,
    seed: Seed = 0,
    cache_mb: CacheMb = 64.0,
    policy: Policy = CachePolicy.LFU,
    overlap: Overlap = False,
    lookahead: Lookahead = DEFAULT_LOOKAHEAD,
    fmt: Format = None,
    tmpdir: TmpDir = None,
    verbose: Verbose = False,
):
    setup_logging(verbose)
    with cli_errors(), Workspace(tmpdir) as workspace:
        out_dir.mkdir(parents=True, exist_ok=True)
        a = load_matrix(a_path, nb, workspace, "input_A")
        nb = min(nb, a.n)
        t = copy_store(a, TileStore.create(a.m, a.n, nb, out_dir / "T.ooct", "A"))
        bt = None
        if rhs is not None:
            b = load_matrix(rhs, nb, workspace, "input_B")
            bt = copy_store(b, TileStore.create(b.m, b.n, nb, out_dir / "Bt.ooct", "B"))
        opts = FactorOptions(q=q, nb=nb, build_u=build_u, rhs=bt, seed=seed)
        cache = CacheConfig(capacity_mb=cache_mb, policy=policy).build(nb)
        fac = factor(t, opts, cache, make_executor(overlap, lookahead, verbose), workspace)
        fac.close()
        written = ["T"]
        workspace.export("V", out_dir / "V.ooct")
        written.append("V")
        if fac.u is not None:
            workspace.export("U", out_dir / "U.ooct")
            written.append("U")
        if bt is not None:
            bt.close()
            written.append("Bt")
        t.close()
        print(f"✓ Factored {a.m}x{a.n} with nb={nb}, q={q}; wrote {', '.join(written)} to {out_dir}")
        print(f"tasks={fac.report.tasks} {fac.report.stats.line()}")
        emit_report(fac.report, fmt, "randUTV tasks")
