"""sweep cache policies on one system and tabulate disk operations and the time split"""

from pathlib import Path
from typing import Annotated

import typer
from rich import print
from rich.table import Table

from oocutv.cache import CachePolicy
from oocutv.config import CacheConfig, SolveOptions
from oocutv.matgen import Scenario, gen_rank_deficient, make_rhs
from oocutv.models import SolveResult
from oocutv.scheduler import DEFAULT_LOOKAHEAD
from oocutv.solver import lstsq
from oocutv.utils import fmt_float, setup_logging
from oocutv.workspace import Workspace

from .common import NB, Format, Lookahead, OutputFormat, Overlap, Q, Seed, TmpDir, Verbose, cli_errors, load_matrix
from .generate import default_rank


def parse_policies(text: str) -> list[CachePolicy]:
    try:
        chosen = [CachePolicy(p.strip()) for p in text.split(",") if p.strip()]
    except ValueError as e:
        raise typer.BadParameter(str(e), param_hint="--policies") from e
    if not chosen:
        raise typer.BadParameter("no policy given", param_hint="--policies")
    return chosen


def policy_table(results: dict[CachePolicy, SolveResult]) -> Table:
    table = Table(title="Disk operations and time per cache policy")
    table.add_column("")
    for policy in results:
        table.add_column(policy.value, justify="right")
    rows = {
        "# Disk reads": lambda r: str(r.report.stats.disk_reads),
        "# Disk writes": lambda r: str(r.report.stats.disk_writes),
        "# Hits": lambda r: str(r.report.stats.hits),
        "Hit ratio": lambda r: f"{r.report.stats.hit_ratio:.3f}",
        "Disk I/O s": lambda r: f"{r.report.io_seconds:.3f}",
        "Compute s": lambda r: f"{r.report.compute_seconds:.3f}",
        "Stall s": lambda r: f"{r.report.stall_seconds:.3f}",
        "Wall s": lambda r: f"{r.report.wall_seconds:.3f}",
        "Residual": lambda r: fmt_float(r.residual_fro if r.residual_fro is not None else float("nan")),
    }
    for label, cell in rows.items():
        table.add_row(label, *(cell(r) for r in results.values()))
    return table


def main(
    a: Annotated[Path | None, typer.Option("--a", help="Matrix to bench on (default: generated)")] = None,
    b: Annotated[Path | None, typer.Option("--b", help="Right-hand sides (default: scenario 3)")] = None,
    n: Annotated[int, typer.Option("--n", min=1, help="Order of the generated matrix")] = 576,
    rank: Annotated[int | None, typer.Option("--rank", help="Rank of the generated matrix")] = None,
    nb: NB = 64,
    cache_tiles: Annotated[int, typer.Option("--cache-tiles", min=1, help="Cache capacity in nb x nb tiles")] = 25,
    policies: Annotated[str, typer.Option("--policies", help="Comma-separated policies")] = "none,lru4,lru,lfu",
    q: Q = 0,
    seed: Seed = 0,
    overlap: Overlap = False,
    lookahead: Lookahead = DEFAULT_LOOKAHEAD,
    fmt: Format = OutputFormat.TABLE,
    tmpdir: TmpDir = None,
    verbose: Verbose = False,
):
    setup_logging(verbose)
    chosen = parse_policies(policies)
    with cli_errors(), Workspace(tmpdir) as workspace:
        if a is None:
            a_store = gen_rank_deficient(n, n, rank or default_rank(n, n), seed, nb, workspace.path("bench_A"))
            workspace.adopt("bench_A", a_store)
        else:
            a_store = load_matrix(a, nb, workspace, "bench_A")
        if b is None:
            b_store, _ = make_rhs(Scenario.CONSISTENT, a_store, seed, path=workspace.path("bench_B"))
            workspace.adopt("bench_B", b_store)
        else:
            b_store = load_matrix(b, nb, workspace, "bench_B")

        results: dict[CachePolicy, SolveResult] = {}
        for policy in chosen:
            opts = SolveOptions(
                q=q,
                nb=nb,
                seed=seed,
                overlap=overlap,
                lookahead=lookahead,
                cache=CacheConfig(policy=policy, capacity_tiles=cache_tiles),
                verbose=verbose,
            )
            results[policy] = lstsq(a_store, b_store, opts, workspace=workspace)

        if fmt is OutputFormat.CSV:
            typer.echo("policy,reads,writes,hits,misses,io_s,compute_s,stall_s,wall_s")
            for policy, r in results.items():
                s, rep = r.report.stats, r.report
                typer.echo(
                    f"{policy.value},{s.disk_reads},{s.disk_writes},{s.hits},{s.misses},"
                    f"{rep.io_seconds:.6f},{rep.compute_seconds:.6f},{rep.stall_seconds:.6f},{rep.wall_seconds:.6f}"
                )
        else:
            for policy, r in results.items():
                print(f"policy={policy.value} {r.report.stats.line()} {r.line()}")
            if fmt is OutputFormat.TABLE:
                print(policy_table(results))
                last = results[chosen[-1]]
                print(last.report.table(f"Tasks ({chosen[-1].value})"))
