"""Options and helpers shared by the subcommands."""

from collections.abc import Iterator
from contextlib import contextmanager
from enum import Enum
from pathlib import Path
from typing import Annotated

import typer
from pydantic import ValidationError
from rich import print
from rich.markup import escape

from oocutv.cache import CachePolicy
from oocutv.errors import OocError
from oocutv.mmio import read_matrix_market
from oocutv.scheduler import ExecutionReport
from oocutv.store import BaseTileStore, TileStore
from oocutv.utils import console
from oocutv.workspace import TMPDIR_ENV, Workspace


class OutputFormat(str, Enum):
    TABLE = "table"
    CSV = "csv"


Q = Annotated[int, typer.Option("--q", min=0, help="Power-iteration count")]
NB = Annotated[int, typer.Option("--nb", min=1, help="Tile size")]
Tau = Annotated[float, typer.Option("--tau", min=0.0, max=1.0, help="Relative rank threshold on |diag(T)|")]
Seed = Annotated[int, typer.Option("--seed", min=0, help="Random seed")]
CacheMb = Annotated[float, typer.Option("--cache-mb", min=0.0, help="Block cache capacity in MiB")]
Policy = Annotated[CachePolicy, typer.Option("--policy", help="Cache eviction policy")]
Overlap = Annotated[bool, typer.Option("--overlap/--no-overlap", help="Overlap disk I/O with computation")]
Lookahead = Annotated[int, typer.Option("--lookahead", min=1, help="Tasks prefetched ahead of the compute thread")]
Format = Annotated[OutputFormat | None, typer.Option("--format", help="Also print the execution report")]
TmpDir = Annotated[Path | None, typer.Option("--tmpdir", envvar=TMPDIR_ENV, help="Directory for scratch stores")]
Verbose = Annotated[bool, typer.Option("--verbose", "-v", help="Debug logging, one line per task")]


@contextmanager
def cli_errors() -> Iterator[None]:
    """Turn library and validation errors into a red diagnostic and exit code 1."""
    try:
        yield
    except (OocError, ValidationError, FileNotFoundError) as e:
        console.print(f"[red]error:[/red] {escape(str(e))}")
        raise typer.Exit(1) from e


def load_matrix(path: Path, nb: int, workspace: Workspace, name: str, writable: bool = False) -> BaseTileStore:
    """Open a tile store, or densify a Matrix Market file (.mtx) into the workspace."""
    if path.suffix == ".mtx":
        store = read_matrix_market(path, nb, workspace.path(name), name)
        return workspace.adopt(name, store)
    return TileStore.open(path, "r+" if writable else "r", name)


def emit_report(report: ExecutionReport, fmt: OutputFormat | None, title: str) -> None:
    if fmt is OutputFormat.TABLE:
        print(report.table(title))
    elif fmt is OutputFormat.CSV:
        typer.echo(report.to_csv(), nl=False)
