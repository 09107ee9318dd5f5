"""estimate the numerical rank from the diagonal of a stored T"""

from pathlib import Path
from typing import Annotated

import typer
from rich import print

from oocutv.solver import estimate_rank
from oocutv.store import TileStore

from .common import Tau, cli_errors


def main(
    t_path: Annotated[Path, typer.Argument(help="T store written by factor")],
    tau: Tau = 1e-10,
):
    with cli_errors(), TileStore.open(t_path, "r", "A") as t:
        print(f"rank={estimate_rank(t, tau)}")
