"""print the header fields of a tile store"""

from pathlib import Path
from typing import Annotated

import typer
from rich import print

from oocutv.store import TileStore

from .common import cli_errors


def main(path: Annotated[Path, typer.Argument(help="Store file")]):
    with cli_errors(), TileStore.open(path) as store:
        for key, value in store.header.model_dump().items():
            print(f"{key}={value}")
        print(f"block_rows={store.block_rows}")
        print(f"block_cols={store.block_cols}")
        print(f"file_bytes={store.file_bytes}")
