"""Scratch stores for factors, samples and reflector blocks."""

import logging
import os
import shutil
import tempfile
from pathlib import Path

from .store import BaseTileStore, MemoryTileStore, TileStore, copy_store, fill_identity

logger = logging.getLogger(__name__)

TMPDIR_ENV = "OOC_TMPDIR"


class Workspace:
    """
    Owner of the scratch stores of one run.

    File stores live in a private directory under `root`; with memory=True every
    store is a MemoryTileStore instead.

    Example:
        with Workspace.from_env() as ws:
            v = ws.identity("V", n, nb)
    """

    def __init__(self, root: str | Path | None = None, memory: bool = False, keep: bool = False):
        self.memory = memory
        self.keep = keep
        self.stores: dict[str, BaseTileStore] = {}
        self.directory: Path | None = None
        if not memory:
            self.directory = Path(tempfile.mkdtemp(prefix="oocutv-", dir=root))
            logger.debug(f"workspace at {self.directory}")

    @classmethod
    def from_env(cls, memory: bool = False, keep: bool = False) -> "Workspace":
        return cls(os.environ.get(TMPDIR_ENV) or None, memory=memory, keep=keep)

    def create(self, name: str, m: int, n: int, nb: int) -> BaseTileStore:
        """New zero store registered under name, replacing any previous one."""
        self.discard(name)
        if self.directory is None:
            store: BaseTileStore = MemoryTileStore(m, n, nb, name)
        else:
            store = TileStore.create(m, n, nb, self.directory / f"{name}.ooct", name)
        self.stores[name] = store
        return store

    def identity(self, name: str, n: int, nb: int) -> BaseTileStore:
        return fill_identity(self.create(name, n, n, nb))

    def copy(self, name: str, src: BaseTileStore, nb: int | None = None, rows: int | None = None) -> BaseTileStore:
        """Copy src into a new store, optionally re-tiled or padded with zero rows."""
        dst = self.create(name, rows or src.m, src.n, nb or src.nb)
        return copy_store(src, dst)

    def adopt(self, name: str, store: BaseTileStore) -> BaseTileStore:
        """Track a store created elsewhere so close() removes it."""
        old = self.stores.get(name)
        if old is not None and old is not store:
            if old.path is not None and old.path == store.path:
                old.close()
            else:
                self.discard(name)
        self.stores[name] = store
        return store

    def path(self, name: str) -> Path | None:
        return None if self.directory is None else self.directory / f"{name}.ooct"

    def export(self, name: str, dest: str | Path) -> Path:
        """
        Move a store out of the workspace so it survives close().

        Memory stores are written to dest as a new file store.
        """
        dest = Path(dest)
        store = self.stores.pop(name)
        if store.path is None:
            copy_store(store, TileStore.create(store.m, store.n, store.nb, dest, name)).close()
        else:
            store.close()
            shutil.move(store.path, dest)
        logger.debug(f"exported {name} to {dest}")
        return dest

    def discard(self, name: str) -> None:
        store = self.stores.pop(name, None)
        if store is None:
            return
        store.close()
        if store.path is not None and not self.keep:
            store.path.unlink(missing_ok=True)

    def close(self) -> None:
        for name in list(self.stores):
            self.discard(name)
        if self.directory is not None and not self.keep:
            shutil.rmtree(self.directory, ignore_errors=True)

    def __contains__(self, name: str) -> bool:
        return name in self.stores

    def __getitem__(self, name: str) -> BaseTileStore:
        return self.stores[name]

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        self.close()

    def __repr__(self) -> str:
        where = "memory" if self.directory is None else str(self.directory)
        return f"Workspace({where}, stores={sorted(self.stores)})"
