"""Tiled matrix storage: one file per matrix, tiles at fixed offsets."""

import os
import struct
from abc import ABC, abstractmethod
from collections.abc import Iterator
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, Field

from .errors import (
    ExtentMismatchError,
    ReadOnlyStoreError,
    StoreFormatError,
    TileCoordinateError,
)
from .utils import ceil_div, extent

MAGIC = b"OOCT"
VERSION = 1
FLOAT64_CODE = 1
HEADER_SIZE = 64
HEADER = struct.Struct("<4sIQQQI")
MAX_FILE_BYTES = 2**63 - 1
ITEM_BYTES = 8

StoreMode = Literal["r", "r+"]


class StoreHeader(BaseModel):
    """Fields of the fixed 64-byte header."""

    magic: str = Field(..., description="File magic, always OOCT")
    version: int = Field(..., description="Format version")
    m: int = Field(..., ge=1, description="Number of rows")
    n: int = Field(..., ge=1, description="Number of columns")
    nb: int = Field(..., ge=1, description="Tile size")
    dtype_code: int = Field(..., description="Element type code, 1 = little-endian float64")

    model_config = {"frozen": True}

    def pack(self) -> bytes:
        raw = HEADER.pack(self.magic.encode("ascii"), self.version, self.m, self.n, self.nb, self.dtype_code)
        return raw.ljust(HEADER_SIZE, b"\0")

    @classmethod
    def unpack(cls, raw: bytes) -> "StoreHeader":
        if len(raw) < HEADER_SIZE:
            raise StoreFormatError(f"header too short ({len(raw)} bytes)")
        magic, version, m, n, nb, code = HEADER.unpack(raw[: HEADER.size])
        if magic != MAGIC:
            raise StoreFormatError(f"bad magic {magic!r}")
        if version != VERSION:
            raise StoreFormatError(f"unsupported version {version}")
        if code != FLOAT64_CODE:
            raise StoreFormatError(f"unsupported element type code {code}")
        return cls(magic=magic.decode("ascii"), version=version, m=m, n=n, nb=nb, dtype_code=code)


@dataclass
class Tile:
    """One dense column-major block and its (block-row, block-col) origin."""

    data: np.ndarray
    origin: tuple[int, int]

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @classmethod
    def zeros(cls, rows: int, cols: int, origin: tuple[int, int]) -> "Tile":
        return cls(np.zeros((rows, cols), order="F"), origin)


def _check_dims(m: int, n: int, nb: int) -> None:
    if m < 1 or n < 1:
        raise StoreFormatError(f"dimensions must be positive, got {m}x{n}")
    if nb < 1 or nb > max(m, n):
        raise StoreFormatError(f"tile size {nb} outside [1, {max(m, n)}]")
    total = HEADER_SIZE + ceil_div(m, nb) * ceil_div(n, nb) * nb * nb * ITEM_BYTES
    if total > MAX_FILE_BYTES:
        raise StoreFormatError(f"dimension overflow: {m}x{n} with nb={nb} needs {total} bytes")


class BaseTileStore(ABC):
    """Tiled m x n float64 matrix addressed by (block-row, block-col)."""

    def __init__(self, m: int, n: int, nb: int, name: str, mode: StoreMode = "r+"):
        _check_dims(m, n, nb)
        self.m = m
        self.n = n
        self.nb = nb
        self.name = name
        self.mode = mode

    @property
    def block_rows(self) -> int:
        return ceil_div(self.m, self.nb)

    @property
    def block_cols(self) -> int:
        return ceil_div(self.n, self.nb)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.m, self.n)

    @property
    def writable(self) -> bool:
        return self.mode == "r+"

    @property
    def path(self) -> Path | None:
        return None

    def tile_shape(self, i: int, j: int) -> tuple[int, int]:
        self.check(i, j)
        return extent(self.m, self.nb, i), extent(self.n, self.nb, j)

    def tile_bytes(self, i: int, j: int) -> int:
        r, c = self.tile_shape(i, j)
        return r * c * ITEM_BYTES

    def check(self, i: int, j: int) -> None:
        if not (0 <= i < self.block_rows and 0 <= j < self.block_cols):
            raise TileCoordinateError(
                f"tile ({i},{j}) outside {self.block_rows}x{self.block_cols} grid of store {self.name}"
            )

    def coordinates(self) -> Iterator[tuple[int, int]]:
        for i in range(self.block_rows):
            for j in range(self.block_cols):
                yield i, j

    @abstractmethod
    def _load(self, i: int, j: int, rows: int, cols: int) -> np.ndarray:
        """Return a fresh column-major rows x cols array for slot (i, j)."""

    @abstractmethod
    def _save(self, i: int, j: int, data: np.ndarray) -> None:
        """Persist data into slot (i, j)."""

    def read_tile(self, i: int, j: int) -> Tile:
        r, c = self.tile_shape(i, j)
        return Tile(self._load(i, j, r, c), (i, j))

    def write_tile(self, tile: Tile) -> None:
        if not self.writable:
            raise ReadOnlyStoreError(f"store {self.name} is read-only")
        i, j = tile.origin
        r, c = self.tile_shape(i, j)
        if tile.data.shape != (r, c):
            raise ExtentMismatchError(f"tile {tile.origin} is {tile.data.shape}, slot expects {(r, c)}")
        self._save(i, j, tile.data)

    def read_block(self, r0: int, r1: int, c0: int, c1: int) -> np.ndarray:
        """Gather rows r0:r1 and columns c0:c1 into one dense array."""
        if not (0 <= r0 <= r1 <= self.m and 0 <= c0 <= c1 <= self.n):
            raise TileCoordinateError(f"block [{r0}:{r1}, {c0}:{c1}] outside {self.m}x{self.n}")
        out = np.zeros((r1 - r0, c1 - c0), order="F")
        nb = self.nb
        for i in range(r0 // nb, ceil_div(r1, nb)):
            for j in range(c0 // nb, ceil_div(c1, nb)):
                tile = self.read_tile(i, j).data
                ti, tj = i * nb, j * nb
                tr0, tr1 = max(r0, ti), min(r1, ti + tile.shape[0])
                tc0, tc1 = max(c0, tj), min(c1, tj + tile.shape[1])
                out[tr0 - r0 : tr1 - r0, tc0 - c0 : tc1 - c0] = tile[tr0 - ti : tr1 - ti, tc0 - tj : tc1 - tj]
        return out

    def write_block(self, r0: int, c0: int, data: np.ndarray) -> None:
        """Scatter a dense array with its top-left corner at (r0, c0)."""
        r1, c1 = r0 + data.shape[0], c0 + data.shape[1]
        if not (0 <= r0 <= r1 <= self.m and 0 <= c0 <= c1 <= self.n):
            raise TileCoordinateError(f"block [{r0}:{r1}, {c0}:{c1}] outside {self.m}x{self.n}")
        nb = self.nb
        for i in range(r0 // nb, ceil_div(r1, nb)):
            for j in range(c0 // nb, ceil_div(c1, nb)):
                rows, cols = self.tile_shape(i, j)
                tr0, tr1 = max(r0, i * nb), min(r1, i * nb + rows)
                tc0, tc1 = max(c0, j * nb), min(c1, j * nb + cols)
                covers = tr1 - tr0 == rows and tc1 - tc0 == cols
                tile = Tile.zeros(rows, cols, (i, j)) if covers else self.read_tile(i, j)
                tile.data[tr0 - i * nb : tr1 - i * nb, tc0 - j * nb : tc1 - j * nb] = data[
                    tr0 - r0 : tr1 - r0, tc0 - c0 : tc1 - c0
                ]
                self.write_tile(tile)

    def close(self) -> None:  # noqa: B027
        pass

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        self.close()

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(name={self.name!r}, m={self.m}, n={self.n}, nb={self.nb})"


class TileStore(BaseTileStore):
    """File-backed store. Tiles are padded to nb x nb slots in block-row-major order."""

    def __init__(self, path: Path, header: StoreHeader, fd: int, mode: StoreMode, name: str | None = None):
        super().__init__(header.m, header.n, header.nb, name or path.stem, mode)
        self._path = path
        self._fd = fd
        self.header = header

    @property
    def path(self) -> Path:
        return self._path

    @property
    def slot_bytes(self) -> int:
        return self.nb * self.nb * ITEM_BYTES

    @property
    def file_bytes(self) -> int:
        return HEADER_SIZE + self.block_rows * self.block_cols * self.slot_bytes

    @classmethod
    def create(cls, m: int, n: int, nb: int, path: str | Path, name: str | None = None) -> "TileStore":
        """Create a zero-filled store, replacing any existing file."""
        _check_dims(m, n, nb)
        path = Path(path)
        header = StoreHeader(magic=MAGIC.decode("ascii"), version=VERSION, m=m, n=n, nb=nb, dtype_code=FLOAT64_CODE)
        fd = os.open(path, os.O_RDWR | os.O_CREAT | os.O_TRUNC, 0o644)
        try:
            os.pwrite(fd, header.pack(), 0)
            store = cls(path, header, fd, "r+", name)
            os.ftruncate(fd, store.file_bytes)
        except BaseException:
            os.close(fd)
            raise
        return store

    @classmethod
    def open(cls, path: str | Path, mode: StoreMode = "r", name: str | None = None) -> "TileStore":
        path = Path(path)
        fd = os.open(path, os.O_RDWR if mode == "r+" else os.O_RDONLY)
        try:
            header = StoreHeader.unpack(os.pread(fd, HEADER_SIZE, 0))
            _check_dims(header.m, header.n, header.nb)
            store = cls(path, header, fd, mode, name)
            size = os.fstat(fd).st_size
            if size != store.file_bytes:
                raise StoreFormatError(f"{path}: file has {size} bytes, header implies {store.file_bytes}")
        except BaseException:
            os.close(fd)
            raise
        return store

    def offset(self, i: int, j: int) -> int:
        self.check(i, j)
        return HEADER_SIZE + (i * self.block_cols + j) * self.slot_bytes

    def _load(self, i: int, j: int, rows: int, cols: int) -> np.ndarray:
        raw = os.pread(self._fd, self.slot_bytes, self.offset(i, j))
        if len(raw) != self.slot_bytes:
            raise StoreFormatError(f"short read of tile ({i},{j}) from {self._path}")
        slot = np.frombuffer(raw, dtype="<f8").reshape((self.nb, self.nb), order="F")
        return np.array(slot[:rows, :cols], dtype=np.float64, order="F")

    def _save(self, i: int, j: int, data: np.ndarray) -> None:
        slot = np.zeros((self.nb, self.nb), dtype="<f8", order="F")
        slot[: data.shape[0], : data.shape[1]] = data
        os.pwrite(self._fd, slot.tobytes(order="F"), self.offset(i, j))

    def close(self) -> None:
        if self._fd >= 0:
            os.close(self._fd)
            self._fd = -1


class MemoryTileStore(BaseTileStore):
    """In-memory store with the TileStore interface."""

    def __init__(self, m: int, n: int, nb: int, name: str = "mem", mode: StoreMode = "r+"):
        super().__init__(m, n, nb, name, mode)
        self._tiles: dict[tuple[int, int], np.ndarray] = {}

    def _load(self, i: int, j: int, rows: int, cols: int) -> np.ndarray:
        data = self._tiles.get((i, j))
        if data is None:
            return np.zeros((rows, cols), order="F")
        return np.array(data, order="F")

    def _save(self, i: int, j: int, data: np.ndarray) -> None:
        self._tiles[(i, j)] = np.array(data, dtype=np.float64, order="F")


def create(m: int, n: int, nb: int, path: str | Path, name: str | None = None) -> TileStore:
    return TileStore.create(m, n, nb, path, name)


def open_store(path: str | Path, mode: StoreMode = "r", name: str | None = None) -> TileStore:
    return TileStore.open(path, mode, name)


def fill_from_dense(store: BaseTileStore, matrix: np.ndarray) -> BaseTileStore:
    if matrix.shape != store.shape:
        raise ExtentMismatchError(f"matrix {matrix.shape} does not match store {store.shape}")
    nb = store.nb
    for i, j in store.coordinates():
        r, c = store.tile_shape(i, j)
        block = np.array(matrix[i * nb : i * nb + r, j * nb : j * nb + c], dtype=np.float64, order="F")
        store.write_tile(Tile(block, (i, j)))
    return store


def from_dense(matrix: np.ndarray, nb: int, path: str | Path | None = None, name: str | None = None) -> BaseTileStore:
    """
    Tile a dense matrix into a new store.

    Args:
        matrix: 2-D array (a 1-D array is taken as a column)
        nb: Tile size
        path: Target file; an in-memory store is returned when omitted
        name: Store name used as the cache key

    Returns:
        The filled store
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim == 1:
        matrix = matrix[:, None]
    m, n = matrix.shape
    if path is None:
        store: BaseTileStore = MemoryTileStore(m, n, nb, name or "mem")
    else:
        store = TileStore.create(m, n, nb, path, name)
    return fill_from_dense(store, matrix)


def to_dense(store: BaseTileStore) -> np.ndarray:
    return store.read_block(0, store.m, 0, store.n)


def fill_identity(store: BaseTileStore) -> BaseTileStore:
    for k in range(min(store.block_rows, store.block_cols)):
        r, c = store.tile_shape(k, k)
        store.write_tile(Tile(np.eye(r, c, order="F"), (k, k)))
    return store


def identity(n: int, nb: int, path: str | Path | None = None, name: str | None = None) -> BaseTileStore:
    if path is None:
        store: BaseTileStore = MemoryTileStore(n, n, nb, name or "eye")
    else:
        store = TileStore.create(n, n, nb, path, name)
    return fill_identity(store)


def copy_store(src: BaseTileStore, dst: BaseTileStore) -> BaseTileStore:
    """
    Stream src into dst, which may use another tile size or have extra zero rows.

    Raises:
        ExtentMismatchError: If dst is narrower or shorter than src
    """
    if dst.m < src.m or dst.n != src.n:
        raise ExtentMismatchError(f"cannot copy {src.shape} into {dst.shape}")
    nb = dst.nb
    for i, j in dst.coordinates():
        r, c = dst.tile_shape(i, j)
        tile = Tile.zeros(r, c, (i, j))
        r0 = i * nb
        if r0 < src.m:
            r1 = min(r0 + r, src.m)
            tile.data[: r1 - r0, :] = src.read_block(r0, r1, j * nb, j * nb + c)
        dst.write_tile(tile)
    return dst
