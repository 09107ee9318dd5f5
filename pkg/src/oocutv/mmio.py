"""
Matrix Market reader and writer for tiled stores.

Sparse `coordinate` files are densified one tile row at a time; `array` files
are dense already. Only real (or integer) general, symmetric and skew-symmetric
matrices are accepted.
"""

import logging
from pathlib import Path

import numpy as np

from .errors import MatrixMarketError
from .store import BaseTileStore, MemoryTileStore, TileStore
from .utils import extent

logger = logging.getLogger(__name__)

BANNER = "%%MatrixMarket"
FORMATS = ("coordinate", "array")
FIELDS = ("real", "integer")
SYMMETRIES = ("general", "symmetric", "skew-symmetric")


def _header(line: str) -> tuple[str, str, str]:
    parts = line.lower().split()
    if len(parts) != 5 or parts[0] != BANNER.lower() or parts[1] != "matrix":
        raise MatrixMarketError(f"bad banner {line.strip()!r}", 1)
    fmt, field, symmetry = parts[2:]
    if fmt not in FORMATS:
        raise MatrixMarketError(f"unsupported format {fmt!r}", 1)
    if field == "pattern":
        raise MatrixMarketError("pattern matrices carry no values", 1)
    if field not in FIELDS:
        raise MatrixMarketError(f"unsupported field {field!r}", 1)
    if symmetry not in SYMMETRIES:
        raise MatrixMarketError(f"unsupported symmetry {symmetry!r}", 1)
    return fmt, field, symmetry


def _body(path: Path):
    """Yield (line number, tokens) for every non-comment, non-blank line after the banner."""
    with open(path) as f:
        for line_no, line in enumerate(f, start=1):
            text = line.strip()
            if not text or text.startswith("%"):
                continue
            yield line_no, text.split()


def _ints(tokens: list[str], count: int, line_no: int) -> list[int]:
    if len(tokens) != count:
        raise MatrixMarketError(f"expected {count} integers, got {len(tokens)} tokens", line_no)
    try:
        return [int(t) for t in tokens]
    except ValueError as e:
        raise MatrixMarketError(str(e), line_no) from e


def _new_store(m: int, n: int, nb: int, out: str | Path | None, name: str) -> BaseTileStore:
    nb = min(nb, max(m, n))
    if out is None:
        return MemoryTileStore(m, n, nb, name)
    return TileStore.create(m, n, nb, out, name)


def read_matrix_market(
    path: str | Path, nb: int = 64, out: str | Path | None = None, name: str = "A"
) -> BaseTileStore:
    """
    Densify a Matrix Market file into a tiled store.

    Symmetric entries are mirrored (negated for skew-symmetric) and duplicate
    coordinates are summed.

    Args:
        path: Matrix Market file
        nb: Tile size of the result
        out: Store file; an in-memory store is returned when omitted
        name: Store name

    Raises:
        MatrixMarketError: On malformed input, with the offending line number
    """
    path = Path(path)
    with open(path) as f:
        banner = f.readline()
    fmt, _, symmetry = _header(banner)
    body = _body(path)
    try:
        line_no, tokens = next(body)
    except StopIteration:
        raise MatrixMarketError("missing size line") from None

    if fmt == "coordinate":
        m, n, nnz = _ints(tokens, 3, line_no)
        rows, cols, vals = _read_entries(body, nnz, m, n)
        store = _new_store(m, n, nb, out, name)
        if symmetry != "general":
            off = rows != cols
            sign = -1.0 if symmetry == "skew-symmetric" else 1.0
            rows, cols, vals = (
                np.concatenate([rows, cols[off]]),
                np.concatenate([cols, rows[off]]),
                np.concatenate([vals, sign * vals[off]]),
            )
        _densify(store, rows, cols, vals)
        logger.debug(f"read {m}x{n} coordinate matrix with {nnz} entries from {path}")
        return store

    m, n = _ints(tokens, 2, line_no)
    dense = _read_array(body, m, n, symmetry)
    store = _new_store(m, n, nb, out, name)
    store.write_block(0, 0, dense)
    logger.debug(f"read {m}x{n} array matrix from {path}")
    return store


def _read_entries(body, nnz: int, m: int, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz)
    count = 0
    for line_no, tokens in body:
        if count == nnz:
            raise MatrixMarketError(f"more than the declared {nnz} entries", line_no)
        if len(tokens) != 3:
            raise MatrixMarketError(f"expected 'row col value', got {len(tokens)} tokens", line_no)
        try:
            i, j, v = int(tokens[0]), int(tokens[1]), float(tokens[2])
        except ValueError as e:
            raise MatrixMarketError(str(e), line_no) from e
        if not (1 <= i <= m and 1 <= j <= n):
            raise MatrixMarketError(f"entry ({i}, {j}) outside {m}x{n}", line_no)
        rows[count], cols[count], vals[count] = i - 1, j - 1, v
        count += 1
    if count != nnz:
        raise MatrixMarketError(f"expected {nnz} entries, found {count}")
    return rows, cols, vals


def _read_array(body, m: int, n: int, symmetry: str) -> np.ndarray:
    if symmetry == "general":
        positions = [(i, j) for j in range(n) for i in range(m)]
    elif m != n:
        raise MatrixMarketError(f"{symmetry} array must be square, got {m}x{n}")
    elif symmetry == "symmetric":
        positions = [(i, j) for j in range(n) for i in range(j, m)]
    else:
        positions = [(i, j) for j in range(n) for i in range(j + 1, m)]
    dense = np.zeros((m, n), order="F")
    count = 0
    for line_no, tokens in body:
        for token in tokens:
            if count == len(positions):
                raise MatrixMarketError(f"more than the expected {len(positions)} values", line_no)
            try:
                dense[positions[count]] = float(token)
            except ValueError as e:
                raise MatrixMarketError(str(e), line_no) from e
            count += 1
    if count != len(positions):
        raise MatrixMarketError(f"expected {len(positions)} values, found {count}")
    if symmetry == "symmetric":
        dense = np.tril(dense) + np.tril(dense, -1).T
    elif symmetry == "skew-symmetric":
        dense = dense - dense.T
    return dense


def _densify(store: BaseTileStore, rows: np.ndarray, cols: np.ndarray, vals: np.ndarray) -> None:
    nb = store.nb
    order = np.argsort(rows, kind="stable")
    rows, cols, vals = rows[order], cols[order], vals[order]
    bounds = np.searchsorted(rows, np.arange(store.block_rows + 1) * nb)
    for i in range(store.block_rows):
        lo, hi = bounds[i], bounds[i + 1]
        strip = np.zeros((extent(store.m, nb, i), store.n), order="F")
        np.add.at(strip, (rows[lo:hi] - i * nb, cols[lo:hi]), vals[lo:hi])
        store.write_block(i * nb, 0, strip)


def write_matrix_market(store: BaseTileStore, path: str | Path, field: str = "array") -> Path:
    """
    Write a store as a real general Matrix Market file with 17 significant digits.

    field="array" writes every entry column by column; field="coordinate" writes
    the nonzeros only.
    """
    if field not in FORMATS:
        raise MatrixMarketError(f"unsupported output format {field!r}")
    path = Path(path)
    nb = store.nb
    with open(path, "w") as f:
        f.write(f"{BANNER} matrix {field} real general\n")
        if field == "array":
            f.write(f"{store.m} {store.n}\n")
            for j in range(store.block_cols):
                strip = store.read_block(0, store.m, j * nb, j * nb + extent(store.n, nb, j))
                np.savetxt(f, strip.reshape(-1, 1, order="F"), fmt="%.17g")
        else:
            strips = []
            for j in range(store.block_cols):
                c0 = j * nb
                strip = store.read_block(0, store.m, c0, c0 + extent(store.n, nb, j))
                cc, rr = np.nonzero(strip.T)
                strips.append(np.column_stack([rr + 1, cc + c0 + 1, strip[rr, cc]]))
            entries = np.vstack(strips) if strips else np.empty((0, 3))
            f.write(f"{store.m} {store.n} {len(entries)}\n")
            for i, j, v in entries:
                f.write(f"{int(i)} {int(j)} {v:.17g}\n")
    return path
