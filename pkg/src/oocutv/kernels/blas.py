"""Tile products, triangular solves and structural kernels."""

from enum import Enum

import numpy as np
import scipy.linalg

from ..errors import ShapeError, SingularBlockError


class GemmMode(str, Enum):
    NN = "nn"  # c := beta c + alpha a b
    TN = "tn"  # c := beta c + alpha a^T b
    RIGHT = "right"  # c := c a
    LEFT_T = "left_t"  # c := a^T c


def gemm(
    mode: GemmMode,
    c: np.ndarray,
    a: np.ndarray,
    b: np.ndarray | None = None,
    alpha: float = 1.0,
    beta: float = 1.0,
) -> None:
    """
    Update c in place according to mode.

    With beta == 0 the previous contents of c are ignored, not scaled.

    Raises:
        ShapeError: If the operands do not conform
    """
    mode = GemmMode(mode)
    if mode is GemmMode.RIGHT:
        if c.shape[1] != a.shape[0] or a.shape[0] != a.shape[1]:
            raise ShapeError(f"gemm right: {c.shape} times {a.shape}")
        c[...] = c @ a
        return
    if mode is GemmMode.LEFT_T:
        if c.shape[0] != a.shape[0] or a.shape[0] != a.shape[1]:
            raise ShapeError(f"gemm left_t: {a.shape}^T times {c.shape}")
        c[...] = a.T @ c
        return
    if b is None:
        raise ShapeError(f"gemm {mode.value} needs two factors")
    op_a = a.T if mode is GemmMode.TN else a
    if op_a.shape[1] != b.shape[0] or c.shape != (op_a.shape[0], b.shape[1]):
        raise ShapeError(f"gemm {mode.value}: {c.shape} += {op_a.shape} x {b.shape}")
    product = op_a @ b
    if alpha != 1.0:
        product *= alpha
    if beta == 0.0:
        c[...] = product
    elif beta == 1.0:
        c += product
    else:
        c[...] = beta * c + product


def trsm_upper(t11: np.ndarray, b: np.ndarray) -> None:
    """
    Overwrite b with t11^{-1} b for upper-triangular t11.

    Raises:
        SingularBlockError: If t11 has a zero diagonal entry
    """
    if t11.shape[0] != t11.shape[1] or t11.shape[0] != b.shape[0]:
        raise ShapeError(f"trsm_upper: {t11.shape} against {b.shape}")
    diag = np.diagonal(t11)
    if np.any(diag == 0.0):
        raise SingularBlockError(f"zero diagonal entry at {int(np.flatnonzero(diag == 0.0)[0])}")
    b[...] = scipy.linalg.solve_triangular(t11, b, lower=False, check_finite=False)


def keep_upper(tile: np.ndarray) -> None:
    tile[...] = np.triu(tile)


def zero_tile(rows: int, cols: int) -> np.ndarray:
    return np.zeros((rows, cols), order="F")
