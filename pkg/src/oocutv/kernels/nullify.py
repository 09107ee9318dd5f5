"""Right-sided RZ nullification of the block right of a triangular factor."""

import numpy as np

from ..errors import ShapeError
from .householder import CompactReflectors, ReflectorShape, Side, house, larft


def rz_nullify(c11: np.ndarray, d1: np.ndarray) -> CompactReflectors:
    """
    Zero d1 against the upper-triangular c11 with reflectors applied from the right.

    Columns of c11 are processed last to first; each reflector acts on
    [c11(j, j), d1(j, :)]. On exit c11 is upper triangular with nonnegative
    diagonal and d1 holds the reflector tails, one per row.

    Returns:
        Z = I - W Tf W^T with W = [I; d1^T], so that [c11_old, d1_old] Z = [c11_new, 0]
    """
    b = c11.shape[0]
    if c11.shape != (b, b) or d1.shape[0] != b:
        raise ShapeError(f"rz_nullify got C11 {c11.shape} and D1 {d1.shape}")
    taus = np.zeros(b)
    for j in reversed(range(b)):
        tail, tau, beta = house(np.concatenate(([c11[j, j]], d1[j, :])))
        if j and tau != 0.0:
            s = c11[:j, j] + d1[:j, :] @ tail
            c11[:j, j] -= tau * s
            d1[:j, :] -= tau * np.outer(s, tail)
        c11[j, j] = beta
        d1[j, :] = tail
        taus[j] = tau
    w = np.array(d1, order="F")
    # reflectors compose last-to-first, so build Tf in reversed order and flip back
    gram = (w @ w.T)[::-1, ::-1]
    tf = larft(gram, taus[::-1])[::-1, ::-1]
    return CompactReflectors(w, np.array(tf, order="F"), ReflectorShape.ROW)


def apply_rz_right(refl: CompactReflectors, e1: np.ndarray, f: np.ndarray, side: Side = Side.RIGHT) -> None:
    """Overwrite [e1, f] with [e1, f] Z (or Z^T for Side.RIGHT_T)."""
    w = refl.w
    if e1.shape[1] != refl.count or f.shape[1] != w.shape[1] or e1.shape[0] != f.shape[0]:
        raise ShapeError(f"rz apply to {e1.shape} beside {f.shape}")
    tf = refl.tf.T if side is Side.RIGHT_T else refl.tf
    s = (e1 + f @ w.T) @ tf
    e1 -= s
    f -= s @ w
