"""Householder QR kernels in compact-WY form."""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..errors import ShapeError


class Side(str, Enum):
    LEFT = "left"
    LEFT_T = "left-transpose"
    RIGHT = "right"
    RIGHT_T = "right-transpose"


class ReflectorShape(str, Enum):
    """How the stored vectors map to the basis W of I - W Tf W^T."""

    DENSE = "dense"  # w is W itself, unit lower trapezoidal
    STACKED = "stacked"  # W = [I; w], w below an implicit identity
    ROW = "row"  # W = [I; w^T], w holds one reflector per row


@dataclass
class CompactReflectors:
    """Block reflector Q = I - W Tf W^T."""

    w: np.ndarray
    tf: np.ndarray
    shape: ReflectorShape = ReflectorShape.DENSE

    @property
    def count(self) -> int:
        return self.tf.shape[0]

    def basis(self) -> np.ndarray:
        if self.shape is ReflectorShape.DENSE:
            return self.w
        eye = np.eye(self.count)
        if self.shape is ReflectorShape.STACKED:
            return np.vstack([eye, self.w])
        return np.vstack([eye, self.w.T])

    def explicit(self) -> np.ndarray:
        """Materialize Q; for tests and oracles only."""
        w = self.basis()
        return np.eye(w.shape[0]) - w @ self.tf @ w.T


def house(x: np.ndarray) -> tuple[np.ndarray, float, float]:
    """
    Householder vector mapping x onto a nonnegative multiple of e1.

    Returns:
        (tail, tau, beta) with v = [1; tail] and (I - tau v v^T) x = beta e1, beta >= 0
    """
    alpha = float(x[0])
    tail = np.asarray(x[1:], dtype=np.float64)
    sigma = float(tail @ tail)
    if sigma == 0.0:
        if alpha >= 0.0:
            return np.zeros_like(tail), 0.0, alpha
        return np.zeros_like(tail), 2.0, -alpha
    mu = math.sqrt(alpha * alpha + sigma)
    v0 = alpha - mu if alpha <= 0.0 else -sigma / (alpha + mu)
    tau = 2.0 * v0 * v0 / (sigma + v0 * v0)
    return tail / v0, tau, mu


def larft(gram: np.ndarray, taus: np.ndarray) -> np.ndarray:
    """Forward column-wise triangular factor from the Gram matrix W^T W."""
    c = taus.shape[0]
    tf = np.zeros((c, c), order="F")
    for j in range(c):
        tf[j, j] = taus[j]
        if j:
            tf[:j, j] = -taus[j] * (tf[:j, :j] @ gram[:j, j])
    return tf


def unit_lower(panel: np.ndarray) -> np.ndarray:
    r, c = panel.shape
    return np.tril(panel, -1) + np.eye(r, c)


def qr_dense(panel: np.ndarray) -> CompactReflectors:
    """
    Factor panel = Q R in place.

    On exit the upper triangle holds R (nonnegative diagonal) and the strictly
    lower part holds the Householder vectors.

    Raises:
        ShapeError: If the panel has fewer rows than columns
    """
    r, c = panel.shape
    if r < c:
        raise ShapeError(f"qr_dense needs rows >= cols, got {r}x{c}")
    taus = np.zeros(c)
    for j in range(c):
        tail, tau, beta = house(panel[j:, j])
        if j + 1 < c and tau != 0.0:
            trailing = panel[j:, j + 1 :]
            w = trailing[0] + tail @ trailing[1:]
            trailing[0] -= tau * w
            trailing[1:] -= tau * np.outer(tail, w)
        panel[j, j] = beta
        panel[j + 1 :, j] = tail
        taus[j] = tau
    w = unit_lower(panel)
    return CompactReflectors(w, larft(w.T @ w, taus))


def qr_triangular_dense(r_top: np.ndarray, d: np.ndarray) -> CompactReflectors:
    """
    Factor the stack [r_top; d] with r_top upper triangular.

    r_top receives the new triangular factor, d receives the reflector tails.
    """
    b = r_top.shape[0]
    if r_top.shape != (b, b) or d.shape[1] != b:
        raise ShapeError(f"qr_triangular_dense got R {r_top.shape} and D {d.shape}")
    taus = np.zeros(b)
    for j in range(b):
        tail, tau, beta = house(np.concatenate(([r_top[j, j]], d[:, j])))
        if j + 1 < b and tau != 0.0:
            w = r_top[j, j + 1 :] + tail @ d[:, j + 1 :]
            r_top[j, j + 1 :] -= tau * w
            d[:, j + 1 :] -= tau * np.outer(tail, w)
        r_top[j, j] = beta
        d[:, j] = tail
        taus[j] = tau
    u = np.array(d, order="F")
    return CompactReflectors(u, larft(u.T @ u, taus), ReflectorShape.STACKED)


def _factor(refl: CompactReflectors, side: Side) -> np.ndarray:
    return refl.tf.T if side in (Side.LEFT_T, Side.RIGHT_T) else refl.tf


def apply_q_dense(refl: CompactReflectors, side: Side, c: np.ndarray) -> None:
    """Overwrite c with Q^T c, Q c, c Q or c Q^T."""
    w = refl.basis()
    tf = _factor(refl, side)
    if side in (Side.LEFT, Side.LEFT_T):
        if c.shape[0] != w.shape[0]:
            raise ShapeError(f"left apply of {w.shape[0]}-row reflector to {c.shape}")
        c -= w @ (tf @ (w.T @ c))
    else:
        if c.shape[1] != w.shape[0]:
            raise ShapeError(f"right apply of {w.shape[0]}-row reflector to {c.shape}")
        c -= ((c @ w) @ tf) @ w.T


def apply_q_td(refl: CompactReflectors, side: Side, c_top: np.ndarray, c_bot: np.ndarray) -> None:
    """
    Apply a stacked reflector from qr_triangular_dense to a pair of blocks.

    For left application c_top/c_bot are stacked rows; for right application
    they are side-by-side column blocks.
    """
    u = refl.w
    tf = _factor(refl, side)
    b = refl.count
    if side in (Side.LEFT, Side.LEFT_T):
        if c_top.shape[0] != b or c_bot.shape[0] != u.shape[0] or c_top.shape[1] != c_bot.shape[1]:
            raise ShapeError(f"left td apply to {c_top.shape} over {c_bot.shape}")
        s = tf @ (c_top + u.T @ c_bot)
        c_top -= s
        c_bot -= u @ s
    else:
        if c_top.shape[1] != b or c_bot.shape[1] != u.shape[0] or c_top.shape[0] != c_bot.shape[0]:
            raise ShapeError(f"right td apply to {c_top.shape} beside {c_bot.shape}")
        s = (c_top + c_bot @ u) @ tf
        c_top -= s
        c_bot -= s @ u.T
