"""Small dense SVD by one-sided Jacobi rotations."""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import NumericalFailureError, ShapeError

MAX_SWEEPS = 60


@dataclass
class SmallSvdResult:
    """a = u @ diag(sigma) @ v.T with sigma nonincreasing."""

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray


@lru_cache(maxsize=32)
def _round_robin(b: int) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
    """Disjoint column pairs per round, covering every pair once per sweep."""
    players = list(range(b)) + ([-1] if b % 2 else [])
    size = len(players)
    rounds = []
    for _ in range(size - 1):
        pairs = [(players[i], players[size - 1 - i]) for i in range(size // 2)]
        pairs = [(min(p, q), max(p, q)) for p, q in pairs if p >= 0 and q >= 0]
        rounds.append((np.array([p for p, _ in pairs], dtype=np.intp), np.array([q for _, q in pairs], dtype=np.intp)))
        players = [players[0], players[-1], *players[1:-1]]
    return tuple(rounds)


def _complete_basis(u: np.ndarray, good: int) -> None:
    """Fill columns good: of u with an orthonormal complement of u[:, :good]."""
    b = u.shape[0]
    q, _ = np.linalg.qr(np.hstack([u[:, :good], np.eye(b)]))
    u[:, good:] = q[:, good:b]


def svd_dense(a: np.ndarray, max_sweeps: int = MAX_SWEEPS) -> SmallSvdResult:
    """
    SVD of a square tile.

    Raises:
        ShapeError: If the tile is not square
        NumericalFailureError: If the rotations do not converge within max_sweeps
    """
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"svd_dense needs a square tile, got {a.shape}")
    b = a.shape[0]
    work = np.array(a, dtype=np.float64, order="F")
    v = np.eye(b, order="F")
    tol = b * np.finfo(np.float64).eps
    for _ in range(max_sweeps):
        rotated = False
        for p, q in _round_robin(b):
            ap, aq = work[:, p], work[:, q]
            alpha = np.einsum("ij,ij->j", ap, ap)
            beta = np.einsum("ij,ij->j", aq, aq)
            gamma = np.einsum("ij,ij->j", ap, aq)
            mask = np.abs(gamma) > tol * np.sqrt(alpha * beta)
            if not mask.any():
                continue
            rotated = True
            p, q = p[mask], q[mask]
            alpha, beta, gamma = alpha[mask], beta[mask], gamma[mask]
            zeta = (beta - alpha) / (2.0 * gamma)
            t = np.where(zeta >= 0.0, 1.0, -1.0) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            for mat in (work, v):
                mp, mq = mat[:, p], mat[:, q]
                mat[:, p] = c * mp - s * mq
                mat[:, q] = s * mp + c * mq
        if not rotated:
            break
    else:
        raise NumericalFailureError(f"one-sided Jacobi did not converge in {max_sweeps} sweeps")

    sigma = np.sqrt(np.einsum("ij,ij->j", work, work))
    order = np.argsort(-sigma, kind="stable")
    sigma, work, v = sigma[order], work[:, order], np.asfortranarray(v[:, order])
    floor = max(sigma[0] * tol, np.finfo(np.float64).tiny) if b else 0.0
    good = int(np.count_nonzero(sigma > floor))
    u = np.zeros((b, b), order="F")
    u[:, :good] = work[:, :good] / sigma[:good]
    sigma[good:] = 0.0
    if good < b:
        _complete_basis(u, good)
    return SmallSvdResult(u, sigma, v)
