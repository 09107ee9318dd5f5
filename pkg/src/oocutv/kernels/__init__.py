from .blas import GemmMode, gemm, keep_upper, trsm_upper, zero_tile
from .householder import (
    CompactReflectors,
    ReflectorShape,
    Side,
    apply_q_dense,
    apply_q_td,
    house,
    qr_dense,
    qr_triangular_dense,
    unit_lower,
)
from .nullify import apply_rz_right, rz_nullify
from .random import gauss_tile, stream
from .svd import SmallSvdResult, svd_dense

__all__ = [
    "CompactReflectors",
    "GemmMode",
    "ReflectorShape",
    "Side",
    "SmallSvdResult",
    "apply_q_dense",
    "apply_q_td",
    "apply_rz_right",
    "gauss_tile",
    "gemm",
    "house",
    "keep_upper",
    "qr_dense",
    "qr_triangular_dense",
    "rz_nullify",
    "stream",
    "svd_dense",
    "trsm_upper",
    "unit_lower",
    "zero_tile",
]
