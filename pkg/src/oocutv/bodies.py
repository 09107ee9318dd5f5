"""Kernel bodies run for each task kind."""

from collections.abc import Callable, Mapping

import numpy as np

from .kernels import (
    CompactReflectors,
    GemmMode,
    ReflectorShape,
    Side,
    apply_q_dense,
    apply_q_td,
    apply_rz_right,
    gauss_tile,
    gemm,
    keep_upper,
    qr_dense,
    qr_triangular_dense,
    rz_nullify,
    svd_dense,
    trsm_upper,
    unit_lower,
)
from .tasks import BlockId, Task, TaskKind

Body = Callable[[list[np.ndarray], Task], None]

_BODIES: dict[TaskKind, Body] = {}


def body(*kinds: TaskKind) -> Callable[[Body], Body]:
    def register(fn: Body) -> Body:
        for kind in kinds:
            _BODIES[kind] = fn
        return fn

    return register


def run_task(task: Task, tiles: Mapping[BlockId, np.ndarray]) -> None:
    """Run task on the resident tile arrays keyed by block id."""
    views = [op.view(tiles[op.block]) for op in task.operands]
    _BODIES[task.kind](views, task)


@body(TaskKind.NORMAL)
def _normal(views, task):
    (g,) = views
    g[...] = gauss_tile(g.shape[0], g.shape[1], (task.params["seed"], task.step, task.params["row"]))


@body(TaskKind.GEMM_NN, TaskKind.GEMM_TN, TaskKind.GEMM_AABT, TaskKind.GEMM_ABTA, TaskKind.GEMM_AAB)
def _gemm(views, task):
    params = task.params
    gemm(GemmMode(params["mode"]), *views, alpha=params.get("alpha", 1.0), beta=params.get("beta", 1.0))


@body(TaskKind.COMP_DE)
def _comp_dense(views, task):
    panel, tf = views
    tf[...] = qr_dense(panel).tf


@body(TaskKind.COMP_TD)
def _comp_td(views, task):
    r_top, d, tf = views
    tf[...] = qr_triangular_dense(r_top, d).tf


@body(TaskKind.APPL_L_DE, TaskKind.APPL_R_DE)
def _apply_dense(views, task):
    panel, tf, c = views
    apply_q_dense(CompactReflectors(unit_lower(panel), tf), Side(task.params["side"]), c)


@body(TaskKind.APPL_L_TD, TaskKind.APPL_R_TD)
def _apply_td(views, task):
    d, tf, c_top, c_bot = views
    apply_q_td(CompactReflectors(d, tf, ReflectorShape.STACKED), Side(task.params["side"]), c_top, c_bot)


@body(TaskKind.SVD)
def _svd(views, task):
    tile, us, vs = views
    b = task.params["b"]
    result = svd_dense(tile[:b, :b])
    tile[...] = 0.0
    idx = np.arange(b)
    tile[idx, idx] = result.sigma
    us[...] = result.u
    vs[...] = result.v


@body(TaskKind.KEEP_UPP)
def _keep_upper(views, task):
    keep_upper(views[0])


@body(TaskKind.ZERO)
def _zero(views, task):
    views[0][...] = 0.0


@body(TaskKind.TRSM)
def _trsm(views, task):
    t11, b = views
    trsm_upper(t11, b)


@body(TaskKind.COMP_RZ)
def _comp_rz(views, task):
    c11, d1, tf = views
    tf[...] = rz_nullify(c11, d1).tf


@body(TaskKind.APPL_R_RZ)
def _apply_rz(views, task):
    w, tf, e1, f = views
    apply_rz_right(CompactReflectors(w, tf, ReflectorShape.ROW), e1, f)
