import pytest

from oocutv.config import FactorOptions
from oocutv.errors import ShapeError
from oocutv.randutv import build_task_list
from oocutv.store import MemoryTileStore
from oocutv.tasks import Intent, Operand, Task, TaskKind, TaskList, parse_operand, parse_trace

# factorization-phase counts of a 9 x 9-tile matrix with one tile column of right-hand sides
NINE_BY_NINE = {
    TaskKind.COMP_DE: 16,
    TaskKind.COMP_TD: 72,
    TaskKind.APPL_L_DE: 44,
    TaskKind.APPL_R_DE: 144,
    TaskKind.APPL_L_TD: 240,
    TaskKind.APPL_R_TD: 648,
    TaskKind.GEMM_NN: 117,
    TaskKind.GEMM_TN: 284,
    TaskKind.GEMM_ABTA: 45,
    TaskKind.SVD: 9,
    TaskKind.NORMAL: 44,
    TaskKind.KEEP_UPP: 8,
    TaskKind.ZERO: 36,
}


def nine_by_nine(q: int = 0) -> TaskList:
    nb = 2
    rhs = MemoryTileStore(9 * nb, 1, nb, "B")
    return build_task_list(9 * nb, 9 * nb, FactorOptions(q=q, nb=nb, rhs=rhs))


def test_nine_by_nine_counts():
    assert dict(nine_by_nine().counts()) == NINE_BY_NINE


def test_power_iteration_adds_products():
    counts = nine_by_nine(q=1).counts()
    assert counts[TaskKind.GEMM_TN] == 2 * NINE_BY_NINE[TaskKind.GEMM_TN]
    assert counts[TaskKind.GEMM_NN] == NINE_BY_NINE[TaskKind.GEMM_NN] + 284
    assert counts[TaskKind.SVD] == 9


def test_single_tile_list():
    tasks = build_task_list(4, 4, FactorOptions(nb=4))
    assert [t.kind for t in tasks] == [
        TaskKind.NORMAL,
        TaskKind.GEMM_TN,
        TaskKind.COMP_DE,
        TaskKind.APPL_R_DE,
        TaskKind.APPL_R_DE,
        TaskKind.COMP_DE,
        TaskKind.KEEP_UPP,
        TaskKind.SVD,
        TaskKind.GEMM_NN,
    ]
    assert tasks[2].operands[0].store == "Y"
    assert tasks[3].operands[2].store == "A"
    assert tasks[4].operands[2].store == "V"
    assert tasks[5].operands[0].store == "A"
    assert tasks[8].operands[0].store == "V"


def test_one_tile_column_clears_reflectors_before_the_svd():
    tasks = build_task_list(11, 3, FactorOptions(nb=3))
    kinds = [t.kind for t in tasks]
    assert kinds.count(TaskKind.ZERO) == 3
    assert kinds.index(TaskKind.KEEP_UPP) + 1 == kinds.index(TaskKind.SVD)


def test_tall_matrix_with_edge_tiles():
    tasks = build_task_list(11, 8, FactorOptions(nb=3))
    counts = tasks.counts()
    assert {t.step for t in tasks} == {0, 1, 2}
    assert counts[TaskKind.COMP_DE] == 5
    assert counts[TaskKind.SVD] == 3
    assert counts[TaskKind.NORMAL] == 7
    assert counts[TaskKind.GEMM_TN] == 18
    assert counts[TaskKind.KEEP_UPP] == 3
    assert counts[TaskKind.ZERO] == 6


def test_build_u_accumulates_u():
    tasks = build_task_list(6, 6, FactorOptions(nb=2, build_u=True))
    assert tasks.counts()[TaskKind.GEMM_AAB] == 9
    assert any(op.store == "U" for t in tasks for op in t.operands)


def test_build_task_list_shape_errors():
    with pytest.raises(ShapeError):
        build_task_list(4, 6, FactorOptions(nb=2))
    with pytest.raises(ShapeError):
        build_task_list(6, 4, FactorOptions(nb=5))
    with pytest.raises(ShapeError):
        build_task_list(6, 4, FactorOptions(nb=2, rhs=MemoryTileStore(5, 1, 2)))


def test_trace_round_trip():
    tasks = build_task_list(11, 8, FactorOptions(q=1, nb=3, rhs=MemoryTileStore(11, 2, 3, "B")))
    trace = tasks.to_trace()
    parsed = parse_trace(trace)
    assert len(parsed) == len(tasks)
    assert parsed.to_trace() == trace
    assert parsed[10].operands == tasks[10].operands
    assert parsed[10].params == tasks[10].params


def test_operand_text():
    op = Operand("A", 1, 2, Intent.READ_WRITE, (0, 2), None)
    assert str(op) == "A[1,2](0:2,:):rw"
    assert parse_operand(str(op)) == op
    assert str(Operand("TV", 0, 0)) == "TV[0,0]:r"


def test_parse_errors():
    with pytest.raises(ValueError):
        parse_operand("A[1]:r")
    with pytest.raises(ValueError):
        parse_trace("x Svd step=0\n")


def test_blocks_merge_intents():
    task = Task(
        0,
        TaskKind.COMP_RZ,
        0,
        (
            Operand("A", 0, 0, Intent.READ, (0, 1), (0, 1)),
            Operand("A", 0, 0, Intent.READ_WRITE, (0, 1), (1, 2)),
            Operand("TZ", 0, 0, Intent.WRITE),
        ),
    )
    assert task.blocks() == [(("A", 0, 0), Intent.READ_WRITE), (("TZ", 0, 0), Intent.WRITE)]


def test_schedule_and_working_set():
    tasks = TaskList()
    tasks.add(TaskKind.KEEP_UPP, 0, Operand("A", 0, 0, Intent.READ_WRITE))
    tasks.add(TaskKind.ZERO, 0, Operand("A", 1, 0, Intent.WRITE))
    tasks.add(TaskKind.TRSM, 0, Operand("A", 0, 0), Operand("B", 0, 0, Intent.READ_WRITE))
    schedule = tasks.schedule()
    assert schedule[("A", 0, 0)] == [0, 2]
    assert schedule[("B", 0, 0)] == [2]
    assert tasks.working_set(lambda block: 10) == 20


def test_concatenation_renumbers():
    first = TaskList()
    first.add(TaskKind.ZERO, 0, Operand("A", 0, 0, Intent.WRITE))
    joined = first + first
    assert [t.index for t in joined] == [0, 1]
    assert len(first) == 1
