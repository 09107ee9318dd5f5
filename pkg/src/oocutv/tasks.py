"""Tasks of the algorithm-by-blocks formulation and their text trace."""

import re
from collections import Counter
from collections.abc import Callable, Iterable, Iterator
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

BlockId = tuple[str, int, int]


class TaskKind(str, Enum):
    COMP_DE = "Comp_De"
    COMP_TD = "Comp_TD"
    APPL_L_DE = "Appl_l_De"
    APPL_R_DE = "Appl_r_De"
    APPL_L_TD = "Appl_l_TD"
    APPL_R_TD = "Appl_r_TD"
    GEMM_NN = "Gemm_nn"
    GEMM_TN = "Gemm_tn"
    GEMM_AABT = "Gemm_aabt"
    GEMM_ABTA = "Gemm_abta"
    GEMM_AAB = "Gemm_aab"
    SVD = "Svd"
    TRSM = "Trsm_lunn"
    COMP_RZ = "Comp_RZ"
    APPL_R_RZ = "Appl_r_RZ"
    NORMAL = "Normal"
    KEEP_UPP = "Keep_upp"
    ZERO = "Zero"


class Intent(str, Enum):
    READ = "r"
    READ_WRITE = "rw"
    WRITE = "w"

    def merge(self, other: "Intent") -> "Intent":
        if self is other:
            return self
        return Intent.READ_WRITE


Span = tuple[int, int] | None


def _span_text(span: Span) -> str:
    return ":" if span is None else f"{span[0]}:{span[1]}"


@dataclass(frozen=True, slots=True)
class Operand:
    """A tile, optionally restricted to a row/column window, with its access intent."""

    store: str
    i: int
    j: int
    intent: Intent = Intent.READ
    rows: Span = None
    cols: Span = None

    @property
    def block(self) -> BlockId:
        return (self.store, self.i, self.j)

    def view(self, data: np.ndarray) -> np.ndarray:
        rows = slice(None) if self.rows is None else slice(*self.rows)
        cols = slice(None) if self.cols is None else slice(*self.cols)
        return data[rows, cols]

    def __str__(self) -> str:
        window = "" if self.rows is None and self.cols is None else f"({_span_text(self.rows)},{_span_text(self.cols)})"
        return f"{self.store}[{self.i},{self.j}]{window}:{self.intent.value}"


@dataclass(frozen=True)
class Task:
    index: int
    kind: TaskKind
    step: int
    operands: tuple[Operand, ...]
    params: dict[str, Any] = field(default_factory=dict)

    def blocks(self) -> list[tuple[BlockId, Intent]]:
        """Distinct blocks in first-appearance order with merged intents."""
        merged: dict[BlockId, Intent] = {}
        for op in self.operands:
            prev = merged.get(op.block)
            merged[op.block] = op.intent if prev is None else prev.merge(op.intent)
        return list(merged.items())

    def __str__(self) -> str:
        parts = [str(self.index), self.kind.value, f"step={self.step}"]
        parts += [str(op) for op in self.operands]
        parts += [f"{key}={value}" for key, value in sorted(self.params.items())]
        return " ".join(parts)


class TaskList:
    """Ordered, fully materialized list of tasks.

    Example:
        tasks = TaskList()
        tasks.add(TaskKind.KEEP_UPP, 0, Operand("A", 0, 0, Intent.READ_WRITE))
    """

    def __init__(self, tasks: Iterable[Task] | None = None):
        self.tasks: list[Task] = list(tasks or [])

    def add(self, kind: TaskKind, step: int, *operands: Operand, **params: Any) -> Task:
        task = Task(len(self.tasks), kind, step, operands, params)
        self.tasks.append(task)
        return task

    def counts(self) -> Counter[TaskKind]:
        return Counter(task.kind for task in self.tasks)

    def schedule(self) -> dict[BlockId, list[int]]:
        """Sorted task indices at which each block is used."""
        uses: dict[BlockId, list[int]] = {}
        for task in self.tasks:
            for block, _ in task.blocks():
                uses.setdefault(block, []).append(task.index)
        return uses

    def working_set(self, nbytes: Callable[[BlockId], int]) -> int:
        """Largest total size of one task's distinct blocks."""
        return max((sum(nbytes(b) for b, _ in task.blocks()) for task in self.tasks), default=0)

    def to_trace(self) -> str:
        return "".join(f"{task}\n" for task in self.tasks)

    def __iter__(self) -> Iterator[Task]:
        return iter(self.tasks)

    def __getitem__(self, index: int) -> Task:
        return self.tasks[index]

    def __len__(self) -> int:
        return len(self.tasks)

    def __repr__(self) -> str:
        return f"TaskList({len(self.tasks)} tasks)"

    def __add__(self, other: "TaskList") -> "TaskList":
        """Concatenate, renumbering the second list."""
        joined = TaskList(self.tasks)
        for task in other:
            joined.add(task.kind, task.step, *task.operands, **task.params)
        return joined


_OPERAND = re.compile(r"^(\w+)\[(\d+),(\d+)\](?:\((?:(\d+):(\d+)|:),(?:(\d+):(\d+)|:)\))?:(rw|r|w)$")


def _parse_value(text: str) -> Any:
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def parse_operand(text: str) -> Operand:
    match = _OPERAND.match(text)
    if match is None:
        raise ValueError(f"bad operand token {text!r}")
    store, i, j, r0, r1, c0, c1, intent = match.groups()
    rows = None if r0 is None else (int(r0), int(r1))
    cols = None if c0 is None else (int(c0), int(c1))
    return Operand(store, int(i), int(j), Intent(intent), rows, cols)


def parse_trace(text: str) -> TaskList:
    """Inverse of TaskList.to_trace."""
    tasks = TaskList()
    for line_no, line in enumerate(text.splitlines(), start=1):
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) < 3 or not tokens[0].isdigit():
            raise ValueError(f"line {line_no}: malformed task {line!r}")
        kind = TaskKind(tokens[1])
        step = 0
        operands: list[Operand] = []
        params: dict[str, Any] = {}
        for token in tokens[2:]:
            if "[" in token:
                operands.append(parse_operand(token))
            else:
                key, _, value = token.partition("=")
                if key == "step":
                    step = int(value)
                else:
                    params[key] = _parse_value(value)
        tasks.add(kind, step, *operands, **params)
    return tasks
