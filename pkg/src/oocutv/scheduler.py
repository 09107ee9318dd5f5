"""
Executors that run a TaskList through the block cache.

The sequential executor fetches, computes and releases one task at a time. The
overlapped executor adds an I/O thread that pins the operands of up to
`lookahead` upcoming tasks while the calling thread computes.
"""

import logging
import queue
import threading
import time
from abc import ABC, abstractmethod
from collections.abc import Iterable

from pydantic import BaseModel, Field
from rich.table import Table

from .bodies import run_task
from .cache import BlockCache, CacheHandle, CacheStats
from .errors import CacheCapacityError, OocError, OptionConflictError, TaskFailedError
from .tasks import Task, TaskList
from .utils import Timer

logger = logging.getLogger(__name__)

DEFAULT_LOOKAHEAD = 8


class KindTiming(BaseModel):
    count: int = 0
    seconds: float = 0.0

    @property
    def mean(self) -> float:
        return self.seconds / self.count if self.count else 0.0


class ExecutionReport(BaseModel):
    """Per-kind task counts and the wall-time split of one or more executions."""

    executor: str = Field("sequential", description="Executor that produced the report")
    tasks: int = Field(0, ge=0, description="Number of tasks executed")
    kinds: dict[str, KindTiming] = Field(default_factory=dict, description="Count and compute seconds per task kind")
    io_seconds: float = Field(0.0, description="Time spent acquiring, releasing and flushing tiles")
    compute_seconds: float = Field(0.0, description="Time spent in kernel bodies")
    stall_seconds: float = Field(0.0, description="Time the compute thread waited for operands")
    wall_seconds: float = Field(0.0, description="Elapsed time")
    stats: CacheStats = Field(default_factory=CacheStats, description="Disk traffic during the execution")

    def record(self, task: Task, seconds: float) -> None:
        timing = self.kinds.setdefault(task.kind.value, KindTiming())
        timing.count += 1
        timing.seconds += seconds
        self.tasks += 1
        self.compute_seconds += seconds

    def counts(self) -> dict[str, int]:
        return {kind: timing.count for kind, timing in self.kinds.items()}

    def merge(self, other: "ExecutionReport") -> "ExecutionReport":
        kinds = {k: v.model_copy() for k, v in self.kinds.items()}
        for kind, timing in other.kinds.items():
            mine = kinds.setdefault(kind, KindTiming())
            mine.count += timing.count
            mine.seconds += timing.seconds
        return ExecutionReport(
            executor=self.executor,
            tasks=self.tasks + other.tasks,
            kinds=kinds,
            io_seconds=self.io_seconds + other.io_seconds,
            compute_seconds=self.compute_seconds + other.compute_seconds,
            stall_seconds=self.stall_seconds + other.stall_seconds,
            wall_seconds=self.wall_seconds + other.wall_seconds,
            stats=self.stats + other.stats,
        )

    def table(self, title: str | None = None) -> Table:
        table = Table(title=title)
        table.add_column("Task kind")
        table.add_column("Count", justify="right")
        table.add_column("Total s", justify="right")
        table.add_column("Mean s", justify="right")
        for kind in sorted(self.kinds):
            timing = self.kinds[kind]
            table.add_row(kind, str(timing.count), f"{timing.seconds:.4f}", f"{timing.mean:.2e}")
        table.add_section()
        table.add_row("Disk I/O", "", f"{self.io_seconds:.4f}", "")
        table.add_row("Compute", "", f"{self.compute_seconds:.4f}", "")
        table.add_row("Wall", str(self.tasks), f"{self.wall_seconds:.4f}", "")
        return table

    def to_csv(self) -> str:
        lines = ["kind,count,seconds,mean_seconds"]
        for kind in sorted(self.kinds):
            timing = self.kinds[kind]
            lines.append(f"{kind},{timing.count},{timing.seconds:.6f},{timing.mean:.6e}")
        lines.append(f"io,,{self.io_seconds:.6f},")
        lines.append(f"compute,,{self.compute_seconds:.6f},")
        lines.append(f"wall,{self.tasks},{self.wall_seconds:.6f},")
        return "\n".join(lines) + "\n"


class BaseExecutor(ABC):
    """Runs a task list in list order; subclasses decide when operands move."""

    name = "base"

    def __init__(self, verbose: bool = False):
        self.verbose = verbose

    def execute(self, tasks: TaskList, cache: BlockCache) -> ExecutionReport:
        """
        Run every task, then flush the cache.

        Raises:
            CacheCapacityError: If a single task's operands cannot be pinned together
            TaskFailedError: If a kernel body raises
        """
        report = ExecutionReport(executor=self.name)
        if not len(tasks):
            return report
        cache.set_schedule(tasks)
        before = cache.stats
        start = time.perf_counter()
        self._run(tasks, cache, report)
        with Timer("flush") as flush:
            cache.flush()
        report.io_seconds += flush.elapsed
        report.wall_seconds = time.perf_counter() - start
        report.stats = cache.stats - before
        logger.debug(f"{self.name} executed {report.tasks} tasks: {report.stats.line()}")
        return report

    @abstractmethod
    def _run(self, tasks: TaskList, cache: BlockCache, report: ExecutionReport) -> None:
        pass

    def _compute(self, task: Task, handles: list[CacheHandle], report: ExecutionReport) -> None:
        if self.verbose:
            logger.debug(str(task))
        tiles = {h.block: h.data for h in handles}
        start = time.perf_counter()
        try:
            run_task(task, tiles)
        except (OocError, ValueError, ArithmeticError, IndexError) as exc:
            raise TaskFailedError(task.index, task.kind.value, exc) from exc
        report.record(task, time.perf_counter() - start)

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}()"


class SequentialExecutor(BaseExecutor):
    """Fetch operands, run, write back: one task at a time."""

    name = "sequential"

    def _run(self, tasks: TaskList, cache: BlockCache, report: ExecutionReport) -> None:
        for task in tasks:
            t0 = time.perf_counter()
            handles = cache.acquire_many(task.blocks(), now=task.index)
            report.io_seconds += time.perf_counter() - t0
            try:
                self._compute(task, handles, report)
            finally:
                t0 = time.perf_counter()
                _release_all(cache, handles)
                report.io_seconds += time.perf_counter() - t0


class OverlappedExecutor(BaseExecutor):
    """
    One I/O thread prefetches and pins operands; the calling thread computes.

    The I/O thread holds at most `lookahead` prepared tasks. When the cache cannot
    take the next task's operands it waits for the compute side to release tiles,
    which shrinks the effective lookahead. If nothing is in flight and the
    operands still do not fit, the capacity error is raised.
    """

    name = "overlapped"

    def __init__(self, lookahead: int = DEFAULT_LOOKAHEAD, verbose: bool = False):
        if lookahead < 1:
            raise OptionConflictError(f"lookahead must be at least 1, got {lookahead}")
        super().__init__(verbose)
        self.lookahead = lookahead

    def _run(self, tasks: TaskList, cache: BlockCache, report: ExecutionReport) -> None:
        ready: queue.Queue[tuple[bool, object]] = queue.Queue()
        permits = threading.Semaphore(self.lookahead)
        stop = threading.Event()
        lock = threading.Lock()
        in_flight = [0]
        io_time = [0.0]

        def prepare(task: Task) -> list[CacheHandle] | None:
            while not stop.is_set():
                seen = cache.release_count
                try:
                    return cache.acquire_many(task.blocks(), now=task.index)
                except CacheCapacityError:
                    with lock:
                        pending = in_flight[0]
                    if pending == 0 and cache.release_count == seen:
                        raise
                    logger.debug(f"lookahead shrunk to {pending} before task {task.index}")
                    cache.wait_for_release(seen)
            return None

        def io_worker() -> None:
            try:
                for task in tasks:
                    while not permits.acquire(timeout=0.05):
                        if stop.is_set():
                            return
                    t0 = time.perf_counter()
                    handles = prepare(task)
                    io_time[0] += time.perf_counter() - t0
                    if handles is None:
                        return
                    with lock:
                        in_flight[0] += 1
                    ready.put((True, (task, handles)))
            except BaseException as exc:
                ready.put((False, exc))

        worker = threading.Thread(target=io_worker, name="oocutv-io", daemon=True)
        worker.start()
        try:
            for _ in range(len(tasks)):
                t0 = time.perf_counter()
                ok, payload = ready.get()
                report.stall_seconds += time.perf_counter() - t0
                if not ok:
                    raise payload  # type: ignore[misc]
                task, handles = payload  # type: ignore[misc]
                try:
                    self._compute(task, handles, report)
                finally:
                    t0 = time.perf_counter()
                    _release_all(cache, handles)
                    report.io_seconds += time.perf_counter() - t0
                    with lock:
                        in_flight[0] -= 1
                    permits.release()
        finally:
            stop.set()
            worker.join()
            _drain(ready, cache)
        report.io_seconds += io_time[0]

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(lookahead={self.lookahead})"


def _release_all(cache: BlockCache, handles: Iterable[CacheHandle]) -> None:
    for handle in handles:
        if not handle.released:
            cache.release(handle)


def _drain(ready: queue.Queue, cache: BlockCache) -> None:
    """Unpin tasks the I/O thread prepared but the compute side never ran."""
    while True:
        try:
            ok, payload = ready.get_nowait()
        except queue.Empty:
            return
        if ok:
            _release_all(cache, payload[1])


def execute_sequential(tasks: TaskList, cache: BlockCache, verbose: bool = False) -> ExecutionReport:
    return SequentialExecutor(verbose=verbose).execute(tasks, cache)


def execute_overlapped(
    tasks: TaskList, cache: BlockCache, lookahead: int = DEFAULT_LOOKAHEAD, verbose: bool = False
) -> ExecutionReport:
    return OverlappedExecutor(lookahead, verbose=verbose).execute(tasks, cache)


def make_executor(overlap: bool = False, lookahead: int = DEFAULT_LOOKAHEAD, verbose: bool = False) -> BaseExecutor:
    if overlap:
        return OverlappedExecutor(lookahead, verbose=verbose)
    return SequentialExecutor(verbose=verbose)
