"""Timing, console and logging helpers."""

import logging
import math
import time

from rich.console import Console
from rich.logging import RichHandler

console = Console(stderr=True)

logger = logging.getLogger("oocutv")


def setup_logging(verbose: bool = False) -> None:
    """
    Attach a rich handler to the package logger.

    Args:
        verbose: Log at DEBUG level instead of INFO
    """
    level = logging.DEBUG if verbose else logging.INFO
    if not any(isinstance(h, RichHandler) for h in logger.handlers):
        logger.addHandler(RichHandler(console=console, show_path=False, rich_tracebacks=True))
    logger.setLevel(level)
    logger.propagate = False


def ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def extent(total: int, nb: int, index: int) -> int:
    """Rows (or columns) of block `index` when `total` is cut into blocks of `nb`."""
    return min(nb, total - index * nb)


def fmt_float(value: float) -> str:
    if math.isnan(value):
        return "nan"
    return f"{value:.6e}"


class Timer:
    """Context manager for timing code execution."""

    def __init__(self, message: str | None = None):
        self.message = message
        self.elapsed = 0.0

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        self.end = time.perf_counter()
        self.elapsed = self.end - self.start
        if self.message:
            logger.debug(f"{self.message} took {self.elapsed:.2f} seconds")
