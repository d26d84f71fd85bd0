"""
Process-pool helpers for embarrassingly parallel sweep cells.

Cells are mapped in input order so results never depend on scheduling.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, List, Sequence, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def resolve_threads(threads: int) -> int:
    """0 means all available cores."""
    if threads < 0:
        raise ValueError("threads must be >= 0")
    return threads or os.cpu_count() or 1


def map_cells(func: Callable[[T], R], cells: Sequence[T], threads: int = 1) -> List[R]:
    """
    Apply a picklable function to every cell.

    Runs serially for one worker or a single cell; otherwise in a
    ProcessPoolExecutor with chunks sized to give each worker a few batches.
    """
    workers = min(resolve_threads(threads), len(cells))
    if workers <= 1:
        return [func(cell) for cell in cells]

    chunksize = max(1, len(cells) // (4 * workers))
    logger.info("evaluating %d cells on %d workers", len(cells), workers)
    with ProcessPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(func, cells, chunksize=chunksize))
