"""Binary-addition-tree enumeration of 0/1 vectors.

Vectors are produced by repeatedly adding (1, 0, ..., 0) to a single vector,
coordinate 1 being the least significant bit. The k-th emitted vector is the
binary encoding of k - 1.
"""

from __future__ import annotations

from typing import Iterator

import numpy as np

MAX_WIDTH = 62


class BatCursor:
    """Resumable, single-consumer BAT stream over ``width``-tuples.

    The first call to :meth:`next` yields the all-zero vector; each later call
    applies one binary addition in place. After (1, ..., 1) it returns None.
    """

    __slots__ = ("width", "_x", "_started", "exhausted")

    def __init__(self, width: int):
        if width < 1:
            raise ValueError("BAT width must be at least 1")
        self.width = width
        self._x = [0] * width
        self._started = False
        self.exhausted = False

    @property
    def current(self) -> tuple[int, ...]:
        return tuple(self._x)

    def next(self) -> tuple[int, ...] | None:
        if self.exhausted:
            return None
        if not self._started:
            self._started = True
            return tuple(self._x)
        x = self._x
        i = 0
        while i < self.width:
            if x[i] == 0:
                x[i] = 1
                return tuple(x)
            x[i] = 0
            i += 1
        # carried past the last coordinate: (1,...,1) was the final vector
        x[:] = [1] * self.width
        self.exhausted = True
        return None

    def __iter__(self) -> Iterator[tuple[int, ...]]:
        while (x := self.next()) is not None:
            yield x


def bat_start(width: int) -> BatCursor:
    return BatCursor(width)


def bat_next(cursor: BatCursor) -> tuple[int, ...] | None:
    return cursor.next()


def bat_vectors(width: int) -> Iterator[tuple[int, ...]]:
    """Iterate all 2**width vectors in BAT order."""
    return iter(BatCursor(width))


def bat_block(width: int, start: int, count: int) -> np.ndarray:
    """Rows ``start .. start+count-1`` (0-based ordinals) of the BAT order.

    Returns a (count, width) uint8 matrix. Row k equals the vector the cursor
    emits at step start + k + 1; this is the batched form used by the estimators.
    """
    if width < 1 or width > MAX_WIDTH:
        raise ValueError(f"BAT width must be in 1..{MAX_WIDTH}")
    total = 1 << width
    if start < 0 or count < 0 or start + count > total:
        raise ValueError("block range outside 0..2**width")
    ordinals = np.arange(start, start + count, dtype=np.uint64)
    shifts = np.arange(width, dtype=np.uint64)
    return ((ordinals[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.uint8)


def bat_blocks(width: int, chunk: int = 1 << 16) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(start ordinal, block)`` pairs covering the whole BAT order."""
    total = 1 << width
    for start in range(0, total, chunk):
        yield start, bat_block(width, start, min(chunk, total - start))
