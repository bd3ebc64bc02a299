"""Instrumented allocation counter for the solver's working arrays.

The solver allocates every persistent array through a :class:`WordLedger`,
which counts 8-byte words currently live and the high-water mark. Dense n x n
objects are refused unless the ledger was opened in shadow mode.
"""
from __future__ import annotations

import numpy as np


class MemoryBudgetExceeded(RuntimeError):
    pass


class WordLedger:
    def __init__(self, n: int, budget_words: float | None = None, allow_dense: bool = False):
        self.n = n
        self.budget_words = budget_words
        self.allow_dense = allow_dense
        self.live = 0
        self.peak = 0
        self._sizes: dict[int, int] = {}

    def alloc(self, shape, dtype=np.float64, fill=None, bounded_rows: bool = False) -> np.ndarray:
        """Allocate and count an array.

        ``bounded_rows`` marks a 2-D array whose row count does not grow
        with n (the Lanczos basis, the sample block), which may still look
        n x n on small graphs.
        """
        shape = tuple(np.atleast_1d(shape).tolist()) if not isinstance(shape, tuple) else shape
        if not self.allow_dense and not bounded_rows and len(shape) == 2 and shape[0] >= self.n and shape[1] >= self.n and self.n > 1:
            raise MemoryBudgetExceeded(f"dense {shape} allocation outside shadow mode")
        arr = np.empty(shape, dtype=dtype) if fill is None else np.full(shape, fill, dtype=dtype)
        words = -(-arr.nbytes // 8)
        self.live += words
        self.peak = max(self.peak, self.live)
        self._sizes[id(arr)] = words
        if self.budget_words is not None and self.peak > self.budget_words:
            raise MemoryBudgetExceeded(f"peak {self.peak} words exceeds budget {self.budget_words:.0f}")
        return arr

    def zeros(self, shape, dtype=np.float64) -> np.ndarray:
        return self.alloc(shape, dtype, fill=0)

    def track(self, arr: np.ndarray) -> np.ndarray:
        """Count an array created elsewhere (e.g. by a library call)."""
        words = -(-arr.nbytes // 8)
        self.live += words
        self.peak = max(self.peak, self.live)
        self._sizes[id(arr)] = self._sizes.get(id(arr), 0) + words
        if self.budget_words is not None and self.peak > self.budget_words:
            raise MemoryBudgetExceeded(f"peak {self.peak} words exceeds budget {self.budget_words:.0f}")
        return arr

    def free(self, *arrays: np.ndarray) -> None:
        for arr in arrays:
            self.live -= self._sizes.pop(id(arr), 0)
