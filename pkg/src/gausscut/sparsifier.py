"""One-pass edge-stream sparsifier with unbiased reweighting.

Edges are kept by priority sampling: edge e draws u_e ~ U(0, 1] once and
gets priority w_e / u_e. The reservoir holds the ``budget`` largest
priorities; with tau the largest priority ever evicted, a kept edge is
emitted with weight max(w_e, tau) = w_e / min(1, w_e / tau), which makes
every Laplacian entry an unbiased estimate of the original.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, TextIO

import numpy as np

from .fw import make_rng
from .graph import GraphFormatError, WeightedGraph


def sparsifier_budget(n: int, tau: float, c: float = 4.0) -> int:
    """ceil(c n log(n) / tau^2) edges, at least one."""
    if not 0 < tau < 1:
        raise ValueError("tau must lie in (0, 1)")
    if c <= 0:
        raise ValueError("budget constant must be positive")
    return max(1, math.ceil(c * n * math.log(max(n, 1)) / tau ** 2))


@dataclass
class SparsifierState:
    n: int
    tau: float
    budget: int
    rng: np.random.Generator
    edges_seen: int = 0
    threshold: float = 0.0  # largest evicted priority
    _live: dict = field(default_factory=dict)  # (i, j) -> [w, u, priority]
    _heap: list = field(default_factory=list)  # (priority, i, j), possibly stale

    @classmethod
    def create(cls, n: int, tau: float, c: float = 4.0, seed=0, budget: int | None = None) -> "SparsifierState":
        if n < 1:
            raise ValueError("n must be positive")
        b = sparsifier_budget(n, tau, c) if budget is None else int(budget)
        if b < 1:
            raise ValueError("budget must be positive")
        return cls(n, tau, b, make_rng(seed))

    @property
    def size(self) -> int:
        return len(self._live)

    @property
    def words(self) -> int:
        """Tracked words: five per live edge plus three per heap entry."""
        return 5 * len(self._live) + 3 * len(self._heap)

    def _pop_min(self):
        while self._heap:
            prio, i, j = heapq.heappop(self._heap)
            rec = self._live.get((i, j))
            if rec is not None and rec[2] == prio:
                del self._live[(i, j)]
                return prio
        raise RuntimeError("reservoir heap is empty")

    def _compact(self):
        if len(self._heap) > 2 * len(self._live) + 16:
            self._heap = [(rec[2], i, j) for (i, j), rec in self._live.items()]
            heapq.heapify(self._heap)


def ingest(state: SparsifierState, edge: tuple[int, int, float]) -> SparsifierState:
    """Offer one edge (0-indexed) to the reservoir."""
    i, j, w = int(edge[0]), int(edge[1]), float(edge[2])
    if i == j:
        raise ValueError(f"self loop at vertex {i}")
    if not (0 <= i < state.n and 0 <= j < state.n):
        raise ValueError(f"edge ({i}, {j}) out of range for n={state.n}")
    if not (math.isfinite(w) and w >= 0):
        raise ValueError(f"edge ({i}, {j}) needs a finite nonnegative weight")
    if i > j:
        i, j = j, i
    state.edges_seen += 1
    rec = state._live.get((i, j))
    if rec is not None:
        # a pair still in the reservoir accumulates under its original draw
        rec[0] += w
        rec[2] = rec[0] / rec[1]
        heapq.heappush(state._heap, (rec[2], i, j))
        state._compact()
        return state
    u = 1.0 - state.rng.random()  # in (0, 1]
    prio = w / u
    if len(state._live) < state.budget:
        state._live[(i, j)] = [w, u, prio]
        heapq.heappush(state._heap, (prio, i, j))
        return state
    smallest = _peek_min(state)
    if prio > smallest:
        state.threshold = max(state.threshold, state._pop_min())
        state._live[(i, j)] = [w, u, prio]
        heapq.heappush(state._heap, (prio, i, j))
    else:
        state.threshold = max(state.threshold, prio)
    state._compact()
    return state


def _peek_min(state: SparsifierState) -> float:
    while state._heap:
        prio, i, j = state._heap[0]
        rec = state._live.get((i, j))
        if rec is not None and rec[2] == prio:
            return prio
        heapq.heappop(state._heap)
    return -math.inf


def ingest_all(state: SparsifierState, edges: Iterable[tuple[int, int, float]]) -> SparsifierState:
    for e in edges:
        ingest(state, e)
    return state


def finalize(state: SparsifierState) -> WeightedGraph:
    """Reservoir as a canonical graph with weights max(w, tau); zero weights are dropped."""
    tau = state.threshold
    items = sorted((i, j, max(rec[0], tau)) for (i, j), rec in state._live.items() if rec[0] > 0)
    if not items:
        empty = np.empty(0, dtype=np.int64)
        return WeightedGraph(state.n, empty, empty.copy(), np.empty(0))
    r, c, w = zip(*items)
    return WeightedGraph(state.n, np.asarray(r, dtype=np.int64), np.asarray(c, dtype=np.int64),
                         np.asarray(w, dtype=np.float64))


def sparsify(g: WeightedGraph, tau: float, c: float = 4.0, seed=0, budget: int | None = None) -> WeightedGraph:
    state = SparsifierState.create(g.n, tau, c, seed, budget)
    return finalize(ingest_all(state, g.edges))


# ---------------------------------------------------------------------------
# audit
# ---------------------------------------------------------------------------

def audit_closeness(g: WeightedGraph, gt: WeightedGraph, trials: int = 1000, rng=0, exact: bool = False) -> float:
    """max |x'L~x / x'Lx - 1| over random Gaussian x, skipping the common null space.

    With ``exact=True`` the maximum is taken over all x through the
    generalized eigenvalues on the range of L (dense; audit use only).
    """
    if g.n != gt.n:
        raise ValueError("graphs must share the vertex count")
    L = g.laplacian_dense()
    Lt = gt.laplacian_dense()
    scale = max(1.0, float(np.abs(L).max()), float(np.abs(Lt).max()))
    if exact:
        w, V = np.linalg.eigh(L)
        keep = w > 1e-10 * scale * g.n
        if np.any(np.abs(V[:, ~keep].T @ Lt @ V[:, ~keep]) > 1e-10 * scale * g.n):
            return math.inf
        if not np.any(keep):
            return 0.0
        P = V[:, keep] / np.sqrt(w[keep])[None, :]
        mu = np.linalg.eigvalsh(P.T @ Lt @ P)
        return float(np.max(np.abs(mu - 1.0)))
    rng = make_rng(rng)
    x = rng.standard_normal((trials, g.n))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    a = np.einsum("ti,ij,tj->t", x, L, x)
    b = np.einsum("ti,ij,tj->t", x, Lt, x)
    tol = 1e-12 * scale * g.n
    null = (np.abs(a) <= tol) & (np.abs(b) <= tol)
    if np.any((np.abs(a) <= tol) & ~null):
        return math.inf
    a, b = a[~null], b[~null]
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(b / a - 1.0)))


# ---------------------------------------------------------------------------
# text stream
# ---------------------------------------------------------------------------

def parse_edge_stream(lines: Iterable[str] | TextIO) -> Iterator[tuple[int, int, float]]:
    """Yield 0-indexed edges from 1-indexed ``i j w`` lines; blank and # lines are skipped."""
    for no, ln in enumerate(lines, start=1):
        s = ln.strip()
        if not s or s.startswith("#"):
            continue
        parts = s.split()
        try:
            if len(parts) != 3:
                raise ValueError
            i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise GraphFormatError(f"line {no}: expected 'i j w'") from None
        if i < 1 or j < 1:
            raise GraphFormatError(f"line {no}: vertices are 1-indexed")
        yield i - 1, j - 1, w
