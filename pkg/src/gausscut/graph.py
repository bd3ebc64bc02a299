"""Graph inputs: GSet parsing, signed graphs, and the sparse cost operators."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np

from . import _kernels


class GraphFormatError(ValueError):
    """Raised when a graph file or stream cannot be parsed."""


def _canonical_arrays(n, edges, *, what="edge"):
    rows, cols, ws = [], [], []
    seen = set()
    for i, j, w in edges:
        i, j, w = int(i), int(j), float(w)
        if i == j:
            raise ValueError(f"self loop at vertex {i}")
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"{what} ({i}, {j}) out of range for n={n}")
        if not math.isfinite(w):
            raise ValueError(f"{what} ({i}, {j}) has non-finite weight {w}")
        if i > j:
            i, j = j, i
        if (i, j) in seen:
            raise ValueError(f"duplicate {what} ({i}, {j})")
        seen.add((i, j))
        rows.append(i)
        cols.append(j)
        ws.append(w)
    return (
        np.asarray(rows, dtype=np.int64),
        np.asarray(cols, dtype=np.int64),
        np.asarray(ws, dtype=np.float64),
    )


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Undirected graph on ``n`` vertices with canonical edges ``i < j``."""

    n: int
    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("graph needs at least one vertex")
        if not (self.rows.shape == self.cols.shape == self.weights.shape):
            raise ValueError("edge arrays must have equal length")
        if self.rows.size:
            if np.any(self.rows >= self.cols):
                raise ValueError("edges must satisfy i < j")
            if self.rows.min() < 0 or self.cols.max() >= self.n:
                raise ValueError("vertex index out of range")
            if not np.all(np.isfinite(self.weights)):
                raise ValueError("non-finite edge weight")
            keys = self.rows * self.n + self.cols
            if np.unique(keys).size != keys.size:
                raise ValueError("duplicate edge")

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int, float]]) -> "WeightedGraph":
        rows, cols, ws = _canonical_arrays(n, edges)
        return cls(n, rows, cols, ws)

    @property
    def m(self) -> int:
        return int(self.rows.size)

    @property
    def edges(self) -> list[tuple[int, int, float]]:
        return [(int(i), int(j), float(w)) for i, j, w in zip(self.rows, self.cols, self.weights)]

    def weighted_degree(self) -> np.ndarray:
        deg = np.bincount(self.rows, weights=self.weights, minlength=self.n).astype(np.float64)
        return deg + np.bincount(self.cols, weights=self.weights, minlength=self.n)

    def laplacian_dense(self) -> np.ndarray:
        """Dense Laplacian. Test and audit use only."""
        L = np.diag(self.weighted_degree())
        L[self.rows, self.cols] -= self.weights
        L[self.cols, self.rows] -= self.weights
        return L

    def neighbor_sets(self) -> list[set[int]]:
        nbrs: list[set[int]] = [set() for _ in range(self.n)]
        for i, j in zip(self.rows.tolist(), self.cols.tolist()):
            nbrs[i].add(j)
            nbrs[j].add(i)
        return nbrs


@dataclass(frozen=True, eq=False)
class SignedGraph:
    """Similar (plus) and dissimilar (minus) edge sets with positive weights."""

    n: int
    plus: WeightedGraph
    minus: WeightedGraph

    def __post_init__(self):
        if self.plus.n != self.n or self.minus.n != self.n:
            raise ValueError("plus/minus graphs must share the vertex count")
        for part, name in ((self.plus, "plus"), (self.minus, "minus")):
            if part.m and np.any(part.weights < 0):
                raise ValueError(f"{name} edge weights must be nonnegative")
        kp = set((self.plus.rows * self.n + self.plus.cols).tolist())
        km = set((self.minus.rows * self.n + self.minus.cols).tolist())
        if kp & km:
            raise ValueError("plus and minus edge sets overlap")

    @classmethod
    def from_edges(cls, n, plus_edges, minus_edges) -> "SignedGraph":
        return cls(n, WeightedGraph.from_edges(n, plus_edges), WeightedGraph.from_edges(n, minus_edges))

    @property
    def m(self) -> int:
        return self.plus.m + self.minus.m

    def union(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Edge arrays of E = E+ then E-, with signed weights (+w, -w)."""
        rows = np.concatenate([self.plus.rows, self.minus.rows])
        cols = np.concatenate([self.plus.cols, self.minus.cols])
        sw = np.concatenate([self.plus.weights, -self.minus.weights])
        return rows, cols, sw


@dataclass(frozen=True, eq=False)
class CostOperator:
    """Symmetric matrix supported on the diagonal and one entry per edge.

    ``vals[e]`` is the (i, j) entry for edge e; the (j, i) entry is implied.
    Edge order matches the constraint edge order of the problem.
    """

    n: int
    diag: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    trace: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "trace", float(np.sum(self.diag)))

    @property
    def m(self) -> int:
        return int(self.rows.size)

    def matvec(self, x: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        if out is None:
            out = np.empty(self.n)
        return _kernels.sym_matvec(self.diag, self.rows, self.cols, self.vals, np.ascontiguousarray(x, dtype=np.float64), out)

    def inner(self, diag_vals: np.ndarray, edge_vals: np.ndarray) -> float:
        """<C, X> for any X whose diagonal and edge entries are given."""
        return float(self.diag @ diag_vals + 2.0 * (self.vals @ edge_vals))

    def dense(self) -> np.ndarray:
        A = np.diag(self.diag.astype(float))
        A[self.rows, self.cols] += self.vals
        A[self.cols, self.rows] += self.vals
        return A


def build_cost_maxkcut(g: WeightedGraph, k: int) -> CostOperator:
    """Scaled Laplacian ((k-1)/2k) L_G."""
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    s = (k - 1) / (2 * k)
    return CostOperator(g.n, s * g.weighted_degree(), g.rows, g.cols, -s * g.weights)


def build_cost_maxagree(sg: SignedGraph) -> tuple[CostOperator, float]:
    """Cost L_{G-} + W+ and the scale Delta = Tr(L_{G-}) + sum of plus weights."""
    rows, cols, sw = sg.union()
    diag = sg.minus.weighted_degree()
    cost = CostOperator(sg.n, diag, rows, cols, sw)
    delta = float(diag.sum() + sg.plus.weights.sum())
    return cost, delta


def jaccard_signed_graph(g: WeightedGraph, delta: float = 0.05) -> SignedGraph:
    """Label each edge by the log-ratio of its endpoints' neighbourhood overlap.

    J = |N(i) & N(j)| / |N(i) | N(j)| over open neighbourhoods (weights
    ignored), S = log((1 - J + delta) / (1 + J - delta)); S < 0 marks a
    dissimilar edge of weight -S, otherwise a similar edge of weight S.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    nbrs = g.neighbor_sets()
    plus, minus = [], []
    for i, j in zip(g.rows.tolist(), g.cols.tolist()):
        a, b = nbrs[i], nbrs[j]
        jac = len(a & b) / len(a | b)
        s = math.log((1.0 - jac + delta) / (1.0 + jac - delta))
        if s < 0:
            minus.append((i, j, -s))
        else:
            plus.append((i, j, s))
    return SignedGraph.from_edges(g.n, plus, minus)


# ---------------------------------------------------------------------------
# text formats
# ---------------------------------------------------------------------------

def parse_gset(text: str | TextIO) -> WeightedGraph:
    """Parse ``n m`` followed by ``m`` lines ``i j w`` (1-indexed)."""
    lines = text.splitlines() if isinstance(text, str) else text.read().splitlines()
    body = [(no, ln.split()) for no, ln in enumerate(lines, start=1) if ln.strip()]
    if not body:
        raise GraphFormatError("empty input")
    no, head = body[0]
    try:
        if len(head) != 2:
            raise ValueError
        n, m = int(head[0]), int(head[1])
    except ValueError:
        raise GraphFormatError(f"line {no}: expected header 'n m'") from None
    if n < 1 or m < 0:
        raise GraphFormatError(f"line {no}: header needs n >= 1 and m >= 0")
    if len(body) - 1 != m:
        raise GraphFormatError(f"header declares {m} edges but {len(body) - 1} edge lines follow")
    rows = np.empty(m, dtype=np.int64)
    cols = np.empty(m, dtype=np.int64)
    ws = np.empty(m, dtype=np.float64)
    seen = set()
    for e, (no, parts) in enumerate(body[1:]):
        try:
            if len(parts) != 3:
                raise ValueError
            i, j, w = int(parts[0]) - 1, int(parts[1]) - 1, float(parts[2])
        except ValueError:
            raise GraphFormatError(f"line {no}: expected 'i j w'") from None
        if not (0 <= i < n and 0 <= j < n):
            raise GraphFormatError(f"line {no}: vertex index out of range 1..{n}")
        if i == j:
            raise GraphFormatError(f"line {no}: self loop at vertex {i + 1}")
        if not math.isfinite(w):
            raise GraphFormatError(f"line {no}: non-finite weight")
        if i > j:
            i, j = j, i
        if (i, j) in seen:
            raise GraphFormatError(f"line {no}: duplicate edge ({i + 1}, {j + 1})")
        seen.add((i, j))
        rows[e], cols[e], ws[e] = i, j, w
    return WeightedGraph(n, rows, cols, ws)


def _fmt_weight(w: float) -> str:
    return str(int(w)) if float(w).is_integer() else repr(float(w))


def serialize_gset(g: WeightedGraph) -> str:
    out = [f"{g.n} {g.m}"]
    out += [f"{i + 1} {j + 1} {_fmt_weight(w)}" for i, j, w in g.edges]
    return "\n".join(out) + "\n"


def read_gset(path) -> WeightedGraph:
    with open(path, encoding="utf-8") as fh:
        return parse_gset(fh)


def signed_to_jsonl(sg: SignedGraph) -> str:
    """One JSON object {i, j, sign, w} per edge, 0-indexed; first line carries n."""
    out = [json.dumps({"n": sg.n})]
    for sign, part in (("+", sg.plus), ("-", sg.minus)):
        out += [json.dumps({"i": i, "j": j, "sign": sign, "w": w}) for i, j, w in part.edges]
    return "\n".join(out) + "\n"


def signed_from_jsonl(text: str | TextIO) -> SignedGraph:
    lines = text.splitlines() if isinstance(text, str) else text.read().splitlines()
    n = None
    plus, minus = [], []
    for no, ln in enumerate(lines, start=1):
        if not ln.strip():
            continue
        try:
            rec = json.loads(ln)
        except json.JSONDecodeError as exc:
            raise GraphFormatError(f"line {no}: {exc.msg}") from None
        if "n" in rec and "i" not in rec:
            n = int(rec["n"])
            continue
        try:
            edge = (int(rec["i"]), int(rec["j"]), float(rec["w"]))
            sign = rec["sign"]
        except (KeyError, TypeError, ValueError):
            raise GraphFormatError(f"line {no}: expected keys i, j, sign, w") from None
        if sign == "+":
            plus.append(edge)
        elif sign == "-":
            minus.append(edge)
        else:
            raise GraphFormatError(f"line {no}: sign must be '+' or '-'")
    if n is None:
        idx = [max(e[0], e[1]) for e in plus + minus]
        n = max(idx) + 1 if idx else 1
    try:
        return SignedGraph.from_edges(n, plus, minus)
    except ValueError as exc:
        raise GraphFormatError(str(exc)) from None
