"""Feasibility repair of Gaussian samples and randomized rounding."""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .fw import SampleSet, make_rng
from .graph import SignedGraph, WeightedGraph
from .penalty import ConstraintImage

BRUTE_FORCE_LIMIT = 10 ** 7


@dataclass
class RepairInfo:
    err: float
    scale: float  # divisor m applied to the shifted samples


def repair_scale(v: ConstraintImage, lower_bound: float) -> RepairInfo:
    """Shift ``err`` and divisor ``m`` used by :func:`repair_samples`.

    err = max(0, largest shortfall of an edge entry below ``lower_bound``) and
    m = max(1, max(diag) + err). Clamping m at 1 keeps edge entries above a
    negative lower bound when every diagonal entry is below one.
    """
    err = 0.0
    if v.edge_vals.size:
        err = max(0.0, float(np.max(lower_bound - v.edge_vals)))
    m = max(1.0, float(np.max(v.diag)) + err)
    return RepairInfo(err, m)


def repair_samples(z: SampleSet | np.ndarray, v: ConstraintImage, lower_bound: float, rng) -> SampleSet:
    """Map samples of N(0, X) to samples of a feasible covariance X^f.

    Each sample gets its own shift y ~ N(0, 1) along the all-ones vector, is
    rescaled by 1/sqrt(m), and receives independent diagonal noise that
    brings every variance up to exactly one.
    """
    rng = make_rng(rng)
    zz = z.z if isinstance(z, SampleSet) else np.asarray(z, dtype=float)
    k, n = zz.shape
    info = repair_scale(v, lower_bound)
    y = rng.standard_normal(k)
    var = np.clip(1.0 - (v.diag + info.err) / info.scale, 0.0, None)
    zeta = rng.standard_normal((k, n)) * np.sqrt(var)[None, :]
    out = (zz + math.sqrt(info.err) * y[:, None]) / math.sqrt(info.scale) + zeta
    return SampleSet(out)


def repaired_covariance(X: np.ndarray, rows: np.ndarray, cols: np.ndarray, lower_bound: float) -> np.ndarray:
    """Dense X^f = (X + err 11^T) / m + Diag(1 - (diag X + err) / m).

    Test and shadow use only. The diagonal is one by construction and is
    written as such; edge entries of X + err 11^T are floored at the bound to
    absorb one-ulp cancellation in X_ij + (bound - X_ij).
    """
    X = np.asarray(X, dtype=float)
    v = ConstraintImage.of_dense(X, rows, cols)
    info = repair_scale(v, lower_bound)
    Xbar = X + info.err
    if rows.size:
        Xbar[rows, cols] = np.maximum(Xbar[rows, cols], lower_bound)
        Xbar[cols, rows] = Xbar[rows, cols]
    Xf = Xbar / info.scale
    np.fill_diagonal(Xf, 1.0)
    return Xf


# ---------------------------------------------------------------------------
# rounding schemes
# ---------------------------------------------------------------------------

def fj_round(z: SampleSet | np.ndarray) -> np.ndarray:
    """Vertex i joins the sample with the largest i-th coordinate (ties to the lowest index)."""
    zz = z.z if isinstance(z, SampleSet) else np.asarray(z)
    return np.argmax(zz, axis=0).astype(np.int64)


def sign_pattern_round(z: SampleSet | np.ndarray) -> np.ndarray:
    """Cluster id sum_j 2^j [z_j(i) >= 0]; s samples give at most 2^s clusters."""
    zz = z.z if isinstance(z, SampleSet) else np.asarray(z)
    bits = (zz >= 0).astype(np.int64)
    return (bits * (1 << np.arange(zz.shape[0], dtype=np.int64))[:, None]).sum(axis=0)


def cut_value(g: WeightedGraph, labels: np.ndarray) -> float:
    labels = np.asarray(labels)
    return float(g.weights @ (labels[g.rows] != labels[g.cols]))


def agree_value(sg: SignedGraph, labels: np.ndarray) -> float:
    """Similar edges kept together plus dissimilar edges split apart."""
    labels = np.asarray(labels)
    p, m = sg.plus, sg.minus
    return float(p.weights @ (labels[p.rows] == labels[p.cols]) + m.weights @ (labels[m.rows] != labels[m.cols]))


def disagree_value(sg: SignedGraph, labels: np.ndarray) -> float:
    labels = np.asarray(labels)
    p, m = sg.plus, sg.minus
    return float(p.weights @ (labels[p.rows] != labels[p.cols]) + m.weights @ (labels[m.rows] == labels[m.cols]))


def best_of(values) -> tuple[int, float]:
    """Index and value of the best replication; ties go to the first."""
    values = np.asarray(values, dtype=float)
    i = int(np.argmax(values))
    return i, float(values[i])


@dataclass
class RoundingResult:
    values: np.ndarray  # value of each replication, in order
    best_index: int
    best_value: float
    best_labels: np.ndarray


def round_groups(z: SampleSet, v: ConstraintImage, lower_bound: float, group: int, rng, scheme: str,
                 evaluate) -> RoundingResult:
    """Repair and round consecutive blocks of ``group`` samples.

    ``scheme`` is "fj" or "sign"; ``evaluate`` maps labels to a value.
    """
    if z.k % group:
        raise ValueError(f"{z.k} samples do not split into groups of {group}")
    rounder = {"fj": fj_round, "sign": sign_pattern_round}[scheme]
    fixed = repair_samples(z, v, lower_bound, rng)
    reps = z.k // group
    values = np.empty(reps)
    labels = []
    for r in range(reps):
        lab = rounder(fixed.z[r * group:(r + 1) * group])
        values[r] = evaluate(lab)
        labels.append(lab)
    i, best = best_of(values)
    return RoundingResult(values, i, best, labels[i])


# ---------------------------------------------------------------------------
# exact optima for small instances
# ---------------------------------------------------------------------------

def brute_force_maxkcut(g: WeightedGraph, k: int) -> tuple[float, np.ndarray]:
    if k < 2:
        raise ValueError("k must be >= 2")
    if k ** (g.n - 1) > BRUTE_FORCE_LIMIT:
        raise ValueError(f"k^(n-1) = {k}^{g.n - 1} exceeds the brute-force limit")
    best, labels = _kernels.brute_maxkcut(g.n, k, g.rows, g.cols, np.ascontiguousarray(g.weights))
    return float(best), np.asarray(labels)


def brute_force_maxagree(sg: SignedGraph) -> tuple[float, np.ndarray]:
    if sg.n > 10:
        raise ValueError("brute-force Max-Agree is limited to n <= 10")
    p, m = sg.plus, sg.minus
    best, labels = _kernels.brute_maxagree(sg.n, p.rows, p.cols, np.ascontiguousarray(p.weights),
                                           m.rows, m.cols, np.ascontiguousarray(m.weights))
    return float(best), np.asarray(labels)


# ---------------------------------------------------------------------------
# approximation constant of the k-sample rounding
# ---------------------------------------------------------------------------

def split_probability(rhos, k: int, samples: int = 10 ** 6, seed: int = 0, chunk: int = 1 << 18) -> np.ndarray:
    """P(argmax a != argmax b) for k i.i.d. pairs with correlation rho.

    One draw of (a, e) is shared by every rho (common random numbers), so
    the estimated curve is smooth in rho.
    """
    rhos = np.atleast_1d(np.asarray(rhos, dtype=float))
    rng = make_rng(seed)
    hits = np.zeros(rhos.size)
    done = 0
    while done < samples:
        c = min(chunk, samples - done)
        a = rng.standard_normal((k, c))
        e = rng.standard_normal((k, c))
        ia = np.argmax(a, axis=0)
        for r, rho in enumerate(rhos):
            b = rho * a + math.sqrt(max(0.0, 1.0 - rho * rho)) * e
            hits[r] += np.count_nonzero(np.argmax(b, axis=0) != ia)
        done += c
    return hits / samples


def _ratio(rhos, probs, k):
    return k * probs / ((k - 1) * (1.0 - rhos))


@dataclass(frozen=True, eq=False)
class AlphaOracle:
    k: int
    grid: np.ndarray
    probs: np.ndarray
    alpha: float

    @property
    def argmin(self) -> float:
        return float(self.grid[np.argmin(_ratio(self.grid, self.probs, self.k))])


@functools.lru_cache(maxsize=None)
def alpha_k_oracle(k: int, grid_points: int = 45, samples: int = 10 ** 6, seed: int = 0) -> AlphaOracle:
    """Monte-Carlo estimate of min over rho of k p(rho) / ((k-1)(1-rho)).

    The grid runs from -1/(k-1) (included) to 0.99, where the ratio is
    already increasing towards its limit at rho = 1. A coarse pass is refined
    around its minimizer with a second grid of the same size.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    lo, hi = -1.0 / (k - 1), 0.99
    coarse = np.linspace(lo, hi, grid_points)
    pc = split_probability(coarse, k, samples, seed)
    i = int(np.argmin(_ratio(coarse, pc, k)))
    step = coarse[1] - coarse[0]
    fine = np.linspace(max(lo, coarse[i] - step), min(hi, coarse[i] + step), grid_points)
    pf = split_probability(fine, k, samples, seed)
    grid = np.concatenate([coarse, fine])
    probs = np.concatenate([pc, pf])
    order = np.argsort(grid, kind="stable")
    grid, probs = grid[order], probs[order]
    return AlphaOracle(k, grid, probs, float(np.min(_ratio(grid, probs, k))))


def alpha_k(k: int) -> float:
    return alpha_k_oracle(k).alpha
