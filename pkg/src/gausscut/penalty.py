"""Log-sum-exp penalized objective over the constraint image v = B(X).

The solver never sees X itself, only its diagonal and its entries on the
edge set. Off-diagonal constraints use A_e = (e_i e_j^T + e_j e_i^T) / 2, so
<A_e, X> = X_ij.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .graph import CostOperator

MAXKCUT = "maxkcut"
MAXAGREE = "maxagree"


@dataclass
class ConstraintImage:
    diag: np.ndarray
    edge_vals: np.ndarray

    @classmethod
    def identity(cls, n: int, m: int) -> "ConstraintImage":
        return cls(np.ones(n), np.zeros(m))

    @classmethod
    def of_dense(cls, X: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> "ConstraintImage":
        return cls(np.diag(X).copy(), X[rows, cols].copy())

    def copy(self) -> "ConstraintImage":
        return ConstraintImage(self.diag.copy(), self.edge_vals.copy())


@dataclass(frozen=True)
class PenaltyConfig:
    kind: str
    k: int | None
    beta: float
    M: float
    alpha: float
    eps: float
    eta: float
    gap_scale: float
    d1: int
    d2: int

    @classmethod
    def for_maxkcut(cls, cost: CostOperator, k: int, eps: float, eta: float = 0.5) -> "PenaltyConfig":
        if k < 2:
            raise ValueError("k must be >= 2")
        _check(eps, eta)
        n, m = cost.n, cost.m
        tr = cost.trace
        return cls(MAXKCUT, k, 6.0 * tr, 6.0 * math.log(2 * n + m) / eps, float(n), eps, eta, tr, n, m)

    @classmethod
    def for_maxagree(cls, cost: CostOperator, delta: float, eps: float, eta: float = 0.5) -> "PenaltyConfig":
        _check(eps, eta)
        n, m = cost.n, cost.m
        return cls(MAXAGREE, None, 4.0 * delta, 4.0 * math.log(2 * n + m) / eps, float(n), eps, eta, delta, n, m)

    @property
    def lower_bound(self) -> float:
        """Edge-entry lower bound: -1/(k-1) for k-cut, 0 for Max-Agree."""
        return -1.0 / (self.k - 1) if self.kind == MAXKCUT else 0.0

    @property
    def curvature(self) -> float:
        """Upper bound beta * M * n^2 on the curvature constant."""
        return self.beta * self.M * self.d1 ** 2

    @property
    def tolerance(self) -> float:
        """Stopping threshold on the Frank-Wolfe gap."""
        return self.eps * self.gap_scale

    @property
    def gradient_norm_bound(self) -> float:
        """Spectral-norm bound gap_scale + beta * sqrt(2|E| + n) on the gradient."""
        return self.gap_scale + self.beta * math.sqrt(2 * self.d2 + self.d1)

    def iteration_bound(self) -> int:
        """Outer iterations after which the iterate is tolerance-optimal."""
        if self.gap_scale <= 0:
            return 0
        return max(0, math.ceil(2.0 * self.curvature * (1.0 + self.eta) / self.tolerance) - 2)

    def reference_iterations(self) -> float:
        """Closed-form T(n, eps): 144 (k-cut) or 64 (Max-Agree) * log(2n+|E|) n^2 / eps^2."""
        c = 144.0 if self.kind == MAXKCUT else 64.0
        return c * math.log(2 * self.d1 + self.d2) * self.d1 ** 2 / self.eps ** 2

    def default_failure_prob(self) -> float:
        return min(0.5, self.eps / self.reference_iterations())


def _check(eps, eta):
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")


def _finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite input to penalty")


def phi_m(u: np.ndarray, v: np.ndarray, M: float) -> float:
    """(1/M) log(sum e^{M u} + sum e^{-M u} + sum e^{M v}), overflow-safe."""
    if not M > 0:
        raise ValueError("M must be positive")
    u = np.ascontiguousarray(u, dtype=np.float64)
    v = np.ascontiguousarray(v, dtype=np.float64)
    _finite(u, v)
    return float(_kernels.lse_penalty(u, v, float(M))[0])


def phi_m_gradient(u: np.ndarray, v: np.ndarray, M: float) -> tuple[np.ndarray, np.ndarray]:
    if not M > 0:
        raise ValueError("M must be positive")
    u = np.ascontiguousarray(u, dtype=np.float64)
    v = np.ascontiguousarray(v, dtype=np.float64)
    _finite(u, v)
    _, du, dv = _kernels.lse_penalty(u, v, float(M))
    return du, dv


def residuals(v: ConstraintImage, cfg: PenaltyConfig) -> tuple[np.ndarray, np.ndarray]:
    if v.diag.shape[0] != cfg.d1 or v.edge_vals.shape[0] != cfg.d2:
        raise ValueError("constraint image does not match the configuration")
    return v.diag - 1.0, cfg.lower_bound - v.edge_vals


def infeasibility(v: ConstraintImage, cfg: PenaltyConfig) -> float:
    """max(||diag - 1||_inf, max(0, largest edge violation))."""
    u, w = residuals(v, cfg)
    worst = float(np.max(np.abs(u))) if u.size else 0.0
    if w.size:
        worst = max(worst, float(np.max(w)))
    return max(worst, 0.0)


def objective_value(v: ConstraintImage, cfg: PenaltyConfig, cost: CostOperator) -> float:
    u, w = residuals(v, cfg)
    lin = cost.inner(v.diag, v.edge_vals)
    if cfg.beta == 0:
        return lin
    return lin - cfg.beta * phi_m(u, w, cfg.M)


@dataclass(frozen=True, eq=False)
class GradientOperator:
    """Sparse symmetric C - beta * B^*(grad phi), supported on diagonal and E.

    ``penalty_diag`` and ``penalty_edges`` hold beta*du and -beta*dw; the
    assembled entries are ``diag = C_ii - penalty_diag`` and
    ``vals = c_e - penalty_edges / 2``.
    """

    cost: CostOperator
    penalty_diag: np.ndarray
    penalty_edges: np.ndarray
    diag: np.ndarray = field(init=False)
    vals: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "diag", self.cost.diag - self.penalty_diag)
        object.__setattr__(self, "vals", self.cost.vals - 0.5 * self.penalty_edges)

    @property
    def n(self) -> int:
        return self.cost.n

    @property
    def rows(self) -> np.ndarray:
        return self.cost.rows

    @property
    def cols(self) -> np.ndarray:
        return self.cost.cols

    def matvec(self, x: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        if out is None:
            out = np.empty(self.n)
        return _kernels.sym_matvec(self.diag, self.rows, self.cols, self.vals, np.ascontiguousarray(x, dtype=np.float64), out)

    def inner(self, diag_vals: np.ndarray, edge_vals: np.ndarray) -> float:
        """<grad g, Y> for Y with the given diagonal and edge entries."""
        return float(self.diag @ diag_vals + 2.0 * (self.vals @ edge_vals))

    def dense(self) -> np.ndarray:
        A = np.diag(self.diag)
        A[self.rows, self.cols] += self.vals
        A[self.cols, self.rows] += self.vals
        return A


def gradient_operator(v: ConstraintImage, cfg: PenaltyConfig, cost: CostOperator) -> GradientOperator:
    u, w = residuals(v, cfg)
    if cfg.beta == 0:
        return GradientOperator(cost, np.zeros(cfg.d1), np.zeros(cfg.d2))
    du, dw = phi_m_gradient(u, w, cfg.M)
    return GradientOperator(cost, cfg.beta * du, -cfg.beta * dw)
