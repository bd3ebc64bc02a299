"""Frank-Wolfe with Gaussian sampling over {X >= 0, Tr X <= alpha}.

The iterate X_t is represented by k samples z ~ N(0, X_t) plus the tracked
constraint image v_t = B(X_t). Each step solves the linear maximization
oracle with a matrix-free Lanczos run on the sparse gradient operator.
"""
from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .graph import CostOperator
from .memory import WordLedger
from .penalty import ConstraintImage, PenaltyConfig, infeasibility

log = logging.getLogger(__name__)

DEFAULT_MAX_BASIS = 64


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator; every random draw in a run flows from it."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))


@dataclass
class SampleSet:
    z: np.ndarray  # (k, n)

    @property
    def k(self) -> int:
        return self.z.shape[0]

    @property
    def n(self) -> int:
        return self.z.shape[1]


@dataclass
class LmoResult:
    h: np.ndarray
    lam: float
    q: ConstraintImage
    lanczos_steps: int = 0


@dataclass
class SolverStats:
    iterations: int = 0
    converged: bool = False
    final_gap: float = math.inf
    infeasibility: float = math.inf
    objective: float = math.nan
    lanczos_iters: int = 0
    seed: object = None
    trace: list = field(default_factory=list)  # (t, objective, gap), downsampled
    peak_words: int = 0
    wall_seconds: float = 0.0
    shadow_max_dev: float | None = None
    shadow_X: np.ndarray | None = None
    shadow_devs: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# Lanczos
# ---------------------------------------------------------------------------

def lanczos_steps(n: int, rho: float, p: float) -> int:
    """Iterations 1/2 + log(n/p^2)/sqrt(rho), rounded up, capped at n."""
    if not 0 < rho <= 1:
        raise ValueError("rho must lie in (0, 1]")
    if not 0 < p <= 0.5:
        raise ValueError("p must lie in (0, 1/2]")
    q = math.ceil(0.5 + math.log(n / p ** 2) / math.sqrt(rho))
    return max(1, min(n, q))


def lanczos_step_cap(cfg: PenaltyConfig, p: float) -> int:
    """Upper bound N^u on Lanczos iterations over the whole run."""
    n = cfg.d1
    norm_factor = cfg.gradient_norm_bound / cfg.gap_scale if cfg.gap_scale > 0 else 1.0
    nu = 0.5 + math.sqrt((1 + cfg.eta) / (4 * cfg.eta)) * math.sqrt(n * norm_factor / cfg.eps) * math.log(n / p ** 2)
    return max(1, min(n, math.ceil(nu)))


def gershgorin_bound(op) -> float:
    """Cheap upper bound on the spectral norm of a sparse symmetric operator."""
    return float(_kernels.gershgorin(_f64(op.diag), op.rows, op.cols, _f64(op.vals)))


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def lanczos_max_eigvec(op, rho: float, p: float, rng, *, max_basis: int | None = DEFAULT_MAX_BASIS,
                       steps: int | None = None, basis: np.ndarray | None = None):
    """Approximate top eigenpair of a sparse symmetric operator.

    Returns ``(lam, h, total_steps)`` with ``h`` a unit vector and ``lam`` its
    Rayleigh quotient. The Krylov basis is fully reorthogonalized; when more
    steps are required than ``max_basis`` vectors fit, the run restarts from
    the current Ritz vector.
    """
    rng = make_rng(rng)
    n = op.n
    need = lanczos_steps(n, rho, p) if steps is None else max(1, min(n, steps))
    if basis is None:
        basis = np.empty((min(need, max_basis or n, n), n))
    cap = basis.shape[0]
    h = np.empty(n)
    lam, used = _kernels.lanczos_top(_f64(op.diag), op.rows, op.cols, _f64(op.vals), need, basis,
                                     np.empty(cap), np.empty(cap), rng, h)
    return float(lam), h, int(used)


def lmo(op, delta: float, p: float, alpha: float, rng, *, norm_bound: float | None = None,
        max_basis: int | None = DEFAULT_MAX_BASIS, basis: np.ndarray | None = None,
        out: ConstraintImage | None = None, step_cap: int | None = None) -> LmoResult:
    """Unit h with alpha * h'Jh within ``delta`` of the best trace-ball value.

    ``delta`` is converted to a Lanczos accuracy through
    delta = alpha * (rho / 8) * ||J||, using ``norm_bound`` for ||J||.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    n = op.n
    if norm_bound is None:
        norm_bound = gershgorin_bound(op)
    rho = 1.0 if norm_bound <= 0 else min(1.0, 8.0 * delta / (alpha * norm_bound))
    steps = lanczos_steps(n, rho, p)
    if step_cap is not None:
        steps = min(steps, step_cap)
    lam, h, used = lanczos_max_eigvec(op, rho, p, rng, max_basis=max_basis, steps=steps, basis=basis)
    if out is None:
        out = ConstraintImage(np.empty(n), np.empty(op.rows.shape[0]))
    if lam >= 0:
        _kernels.rank_one_image(h, op.rows, op.cols, float(alpha), out.diag, out.edge_vals)
    else:
        h = np.zeros(n)
        out.diag[:] = 0.0
        out.edge_vals[:] = 0.0
    return LmoResult(h, lam, out, used)


def update_variable(z: SampleSet, v: ConstraintImage, h: np.ndarray, q: ConstraintImage,
                    gamma: float, rng, alpha: float) -> tuple[SampleSet, ConstraintImage]:
    """z <- sqrt(1-gamma) z + sqrt(gamma*alpha) zeta h, v <- (1-gamma) v + gamma q, in place.

    Each sample draws its own zeta ~ N(0, 1).
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    rng = make_rng(rng)
    zeta = rng.standard_normal(z.k)
    z.z *= math.sqrt(1.0 - gamma)
    z.z += math.sqrt(gamma * alpha) * zeta[:, None] * h[None, :]
    v.diag *= 1.0 - gamma
    v.diag += gamma * q.diag
    v.edge_vals *= 1.0 - gamma
    v.edge_vals += gamma * q.edge_vals
    return z, v


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return {"__array__": obj.tolist(), "dtype": str(obj.dtype)}
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _from_jsonable(obj):
    if isinstance(obj, dict):
        if "__array__" in obj:
            return np.asarray(obj["__array__"], dtype=obj["dtype"])
        return {k: _from_jsonable(v) for k, v in obj.items()}
    return obj


@dataclass
class Checkpoint:
    t: int
    v: ConstraintImage
    z: np.ndarray
    rng_state: dict
    lanczos_iters: int = 0

    def save(self, path) -> None:
        rec = {
            "t": self.t,
            "v": {"diag": self.v.diag.tolist(), "edge_vals": self.v.edge_vals.tolist()},
            "z": self.z.tolist(),
            "rng_state": _jsonable(self.rng_state),
            "lanczos_iters": self.lanczos_iters,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(rec, fh)

    @classmethod
    def load(cls, path) -> "Checkpoint":
        with open(path, encoding="utf-8") as fh:
            rec = json.load(fh)
        v = ConstraintImage(np.asarray(rec["v"]["diag"], float), np.asarray(rec["v"]["edge_vals"], float))
        return cls(rec["t"], v, np.asarray(rec["z"], float), _from_jsonable(rec["rng_state"]),
                   rec.get("lanczos_iters", 0))


# ---------------------------------------------------------------------------
# solver
# ---------------------------------------------------------------------------

def fw_gaussian(cost: CostOperator, cfg: PenaltyConfig, k_samples: int, *, max_iters: int | None = None,
                seed=0, shadow: bool = False, p: float | None = None, max_basis: int = DEFAULT_MAX_BASIS,
                ledger: WordLedger | None = None, trace_every: int = 100, resume: Checkpoint | None = None,
                checkpoint_path=None, checkpoint_every: int = 0, norm_bound: str = "gershgorin",
                ) -> tuple[SampleSet, ConstraintImage, SolverStats]:
    """Run Gaussian-sampling Frank-Wolfe from X_0 = I until the gap closes.

    Stops once <q_t - v_t, grad g(v_t)> <= eps * gap_scale, or after
    ``max_iters`` updates (then ``stats.converged`` is False). In shadow mode
    the dense iterate X_t is carried alongside for verification.
    """
    t0 = time.perf_counter()
    n, m = cost.n, cost.m
    if (cfg.d1, cfg.d2) != (n, m):
        raise ValueError("configuration does not match the cost operator")
    if k_samples < 1:
        raise ValueError("need at least one sample")
    rng = make_rng(seed)
    if p is None:
        p = cfg.default_failure_prob()
    if max_iters is None:
        max_iters = cfg.iteration_bound()
    if norm_bound not in ("gershgorin", "theory"):
        raise ValueError("norm_bound must be 'gershgorin' or 'theory'")
    ledger = ledger if ledger is not None else WordLedger(n, allow_dense=shadow)

    step_cap = lanczos_step_cap(cfg, p)
    cap = min(step_cap, max_basis, n)
    basis = ledger.alloc((cap, n), bounded_rows=True)
    ledger.alloc(3 * n)  # start, restart and matvec vectors inside Lanczos

    z = SampleSet(ledger.alloc((k_samples, n), bounded_rows=True))
    v = ConstraintImage(ledger.alloc(n), ledger.alloc(m))
    q = ConstraintImage(ledger.alloc(n), ledger.alloc(m))
    grad_diag = ledger.alloc(n)
    grad_vals = ledger.alloc(m)
    # residuals and penalty weights inside the step kernel
    ledger.alloc(2 * (n + m))

    if resume is not None:
        t = resume.t
        v.diag[:] = resume.v.diag
        v.edge_vals[:] = resume.v.edge_vals
        z.z[:] = resume.z
        rng.bit_generator.state = resume.rng_state
        lanczos_total = resume.lanczos_iters
    else:
        t = 0
        v.diag[:] = 1.0
        v.edge_vals[:] = 0.0
        z.z[:] = rng.standard_normal((k_samples, n))
        lanczos_total = 0

    X = None
    max_dev = None
    if shadow:
        if resume is not None:
            raise ValueError("shadow mode cannot resume from a checkpoint")
        X = ledger.alloc((n, n))
        X[:] = np.eye(n)
        max_dev = 0.0

    stats = SolverStats(seed=seed if not isinstance(seed, np.random.Generator) else None)
    theory = cfg.gradient_norm_bound if norm_bound == "theory" else 0.0
    h = ledger.alloc(n)
    ta = ledger.alloc(cap)
    tb = ledger.alloc(cap)
    # single steps when something must happen after every update
    chunk = 1 if X is not None else math.gcd(trace_every or 0, checkpoint_every or 0) or 1000
    args = (_f64(cost.diag), cost.rows, cost.cols, _f64(cost.vals), float(cfg.lower_bound), float(cfg.beta),
            float(cfg.M), float(cfg.alpha), 0.5 * cfg.eta * cfg.curvature, float(p), int(step_cap),
            float(cfg.tolerance), float(theory), z.z, v.diag, v.edge_vals, q.diag, q.edge_vals,
            grad_diag, grad_vals, h, basis, ta, tb, rng)
    while True:
        t_start = t
        status, t, gap, obj, used, gap0, obj0 = _kernels.fw_steps(*args, t, t + chunk, max_iters)
        lanczos_total += used
        if trace_every and t_start % trace_every == 0:
            stats.trace.append((t_start, float(obj0), float(gap0)))
        if status:
            stats.converged = status == 1
            break
        if X is not None:
            gamma = 2.0 / (t_start + 2)
            X *= 1.0 - gamma
            X += (gamma * cfg.alpha) * np.outer(h, h)
            dev = np.max(np.abs(np.diag(X) - v.diag))
            if m:
                dev = max(dev, np.max(np.abs(X[cost.rows, cost.cols] - v.edge_vals)))
            max_dev = max(max_dev, float(dev))
            stats.shadow_devs.append(float(dev))
        if checkpoint_path and checkpoint_every and t % checkpoint_every == 0:
            Checkpoint(t, v, z.z, rng.bit_generator.state, lanczos_total).save(checkpoint_path)

    stats.iterations = t
    stats.final_gap = float(gap)
    stats.objective = float(obj)
    stats.infeasibility = infeasibility(v, cfg)
    stats.lanczos_iters = lanczos_total
    stats.peak_words = ledger.peak
    stats.wall_seconds = time.perf_counter() - t0
    stats.shadow_max_dev = max_dev
    stats.shadow_X = X
    if not stats.converged:
        log.warning("Frank-Wolfe stopped after %d iterations with gap %.3g > %.3g", t, gap, cfg.tolerance)
    return z, v, stats


def as_operator(A: np.ndarray) -> CostOperator:
    """Wrap a dense symmetric matrix as a sparse operator over its upper triangle."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    r, c = np.triu_indices(n, 1)
    return CostOperator(n, np.diag(A).copy(), r.astype(np.int64), c.astype(np.int64), A[r, c].copy())

