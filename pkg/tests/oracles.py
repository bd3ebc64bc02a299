"""Dense reference solvers for small instances (test use only)."""
import cvxpy as cp
import numpy as np


def _solve(prob):
    for solver in ("CLARABEL", "SCS"):
        try:
            prob.solve(solver=solver)
        except cp.error.SolverError:
            continue
        if prob.status in ("optimal", "optimal_inaccurate"):
            return prob.value
    raise RuntimeError(f"SDP oracle failed: {prob.status}")


def sdp_relaxation(cost, lower_bound):
    """max <C, X> s.t. diag X = 1, X_ij >= bound on edges, X PSD."""
    n = cost.n
    X = cp.Variable((n, n), symmetric=True)
    cons = [X >> 0, cp.diag(X) == 1]
    if cost.m:
        cons.append(X[cost.rows, cost.cols] >= lower_bound)
    val = _solve(cp.Problem(cp.Maximize(cp.trace(cost.dense() @ X)), cons))
    return float(val), X.value


def penalized_optimum(cost, cfg):
    """max <C, X> - beta phi_M(B(X)) over X PSD with Tr X <= alpha."""
    n = cost.n
    X = cp.Variable((n, n), symmetric=True)
    u = cp.diag(X) - 1
    parts = [u, -u]
    if cost.m:
        parts.append(cfg.lower_bound - X[cost.rows, cost.cols])
    phi = cp.log_sum_exp(cfg.M * cp.hstack(parts)) / cfg.M
    obj = cp.trace(cost.dense() @ X) - cfg.beta * phi
    val = _solve(cp.Problem(cp.Maximize(obj), [X >> 0, cp.trace(X) <= cfg.alpha]))
    return float(val), X.value
