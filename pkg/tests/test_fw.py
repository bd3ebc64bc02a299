import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from conftest import random_graph
from gausscut.fw import (
    Checkpoint,
    SampleSet,
    as_operator,
    fw_gaussian,
    lanczos_max_eigvec,
    lanczos_step_cap,
    lanczos_steps,
    lmo,
    make_rng,
    update_variable,
)
from gausscut.graph import WeightedGraph, build_cost_maxkcut
from gausscut.memory import MemoryBudgetExceeded, WordLedger
from gausscut.penalty import ConstraintImage, PenaltyConfig, infeasibility, objective_value
from oracles import penalized_optimum, sdp_relaxation


def test_lanczos_steps_formula():
    assert lanczos_steps(1000, 1.0, 0.01) == math.ceil(0.5 + math.log(1000 / 1e-4))
    assert lanczos_steps(1000, 0.01, 0.01) == math.ceil(0.5 + 10 * math.log(1000 / 1e-4))
    assert lanczos_steps(10, 0.001, 0.01) == 10
    with pytest.raises(ValueError):
        lanczos_steps(10, 0.0, 0.01)
    with pytest.raises(ValueError):
        lanczos_steps(10, 0.5, 0.6)


def test_lanczos_diagonal():
    lam, h, _ = lanczos_max_eigvec(as_operator(np.diag([1.0, 2.0, 3.0])), 1.0, 0.01, 0)
    assert lam == pytest.approx(3.0, abs=1e-8)
    np.testing.assert_allclose(np.abs(h), [0, 0, 1], atol=1e-8)


def test_lanczos_identity_stops_after_one_step():
    lam, h, used = lanczos_max_eigvec(as_operator(np.eye(10)), 1.0, 0.01, 3)
    assert lam == pytest.approx(1.0, abs=1e-14)
    assert used == 1
    assert np.linalg.norm(h) == pytest.approx(1.0)


def test_lanczos_restarts_when_basis_is_small():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(40, 40))
    A = A + A.T
    lam, h, used = lanczos_max_eigvec(as_operator(A), 0.05, 0.01, 1, max_basis=8)
    assert used == lanczos_steps(40, 0.05, 0.01)
    top = np.linalg.eigvalsh(A)
    assert lam >= top[-1] - 0.05 / 8 * np.max(np.abs(top))


def test_lanczos_random_dense_accuracy():
    rng = np.random.default_rng(1)
    ok = 0
    for t in range(30):
        A = rng.normal(size=(50, 50))
        A = (A + A.T) / 2
        lam, h, _ = lanczos_max_eigvec(as_operator(A), 0.1, 0.01, t)
        w = np.linalg.eigvalsh(A)
        ok += lam >= w[-1] - 0.1 / 8 * np.max(np.abs(w))
        assert h @ A @ h == pytest.approx(lam, abs=1e-9)
    assert ok >= 29


def test_lmo_psd_operator_gives_nonzero_direction(triangle):
    cost = build_cost_maxkcut(triangle, 2)
    res = lmo(cost, 1e-3, 0.01, 3.0, 0)
    assert res.lam >= 0
    assert np.linalg.norm(res.h) == pytest.approx(1.0)
    np.testing.assert_allclose(res.q.diag, 3.0 * res.h ** 2)
    np.testing.assert_allclose(res.q.edge_vals, 3.0 * res.h[cost.rows] * res.h[cost.cols])


def test_lmo_negative_branch():
    res = lmo(as_operator(-np.eye(4)), 1e-3, 0.01, 4.0, 0)
    assert res.lam == pytest.approx(-1.0)
    assert np.all(res.h == 0) and np.all(res.q.diag == 0) and np.all(res.q.edge_vals == 0)


def test_lmo_rank_one_image_on_two_vertices():
    op = as_operator(np.diag([1.0, 0.0]))
    res = lmo(op, 1e-6, 0.01, 2.0, 0)
    np.testing.assert_allclose(res.q.diag, [2.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(res.q.edge_vals, [0.0], atol=1e-12)


def test_lmo_rejects_nonpositive_delta(triangle):
    with pytest.raises(ValueError):
        lmo(build_cost_maxkcut(triangle, 2), 0.0, 0.01, 3.0, 0)


def test_update_identity_and_full_step():
    rng = make_rng(0)
    z = SampleSet(rng.standard_normal((3, 4)))
    v = ConstraintImage(np.ones(4), np.zeros(2))
    h = np.array([1.0, 0.0, 0.0, 0.0])
    q = ConstraintImage(np.array([4.0, 0, 0, 0]), np.zeros(2))
    z0, v0 = z.z.copy(), v.copy()
    update_variable(z, v, h, q, 0.0, rng, 4.0)
    np.testing.assert_array_equal(z.z, z0)
    np.testing.assert_array_equal(v.diag, v0.diag)
    update_variable(z, v, h, q, 1.0, rng, 4.0)
    assert np.all(z.z[:, 1:] == 0)
    np.testing.assert_array_equal(v.diag, q.diag)
    # independent zeta per sample
    assert len(set(np.round(z.z[:, 0], 12))) == 3
    with pytest.raises(ValueError):
        update_variable(z, v, h, q, 1.5, rng, 4.0)


def test_update_with_zero_direction_only_shrinks():
    rng = make_rng(1)
    z = SampleSet(rng.standard_normal((2, 3)))
    v = ConstraintImage(np.ones(3), np.full(1, 0.5))
    z0 = z.z.copy()
    update_variable(z, v, np.zeros(3), ConstraintImage(np.zeros(3), np.zeros(1)), 0.75, rng, 3.0)
    np.testing.assert_allclose(z.z, 0.5 * z0)
    np.testing.assert_allclose(v.edge_vals, [0.125])


def test_sample_covariance_follows_shadow_recursion():
    """Sample law N(0, X_t) over a fixed 3-step schedule, 40000 replications."""
    n, reps, alpha = 4, 40000, 4.0
    rng = make_rng(12)
    hs = [v / np.linalg.norm(v) for v in rng.normal(size=(3, n))]
    gammas = [2 / 2, 2 / 3, 2 / 4]
    z = SampleSet(rng.standard_normal((reps, n)))
    X = np.eye(n)
    v = ConstraintImage(np.ones(n), np.zeros(0))
    for h, g in zip(hs, gammas):
        q = ConstraintImage(alpha * h ** 2, np.zeros(0))
        update_variable(z, v, h, q, g, rng, alpha)
        X = (1 - g) * X + g * alpha * np.outer(h, h)
    emp = z.z.T @ z.z / reps
    assert np.max(np.abs(emp - X)) <= 0.1


def _kcut(n, p, seed, k=2, eps=0.1):
    g = random_graph(n, p, seed)
    cost = build_cost_maxkcut(g, k)
    return g, cost, PenaltyConfig.for_maxkcut(cost, k, eps)


def test_fw_converges_and_reports_stats():
    g, cost, cfg = _kcut(8, 0.5, 0)
    z, v, st = fw_gaussian(cost, cfg, 2, seed=1)
    assert st.converged
    assert st.final_gap <= cfg.tolerance
    assert st.infeasibility == infeasibility(v, cfg)
    assert st.infeasibility <= cfg.eps
    assert st.iterations <= cfg.iteration_bound()
    assert st.lanczos_iters >= st.iterations
    assert st.trace[0][0] == 0
    assert st.objective == pytest.approx(objective_value(v, cfg, cost), rel=1e-9, abs=1e-9)
    assert z.z.shape == (2, 8)


def test_fw_zero_weight_graph():
    g = WeightedGraph.from_edges(4, [(0, 1, 0.0), (1, 2, 0.0)])
    cost = build_cost_maxkcut(g, 2)
    cfg = PenaltyConfig.for_maxkcut(cost, 2, 0.1)
    _, v, st = fw_gaussian(cost, cfg, 2, seed=0)
    # Tr(C) = 0 gives beta = 0 and a zero tolerance; the gap is already closed
    assert st.converged and st.iterations == 0
    assert infeasibility(v, cfg) <= cfg.eps


def test_fw_nonconverged_flag():
    _, cost, cfg = _kcut(8, 0.5, 0)
    _, _, st = fw_gaussian(cost, cfg, 2, seed=1, max_iters=3)
    assert not st.converged and st.iterations == 3
    assert st.final_gap > cfg.tolerance


def test_fw_is_deterministic_per_seed():
    _, cost, cfg = _kcut(7, 0.6, 2)
    a = fw_gaussian(cost, cfg, 3, seed=9, max_iters=300)
    b = fw_gaussian(cost, cfg, 3, seed=9, max_iters=300)
    np.testing.assert_array_equal(a[0].z, b[0].z)
    np.testing.assert_array_equal(a[1].edge_vals, b[1].edge_vals)
    c = fw_gaussian(cost, cfg, 3, seed=10, max_iters=300)
    assert not np.array_equal(a[0].z, c[0].z)


def test_triangle_value_within_relaxation_bounds(triangle):
    eps = 0.2
    cost = build_cost_maxkcut(triangle, 2)
    cfg = PenaltyConfig.for_maxkcut(cost, 2, eps)
    opt, _ = sdp_relaxation(cost, cfg.lower_bound)
    assert opt == pytest.approx(2.25, abs=1e-5)  # unit triangle, k = 2
    _, v, st = fw_gaussian(cost, cfg, 2, seed=0)
    val = cost.inner(v.diag, v.edge_vals)
    assert st.converged
    assert (1 - 2 * eps) * opt <= val <= (1 + 4 * eps) * opt


def test_shadow_tracking_and_monotone_objective():
    g, cost, cfg = _kcut(10, 0.5, 4)
    _, v, st = fw_gaussian(cost, cfg, 2, seed=3, shadow=True, max_iters=200, trace_every=1)
    assert st.shadow_max_dev <= 1e-8
    np.testing.assert_allclose(np.diag(st.shadow_X), v.diag, atol=1e-8)
    objs = [o for _, o, _ in st.trace]
    for t in range(len(objs) - 1):
        gamma = 2 / (t + 2)
        slack = 0.5 * gamma ** 2 * cfg.curvature * (1 + cfg.eta)
        assert objs[t + 1] >= objs[t] - slack


def test_gap_upper_bounds_suboptimality():
    g, cost, cfg = _kcut(4, 0.9, 1, eps=0.15)
    best, _ = penalized_optimum(cost, cfg)
    _, v, st = fw_gaussian(cost, cfg, 2, seed=2)
    assert st.converged
    assert best - objective_value(v, cfg, cost) <= st.final_gap + 1e-4 * max(1.0, abs(best))


def test_no_dense_allocation_outside_shadow():
    led = WordLedger(20)
    with pytest.raises(MemoryBudgetExceeded):
        led.alloc((20, 20))
    g, cost, cfg = _kcut(20, 0.2, 1)
    budget = 40 * (g.n + g.m + 2 * g.n)
    led = WordLedger(g.n, budget_words=budget)
    fw_gaussian(cost, cfg, 2, seed=0, max_iters=20, ledger=led)
    assert 0 < led.peak <= budget


def test_checkpoint_resume_matches_uninterrupted(tmp_path):
    _, cost, cfg = _kcut(8, 0.5, 5)
    path = tmp_path / "ck.json"
    full = fw_gaussian(cost, cfg, 2, seed=4, max_iters=60)
    fw_gaussian(cost, cfg, 2, seed=4, max_iters=40, checkpoint_path=path, checkpoint_every=20)
    ck = Checkpoint.load(path)
    assert ck.t == 40
    assert set(json.loads(path.read_text())) == {"t", "v", "z", "rng_state", "lanczos_iters"}
    resumed = fw_gaussian(cost, cfg, 2, seed=0, max_iters=60, resume=ck)
    np.testing.assert_array_equal(full[0].z, resumed[0].z)
    np.testing.assert_array_equal(full[1].diag, resumed[1].diag)
    assert full[2].lanczos_iters == resumed[2].lanczos_iters


def test_step_cap_is_at_most_n():
    _, cost, cfg = _kcut(30, 0.2, 0)
    assert 1 <= lanczos_step_cap(cfg, cfg.default_failure_prob()) <= 30


def test_numpy_backend_matches(tmp_path):
    """The env flag selects the numpy kernels; both backends agree on v.

    Weights are generic so the top eigenvalue is simple; on symmetric graphs
    near-ties make the Ritz vector sensitive to rounding and runs drift apart.
    """
    script = tmp_path / "run.py"
    script.write_text(
        "import json\n"
        "import numpy as np\n"
        "from gausscut import _kernels\n"
        "from gausscut.graph import WeightedGraph, build_cost_maxkcut\n"
        "from gausscut.penalty import PenaltyConfig, infeasibility\n"
        "from gausscut.fw import fw_gaussian\n"
        "rng = np.random.default_rng(7)\n"
        "edges = [(i, j, float(rng.uniform(0.5, 2))) for i in range(8) for j in range(i + 1, 8) if rng.random() < 0.6]\n"
        "g = WeightedGraph.from_edges(8, edges)\n"
        "cost = build_cost_maxkcut(g, 2)\n"
        "cfg = PenaltyConfig.for_maxkcut(cost, 2, 0.1)\n"
        "z, v, st = fw_gaussian(cost, cfg, 2, seed=3, max_iters=100)\n"
        "z2, v2, st2 = fw_gaussian(cost, cfg, 2, seed=3)\n"
        "print(json.dumps({'backend': _kernels.BACKEND, 'diag': v.diag.tolist(), 'edge': v.edge_vals.tolist(),\n"
        "                  'conv': st2.converged, 'value': cost.inner(v2.diag, v2.edge_vals),\n"
        "                  'infeas': infeasibility(v2, cfg)}))\n"
    )
    out = {}
    for backend in ("numpy", "numba"):
        env = dict(os.environ, GAUSSCUT_BACKEND=backend)
        res = subprocess.run([sys.executable, str(script)], env=env, capture_output=True, text=True, check=True)
        out[backend] = json.loads(res.stdout)
    a, b = out["numpy"], out["numba"]
    assert a["backend"] == "numpy" and b["backend"] == "numba"
    np.testing.assert_allclose(a["diag"], b["diag"], atol=1e-8)
    np.testing.assert_allclose(a["edge"], b["edge"], atol=1e-8)
    assert a["conv"] and b["conv"]
    assert a["value"] == pytest.approx(b["value"], rel=1e-3)
    assert max(a["infeas"], b["infeas"]) <= 0.1


def test_bad_backend_flag_is_rejected():
    env = dict(os.environ, GAUSSCUT_BACKEND="fortran")
    res = subprocess.run([sys.executable, "-c", "import gausscut"], env=env, capture_output=True, text=True)
    assert res.returncode != 0 and "GAUSSCUT_BACKEND" in res.stderr
