"""The numba kernels and their numpy twins must agree."""
import numpy as np
import pytest

from conftest import random_graph, random_signed
from gausscut import _kernels as K
from gausscut.graph import build_cost_maxkcut
from gausscut.penalty import PenaltyConfig

pytestmark = pytest.mark.skipif(not K.HAVE_NUMBA, reason="numba not installed")


def _op(seed, n=12, p=0.5):
    g = random_graph(n, p, seed, weights="real")
    rng = np.random.default_rng(seed)
    return rng.normal(size=n), g.rows, g.cols, rng.normal(size=g.m), rng


def test_backend_flag_is_valid():
    assert K.BACKEND in ("numba", "numpy")


@pytest.mark.parametrize("seed", range(5))
def test_matvec(seed):
    d, r, c, v, rng = _op(seed)
    x = rng.normal(size=d.size)
    a = K.py_sym_matvec(d, r, c, v, x, np.empty(d.size))
    b = K.nb_sym_matvec(d, r, c, v, x, np.empty(d.size))
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("seed", range(5))
def test_lanczos_coefficients(seed):
    d, r, c, v, rng = _op(seed)
    x = rng.normal(size=d.size)
    m = 8
    out = []
    for fn in (K.py_lanczos, K.nb_lanczos):
        basis, al, be = np.empty((m, d.size)), np.empty(m), np.empty(m)
        steps = fn(d, r, c, v, x, basis, al, be)
        out.append((steps, basis[:steps].copy(), al[:steps].copy(), be[: steps - 1].copy()))
    assert out[0][0] == out[1][0]
    for a, b in zip(out[0][1:], out[1][1:]):
        np.testing.assert_allclose(a, b, atol=1e-10)


def test_lanczos_breakdown_on_identity():
    n = 6
    for fn in (K.py_lanczos, K.nb_lanczos):
        basis, al, be = np.empty((n, n)), np.empty(n), np.empty(n)
        steps = fn(np.ones(n), np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0),
                   np.arange(1.0, n + 1), basis, al, be)
        assert steps == 1 and al[0] == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(3))
def test_lanczos_top(seed):
    d, r, c, v, _ = _op(seed, n=15)
    res = []
    for fn in (K.py_lanczos_top, K.nb_lanczos_top):
        h = np.empty(15)
        basis, ta, tb = np.empty((4, 15)), np.empty(4), np.empty(4)
        lam, used = fn(d, r, c, v, 15, basis, ta, tb, np.random.Generator(np.random.Philox(seed)), h)
        res.append((lam, used, h.copy()))
    assert res[0][1] == res[1][1]
    assert res[0][0] == pytest.approx(res[1][0], abs=1e-9)
    assert abs(abs(res[0][2] @ res[1][2]) - 1) < 1e-8


def test_rank_one_image():
    d, r, c, v, rng = _op(1)
    h = rng.normal(size=d.size)
    outs = []
    for fn in (K.py_rank_one_image, K.nb_rank_one_image):
        od, oe = np.empty(d.size), np.empty(r.size)
        fn(h, r, c, 3.0, od, oe)
        outs.append((od, oe))
    np.testing.assert_allclose(outs[0][0], outs[1][0], rtol=1e-14)
    np.testing.assert_allclose(outs[0][1], outs[1][1], rtol=1e-14)


@pytest.mark.parametrize("M", [0.5, 10.0, 500.0])
def test_lse_penalty(M):
    rng = np.random.default_rng(int(M))
    u, w = rng.normal(size=9), rng.normal(size=4)
    a = K.py_lse_penalty(u, w, M)
    b = K.nb_lse_penalty(u, w, M)
    assert a[0] == pytest.approx(b[0], rel=1e-13)
    np.testing.assert_allclose(a[1], b[1], atol=1e-14)
    np.testing.assert_allclose(a[2], b[2], atol=1e-14)


def test_gershgorin():
    d, r, c, v, _ = _op(4)
    assert K.py_gershgorin(d, r, c, v) == pytest.approx(K.nb_gershgorin(d, r, c, v), rel=1e-14)


@pytest.mark.parametrize("seed, k", [(0, 2), (1, 3), (2, 4)])
def test_brute_maxkcut(seed, k):
    g = random_graph(7, 0.6, seed, weights="real")
    a = K.py_brute_maxkcut(g.n, k, g.rows, g.cols, g.weights)
    b = K.nb_brute_maxkcut(g.n, k, g.rows, g.cols, g.weights)
    assert a[0] == pytest.approx(b[0])


@pytest.mark.parametrize("seed", range(3))
def test_brute_maxagree(seed):
    sg = random_signed(7, 0.6, seed)
    args = (sg.n, sg.plus.rows, sg.plus.cols, sg.plus.weights, sg.minus.rows, sg.minus.cols, sg.minus.weights)
    assert K.py_brute_maxagree(*args)[0] == pytest.approx(K.nb_brute_maxagree(*args)[0])


def test_fw_steps_trajectories_agree():
    """Same generator stream, same iterations: the tracked image must match."""
    g = random_graph(9, 0.5, 3)
    cost = build_cost_maxkcut(g, 2)
    cfg = PenaltyConfig.for_maxkcut(cost, 2, 0.1)
    runs = []
    for fn in (K.py_fw_steps, K.nb_fw_steps):
        rng = np.random.Generator(np.random.Philox(5))
        n, m = g.n, g.m
        z = rng.standard_normal((2, n))
        vd, ve = np.ones(n), np.zeros(m)
        bufs = [np.empty(n), np.empty(m), np.empty(n), np.empty(m), np.empty(n)]
        basis, ta, tb = np.empty((n, n)), np.empty(n), np.empty(n)
        status, t, gap, obj, lz, _, _ = fn(
            cost.diag, cost.rows, cost.cols, cost.vals, cfg.lower_bound, cfg.beta, cfg.M, cfg.alpha,
            0.5 * cfg.eta * cfg.curvature, 0.01, n, cfg.tolerance, 0.0, z, vd, ve, *bufs, basis, ta, tb,
            rng, 0, 40, 10 ** 6)
        runs.append((status, t, gap, obj, lz, vd.copy(), ve.copy(), rng.bit_generator.state["state"]["counter"].tolist()))
    a, b = runs
    assert a[:2] == b[:2] and a[4] == b[4]
    assert a[2] == pytest.approx(b[2], rel=1e-7, abs=1e-9)
    np.testing.assert_allclose(a[5], b[5], atol=1e-9)
    np.testing.assert_allclose(a[6], b[6], atol=1e-9)
    assert a[7] == b[7]
