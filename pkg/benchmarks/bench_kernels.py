"""Compare the numba kernels with their pure-numpy twins.

    python3 benchmarks/bench_kernels.py [--n 2000] [--degree 8] [--repeat 5]
    python3 benchmarks/bench_kernels.py --end-to-end   # whole solves, one process per backend

The first numba call (compilation or cache load) is timed separately.
"""
import argparse
import json
import os
import subprocess
import sys
import time
import timeit

import numpy as np

from gausscut import _kernels as K
from gausscut.graph import WeightedGraph, build_cost_maxkcut
from gausscut.penalty import PenaltyConfig


def random_graph(n, degree, seed):
    rng = np.random.default_rng(seed)
    m = n * degree // 2
    i = rng.integers(0, n, 3 * m)
    j = rng.integers(0, n, 3 * m)
    keep = i != j
    pairs = np.unique(np.sort(np.stack([i[keep], j[keep]], axis=1), axis=1), axis=0)[:m]
    return WeightedGraph.from_edges(n, [(int(a), int(b), 1.0) for a, b in pairs])


def fw_args(cost, cfg, seed, chunk):
    n, m = cost.n, cost.m
    rng = np.random.Generator(np.random.Philox(seed))
    basis_rows = 64
    return (cost.diag, cost.rows, cost.cols, cost.vals, cfg.lower_bound, cfg.beta, cfg.M, cfg.alpha,
            0.5 * cfg.eta * cfg.curvature, 0.01, n, cfg.tolerance, 0.0, rng.standard_normal((2, n)),
            np.ones(n), np.zeros(m), np.empty(n), np.empty(m), np.empty(n), np.empty(m), np.empty(n),
            np.empty((basis_rows, n)), np.empty(basis_rows), np.empty(basis_rows), rng, 0, chunk, 10 ** 9)


def bench(name, py, nb, repeat):
    t0 = time.perf_counter()
    nb()
    first = time.perf_counter() - t0
    tp = min(timeit.repeat(py, number=1, repeat=repeat))
    tn = min(timeit.repeat(nb, number=1, repeat=repeat))
    print(f"{name:<14}{tp * 1e3:>12.3f}{tn * 1e3:>12.3f}{tp / tn:>10.1f}x{first:>12.2f}")


def kernels(args):
    g = random_graph(args.n, args.degree, 0)
    cost = build_cost_maxkcut(g, 2)
    cfg = PenaltyConfig.for_maxkcut(cost, 2, 0.1)
    x = np.random.default_rng(1).normal(size=g.n)
    out = np.empty(g.n)
    print(f"n={g.n} |E|={g.m}, best of {args.repeat}, times in ms")
    print(f"{'kernel':<14}{'numpy':>12}{'numba':>12}{'speedup':>11}{'first (s)':>12}")
    bench("matvec",
          lambda: K.py_sym_matvec(cost.diag, cost.rows, cost.cols, cost.vals, x, out),
          lambda: K.nb_sym_matvec(cost.diag, cost.rows, cost.cols, cost.vals, x, out), args.repeat)
    u, w = np.random.default_rng(2).normal(size=g.n), np.random.default_rng(3).normal(size=g.m)
    bench("penalty",
          lambda: K.py_lse_penalty(u, w, cfg.M), lambda: K.nb_lse_penalty(u, w, cfg.M), args.repeat)

    def lanczos(fn):
        h, basis, ta, tb = np.empty(g.n), np.empty((64, g.n)), np.empty(64), np.empty(64)
        rng = np.random.Generator(np.random.Philox(4))
        return lambda: fn(cost.diag, cost.rows, cost.cols, cost.vals, 50, basis, ta, tb, rng, h)
    bench("lanczos(50)", lanczos(K.py_lanczos_top), lanczos(K.nb_lanczos_top), args.repeat)
    bench(f"fw x{args.chunk}",
          lambda: K.py_fw_steps(*fw_args(cost, cfg, 5, args.chunk)),
          lambda: K.nb_fw_steps(*fw_args(cost, cfg, 5, args.chunk)), args.repeat)


SOLVE = """
import json, time
from gausscut import _kernels
from gausscut.graph import WeightedGraph, build_cost_maxkcut
from gausscut.penalty import PenaltyConfig
from gausscut.fw import fw_gaussian
import numpy as np
rng = np.random.default_rng(0)
n = {n}
edges = [(i, j, 1.0) for i in range(n) for j in range(i + 1, n) if rng.random() < {p}]
cost = build_cost_maxkcut(WeightedGraph.from_edges(n, edges), 2)
cfg = PenaltyConfig.for_maxkcut(cost, 2, 0.1)
fw_gaussian(cost, cfg, 2, max_iters=2)
t0 = time.perf_counter()
z, v, st = fw_gaussian(cost, cfg, 2, seed=1, max_iters={iters})
print(json.dumps({{"backend": _kernels.BACKEND, "seconds": time.perf_counter() - t0,
                  "iterations": st.iterations, "lanczos": st.lanczos_iters}}))
"""


def end_to_end(args):
    code = SOLVE.format(n=args.n_solve, p=args.p, iters=args.iters)
    print(f"solve: n={args.n_solve}, p={args.p}, {args.iters} iterations")
    for backend in ("numpy", "numba"):
        env = dict(os.environ, GAUSSCUT_BACKEND=backend)
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        r = json.loads(res.stdout)
        print(f"  {r['backend']:<6} {r['seconds']:8.2f}s  ({r['iterations']} iterations, "
              f"{r['lanczos']} Lanczos steps)")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--degree", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--chunk", type=int, default=20, help="FW iterations per fw_steps call")
    ap.add_argument("--end-to-end", action="store_true")
    ap.add_argument("--n-solve", type=int, default=100)
    ap.add_argument("--p", type=float, default=0.05)
    ap.add_argument("--iters", type=int, default=2000)
    args = ap.parse_args()
    if not K.HAVE_NUMBA:
        sys.exit("numba is not installed; nothing to compare")
    kernels(args)
    if args.end_to_end:
        end_to_end(args)


if __name__ == "__main__":
    main()
