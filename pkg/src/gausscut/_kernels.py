"""Hot numeric kernels, compiled with numba when available.

Every kernel has a pure-numpy twin (``py_*``). The public names bind to the
numba versions unless ``GAUSSCUT_BACKEND=numpy`` is set in the environment
(or numba cannot be imported). Both variants are always importable so they
can be compared directly in tests and benchmarks.
"""
from __future__ import annotations

import os

import numpy as np
from scipy.linalg import eigh_tridiagonal

try:
    import numba
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

_requested = os.environ.get("GAUSSCUT_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"GAUSSCUT_BACKEND must be 'numba' or 'numpy', got {_requested!r}")
BACKEND = "numba" if (_requested == "numba" and HAVE_NUMBA) else "numpy"


# ---------------------------------------------------------------------------
# pure numpy reference implementations
# ---------------------------------------------------------------------------

def py_sym_matvec(diag, rows, cols, vals, x, out):
    n = x.shape[0]
    out[:] = diag * x
    out += np.bincount(rows, weights=vals * x[cols], minlength=n)
    out += np.bincount(cols, weights=vals * x[rows], minlength=n)
    return out


def py_lanczos(diag, rows, cols, vals, v0, basis, alpha, beta):
    m = basis.shape[0]
    n = v0.shape[0]
    w = np.empty(n)
    basis[0] = v0 / np.linalg.norm(v0)
    scale = 0.0
    steps = 0
    for j in range(m):
        py_sym_matvec(diag, rows, cols, vals, basis[j], w)
        a = float(w @ basis[j])
        alpha[j] = a
        # two passes of classical Gram-Schmidt against the whole basis
        for _ in range(2):
            c = basis[: j + 1] @ w
            w -= c @ basis[: j + 1]
        steps = j + 1
        b = float(np.linalg.norm(w))
        scale = max(scale, abs(a) + b)
        if j == m - 1:
            break
        beta[j] = b
        if b <= 1e-12 * scale or b == 0.0:
            break
        basis[j + 1] = w / b
    return steps


def _steps_for(n, rho, p, cap):
    q = int(np.ceil(0.5 + np.log(n / (p * p)) / np.sqrt(rho)))
    return max(1, min(n, q, cap))


def py_gershgorin(diag, rows, cols, vals):
    a = np.abs(vals)
    r = np.abs(diag) + np.bincount(rows, weights=a, minlength=diag.shape[0])
    r += np.bincount(cols, weights=a, minlength=diag.shape[0])
    return float(r.max()) if r.size else 0.0


def py_top_ritz(a, b):
    m = a.shape[0]
    if m == 1:
        return np.ones(1)
    _, s = eigh_tridiagonal(a, b, select="i", select_range=(m - 1, m - 1))
    return s[:, 0]


def py_lanczos_top(diag, rows, cols, vals, need, basis, ta, tb, rng, h):
    """Top Ritz vector into ``h``, restarting when ``need`` exceeds the basis."""
    n = diag.shape[0]
    cap = basis.shape[0]
    start = rng.standard_normal(n)
    h[:] = start / np.linalg.norm(start)
    total = 0
    while total < need:
        m = min(cap, need - total)
        done = py_lanczos(diag, rows, cols, vals, start, basis[:m], ta[:m], tb[:m])
        s = py_top_ritz(ta[:done], tb[: done - 1])
        h[:] = s @ basis[:done]
        h /= np.linalg.norm(h)
        total += done
        if done < m:
            break
        start = h.copy()
    w = np.empty(n)
    py_sym_matvec(diag, rows, cols, vals, h, w)
    return float(h @ w), total


def py_fw_steps(cdiag, rows, cols, cvals, lb, beta, M, alpha, delta_coef, p, step_cap, tol,
                theory_norm, z, vd, ve, qd, qe, gd, gv, h, basis, ta, tb, rng, t, t_stop, max_iters):
    """Frank-Wolfe iterations from step ``t``.

    Returns (status, t, gap, obj, lanczos_steps, gap_first, obj_first) where
    status is 1 on convergence, 2 at ``max_iters``, 0 on reaching ``t_stop``.
    """
    k = z.shape[0]
    lz = 0
    gap0 = np.nan
    obj0 = np.nan
    first = True
    while True:
        gamma = 2.0 / (t + 2.0)
        phi, du, dw = py_lse_penalty(vd - 1.0, lb - ve, M)
        np.subtract(cdiag, beta * du, out=gd)
        np.add(cvals, 0.5 * beta * dw, out=gv)
        obj = float(cdiag @ vd + 2.0 * (cvals @ ve)) - beta * phi
        delta = delta_coef * gamma
        nrm = theory_norm if theory_norm > 0 else py_gershgorin(gd, rows, cols, gv)
        rho = 1.0 if nrm <= 0 else min(1.0, 8.0 * delta / (alpha * nrm))
        need = _steps_for(gd.shape[0], rho, p, step_cap)
        lam, used = py_lanczos_top(gd, rows, cols, gv, need, basis, ta, tb, rng, h)
        lz += used
        if lam >= 0:
            py_rank_one_image(h, rows, cols, alpha, qd, qe)
        else:
            h[:] = 0.0
            qd[:] = 0.0
            qe[:] = 0.0
        gap = float(gd @ (qd - vd) + 2.0 * (gv @ (qe - ve)))
        if first:
            gap0, obj0, first = gap, obj, False
        if gap <= tol:
            return 1, t, gap, obj, lz, gap0, obj0
        if t >= max_iters:
            return 2, t, gap, obj, lz, gap0, obj0
        zeta = rng.standard_normal(k)
        z *= np.sqrt(1.0 - gamma)
        z += np.sqrt(gamma * alpha) * zeta[:, None] * h[None, :]
        vd *= 1.0 - gamma
        vd += gamma * qd
        ve *= 1.0 - gamma
        ve += gamma * qe
        t += 1
        if t >= t_stop:
            return 0, t, gap, obj, lz, gap0, obj0


def py_rank_one_image(h, rows, cols, scale, out_diag, out_edge):
    np.multiply(h, h, out=out_diag)
    out_diag *= scale
    np.multiply(h[rows], h[cols], out=out_edge)
    out_edge *= scale


def py_lse_penalty(u, w, M):
    top = 0.0
    if u.size:
        top = np.max(np.abs(u))
    if w.size:
        top = max(top, np.max(w)) if u.size else np.max(w)
    ep = np.exp(M * (u - top))
    em = np.exp(M * (-u - top))
    ew = np.exp(M * (w - top))
    z = ep.sum() + em.sum() + ew.sum()
    return top + np.log(z) / M, (ep - em) / z, ew / z


def py_brute_maxkcut(n, k, rows, cols, w):
    # vertex 0 is pinned to label 0
    free = n - 1
    total = k ** free
    best = -np.inf
    best_code = 0
    chunk = 1 << 16
    powers = k ** np.arange(free, dtype=np.int64)
    for start in range(0, total, chunk):
        codes = np.arange(start, min(total, start + chunk), dtype=np.int64)
        labels = np.zeros((codes.size, n), dtype=np.int64)
        if free:
            labels[:, 1:] = (codes[:, None] // powers[None, :]) % k
        cut = (labels[:, rows] != labels[:, cols]) @ w
        i = int(np.argmax(cut))
        if cut[i] > best:
            best = float(cut[i])
            best_code = int(codes[i])
    out = np.zeros(n, dtype=np.int64)
    c = best_code
    for v in range(1, n):
        out[v] = c % k
        c //= k
    return best, out


def _agree_value(labels, prow, pcol, pw, mrow, mcol, mw):
    same = labels[prow] == labels[pcol]
    diff = labels[mrow] != labels[mcol]
    return float(pw @ same + mw @ diff)


def py_brute_maxagree(n, prow, pcol, pw, mrow, mcol, mw):
    # restricted growth strings enumerate each set partition exactly once
    labels = np.zeros(n, dtype=np.int64)
    best = -np.inf
    best_labels = labels.copy()

    def rec(i, nblocks):
        nonlocal best, best_labels
        if i == n:
            val = _agree_value(labels, prow, pcol, pw, mrow, mcol, mw)
            if val > best:
                best = val
                best_labels = labels.copy()
            return
        for b in range(nblocks + 1):
            labels[i] = b
            rec(i + 1, max(nblocks, b + 1))

    if n == 0:
        return 0.0, labels
    rec(1, 1)
    return best, best_labels


# ---------------------------------------------------------------------------
# numba versions
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def nb_sym_matvec(diag, rows, cols, vals, x, out):
        n = x.shape[0]
        for i in range(n):
            out[i] = diag[i] * x[i]
        for e in range(rows.shape[0]):
            i = rows[e]
            j = cols[e]
            c = vals[e]
            out[i] += c * x[j]
            out[j] += c * x[i]
        return out

    @njit(cache=True, nogil=True)
    def nb_lanczos(diag, rows, cols, vals, v0, basis, alpha, beta):
        m = basis.shape[0]
        n = v0.shape[0]
        w = np.empty(n)
        nrm = np.sqrt(np.dot(v0, v0))
        for i in range(n):
            basis[0, i] = v0[i] / nrm
        scale = 0.0
        steps = 0
        for j in range(m):
            nb_sym_matvec(diag, rows, cols, vals, basis[j], w)
            a = np.dot(w, basis[j])
            alpha[j] = a
            for _ in range(2):
                for i in range(j + 1):
                    c = np.dot(w, basis[i])
                    for t in range(n):
                        w[t] -= c * basis[i, t]
            steps = j + 1
            b = np.sqrt(np.dot(w, w))
            scale = max(scale, abs(a) + b)
            if j == m - 1:
                break
            beta[j] = b
            if b <= 1e-12 * scale or b == 0.0:
                break
            for t in range(n):
                basis[j + 1, t] = w[t] / b
        return steps

    @njit(cache=True, nogil=True)
    def nb_rank_one_image(h, rows, cols, scale, out_diag, out_edge):
        for i in range(h.shape[0]):
            out_diag[i] = scale * h[i] * h[i]
        for e in range(rows.shape[0]):
            out_edge[e] = scale * h[rows[e]] * h[cols[e]]

    @njit(cache=True, nogil=True)
    def nb_lse_penalty(u, w, M):
        d1 = u.shape[0]
        d2 = w.shape[0]
        top = -np.inf
        for i in range(d1):
            top = max(top, abs(u[i]))
        for j in range(d2):
            top = max(top, w[j])
        du = np.empty(d1)
        dw = np.empty(d2)
        z = 0.0
        for i in range(d1):
            ep = np.exp(M * (u[i] - top))
            em = np.exp(M * (-u[i] - top))
            du[i] = ep - em
            z += ep + em
        for j in range(d2):
            ew = np.exp(M * (w[j] - top))
            dw[j] = ew
            z += ew
        for i in range(d1):
            du[i] /= z
        for j in range(d2):
            dw[j] /= z
        return top + np.log(z) / M, du, dw


    @njit(cache=True, nogil=True)
    def nb_gershgorin(diag, rows, cols, vals):
        n = diag.shape[0]
        r = np.abs(diag)
        for e in range(rows.shape[0]):
            a = abs(vals[e])
            r[rows[e]] += a
            r[cols[e]] += a
        best = 0.0
        for i in range(n):
            best = max(best, r[i])
        return best

    @njit(cache=True, nogil=True)
    def nb_top_ritz(a, b):
        m = a.shape[0]
        if m == 1:
            return np.ones(1)
        T = np.zeros((m, m))
        for i in range(m):
            T[i, i] = a[i]
        for i in range(m - 1):
            T[i, i + 1] = b[i]
            T[i + 1, i] = b[i]
        _, V = np.linalg.eigh(T)
        return V[:, m - 1].copy()

    @njit(cache=True, nogil=True)
    def nb_lanczos_top(diag, rows, cols, vals, need, basis, ta, tb, rng, h):
        n = diag.shape[0]
        cap = basis.shape[0]
        start = np.empty(n)
        for i in range(n):
            start[i] = rng.standard_normal()
        nrm = np.sqrt(np.dot(start, start))
        for i in range(n):
            h[i] = start[i] / nrm
        total = 0
        while total < need:
            m = min(cap, need - total)
            done = nb_lanczos(diag, rows, cols, vals, start, basis[:m], ta[:m], tb[:m])
            s = nb_top_ritz(ta[:done], tb[: done - 1])
            h[:] = 0.0
            for j in range(done):
                for i in range(n):
                    h[i] += s[j] * basis[j, i]
            nrm = np.sqrt(np.dot(h, h))
            for i in range(n):
                h[i] /= nrm
            total += done
            if done < m:
                break
            start[:] = h
        w = np.empty(n)
        nb_sym_matvec(diag, rows, cols, vals, h, w)
        return np.dot(h, w), total

    @njit(cache=True, nogil=True)
    def nb_fw_steps(cdiag, rows, cols, cvals, lb, beta, M, alpha, delta_coef, p, step_cap, tol,
                    theory_norm, z, vd, ve, qd, qe, gd, gv, h, basis, ta, tb, rng, t, t_stop, max_iters):
        k = z.shape[0]
        n = vd.shape[0]
        m = ve.shape[0]
        u = np.empty(n)
        w = np.empty(m)
        lz = 0
        gap0 = np.nan
        obj0 = np.nan
        first = True
        while True:
            gamma = 2.0 / (t + 2.0)
            for i in range(n):
                u[i] = vd[i] - 1.0
            for e in range(m):
                w[e] = lb - ve[e]
            phi, du, dw = nb_lse_penalty(u, w, M)
            obj = 0.0
            for i in range(n):
                gd[i] = cdiag[i] - beta * du[i]
                obj += cdiag[i] * vd[i]
            for e in range(m):
                gv[e] = cvals[e] + 0.5 * beta * dw[e]
                obj += 2.0 * cvals[e] * ve[e]
            obj -= beta * phi
            delta = delta_coef * gamma
            nrm = theory_norm if theory_norm > 0 else nb_gershgorin(gd, rows, cols, gv)
            rho = 1.0 if nrm <= 0 else min(1.0, 8.0 * delta / (alpha * nrm))
            need = int(np.ceil(0.5 + np.log(n / (p * p)) / np.sqrt(rho)))
            need = max(1, min(n, need, step_cap))
            lam, used = nb_lanczos_top(gd, rows, cols, gv, need, basis, ta, tb, rng, h)
            lz += used
            if lam >= 0:
                nb_rank_one_image(h, rows, cols, alpha, qd, qe)
            else:
                h[:] = 0.0
                qd[:] = 0.0
                qe[:] = 0.0
            gap = 0.0
            for i in range(n):
                gap += gd[i] * (qd[i] - vd[i])
            for e in range(m):
                gap += 2.0 * gv[e] * (qe[e] - ve[e])
            if first:
                gap0 = gap
                obj0 = obj
                first = False
            if gap <= tol:
                return 1, t, gap, obj, lz, gap0, obj0
            if t >= max_iters:
                return 2, t, gap, obj, lz, gap0, obj0
            a = np.sqrt(1.0 - gamma)
            b = np.sqrt(gamma * alpha)
            for r in range(k):
                zeta = rng.standard_normal() * b
                for i in range(n):
                    z[r, i] = a * z[r, i] + zeta * h[i]
            for i in range(n):
                vd[i] = (1.0 - gamma) * vd[i] + gamma * qd[i]
            for e in range(m):
                ve[e] = (1.0 - gamma) * ve[e] + gamma * qe[e]
            t += 1
            if t >= t_stop:
                return 0, t, gap, obj, lz, gap0, obj0

    @njit(cache=True, nogil=True)
    def nb_brute_maxkcut(n, k, rows, cols, w):
        labels = np.zeros(n, dtype=np.int64)
        best_labels = np.zeros(n, dtype=np.int64)
        best = -np.inf
        m = rows.shape[0]
        while True:
            cut = 0.0
            for e in range(m):
                if labels[rows[e]] != labels[cols[e]]:
                    cut += w[e]
            if cut > best:
                best = cut
                best_labels[:] = labels
            # odometer increment over vertices 1..n-1
            v = 1
            while v < n:
                labels[v] += 1
                if labels[v] < k:
                    break
                labels[v] = 0
                v += 1
            if v >= n:
                break
        return best, best_labels

    @njit(cache=True, nogil=True)
    def nb_brute_maxagree(n, prow, pcol, pw, mrow, mcol, mw):
        labels = np.zeros(n, dtype=np.int64)
        best_labels = np.zeros(n, dtype=np.int64)
        if n == 0:
            return 0.0, best_labels
        # prefix max of labels, so labels[i] may range over 0..pmax[i-1]+1
        pmax = np.zeros(n, dtype=np.int64)
        best = -np.inf
        while True:
            val = 0.0
            for e in range(prow.shape[0]):
                if labels[prow[e]] == labels[pcol[e]]:
                    val += pw[e]
            for e in range(mrow.shape[0]):
                if labels[mrow[e]] != labels[mcol[e]]:
                    val += mw[e]
            if val > best:
                best = val
                best_labels[:] = labels
            i = n - 1
            while i >= 1:
                if labels[i] <= pmax[i - 1]:
                    labels[i] += 1
                    pmax[i] = max(pmax[i - 1], labels[i])
                    for t in range(i + 1, n):
                        labels[t] = 0
                        pmax[t] = pmax[i]
                    break
                i -= 1
            if i < 1:
                break
        return best, best_labels


if BACKEND == "numba":
    sym_matvec = nb_sym_matvec
    lanczos = nb_lanczos
    rank_one_image = nb_rank_one_image
    lse_penalty = nb_lse_penalty
    brute_maxkcut = nb_brute_maxkcut
    brute_maxagree = nb_brute_maxagree
    gershgorin = nb_gershgorin
    lanczos_top = nb_lanczos_top
    fw_steps = nb_fw_steps
else:
    sym_matvec = py_sym_matvec
    lanczos = py_lanczos
    rank_one_image = py_rank_one_image
    lse_penalty = py_lse_penalty
    brute_maxkcut = py_brute_maxkcut
    brute_maxagree = py_brute_maxagree
    gershgorin = py_gershgorin
    lanczos_top = py_lanczos_top
    fw_steps = py_fw_steps
