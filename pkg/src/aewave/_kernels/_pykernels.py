"""Pure numpy implementations of the compiled kernels.

Selection rules (first maximal violator, first minimal objective) and the
summation order of the breakpoint scan match the Cython versions, so both
backends return the same numbers up to floating-point reassociation.
"""

import numpy as np


def find_runs(energy, threshold, min_duration, merge_gap):
    e = np.asarray(energy, dtype=np.float64)
    mask = (e > threshold).astype(np.int8)
    if not mask.any():
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty.copy()
    d = np.diff(mask, prepend=np.int8(0), append=np.int8(0))
    starts = np.flatnonzero(d == 1)
    ends = np.flatnonzero(d == -1)
    brk = (starts[1:] - ends[:-1]) >= merge_gap
    g_start = starts[np.concatenate(([True], brk))]
    g_end = ends[np.concatenate((brk, [True]))]
    keep = (g_end - g_start) >= min_duration
    return g_start[keep].astype(np.int64), (g_end - g_start)[keep].astype(np.int64)


def smo_solve(K, y, c_pos, c_neg, tol, max_iter):
    K = np.asarray(K, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    pos = y > 0
    C = np.where(pos, c_pos, c_neg).astype(np.float64)
    alpha = np.zeros(n)
    G = -np.ones(n)
    diag = np.diag(K).copy()
    tau = 1e-12
    it = 0
    gap = np.inf
    while it < max_iter:
        up = np.where(pos, alpha < C, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < C)
        minus_yg = -y * G
        if up.any():
            cand = np.where(up, minus_yg, -np.inf)
            i = int(np.argmax(cand))
            gmax = cand[i]
        else:
            i, gmax = -1, -np.inf
        v = np.where(low, -minus_yg, -np.inf)
        gmax2 = v.max() if low.any() else -np.inf
        j = -1
        if i >= 0:
            grad_diff = gmax + v
            ok = low & (grad_diff > 0)
            if ok.any():
                quad = diag[i] + diag - 2.0 * K[i]
                quad = np.where(quad <= 0, tau, quad)
                obj = np.where(ok, -(grad_diff * grad_diff) / quad, np.inf)
                j = int(np.argmin(obj))
        gap = gmax + gmax2
        if gap < tol or i < 0 or j < 0:
            break
        it += 1
        ci, cj = C[i], C[j]
        old_ai, old_aj = alpha[i], alpha[j]
        ai, aj = old_ai, old_aj
        quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if quad <= 0:
            quad = tau
        if y[i] != y[j]:
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ai += delta
            aj += delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > ci - cj:
                if ai > ci:
                    ai, aj = ci, ci - diff
            elif aj > cj:
                aj, ai = cj, cj + diff
        else:
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            ai -= delta
            aj += delta
            if total > ci:
                if ai > ci:
                    ai, aj = ci, total - ci
            elif aj < 0:
                aj, ai = 0.0, total
            if total > cj:
                if aj > cj:
                    aj, ai = cj, total - cj
            elif ai < 0:
                ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        dai = (ai - old_ai) * y[i]
        daj = (aj - old_aj) * y[j]
        G += y * (K[i] * dai + K[j] * daj)

    yg = y * G
    upper = alpha >= C
    lower = alpha <= 0
    free = ~upper & ~lower
    ub_mask = (upper & ~pos) | (lower & pos)
    lb_mask = (upper & pos) | (lower & ~pos)
    if free.any():
        rho = float(np.sum(yg[free]) / np.count_nonzero(free))
    else:
        ub = yg[ub_mask].min() if ub_mask.any() else np.inf
        lb = yg[lb_mask].max() if lb_mask.any() else -np.inf
        rho = float((ub + lb) / 2.0)
    return alpha, rho, int(it), float(gap)


def _seg_sse(n, st, sy, stt, sty, syy):
    sxx = stt - st * st / n
    sxy = sty - st * sy / n
    s_yy = syy - sy * sy / n
    safe = np.where(sxx > 0, sxx, 1.0)
    r = np.where(sxx > 0, s_yy - sxy * sxy / safe, s_yy)
    return np.maximum(r, 0.0)


def two_line_sse(t, y, lo, hi):
    t = np.asarray(t, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = t.size
    cums = [np.cumsum(v) for v in (t, y, t * t, t * y, y * y)]
    totals = [c[-1] for c in cums]
    b = np.arange(lo, hi + 1)
    left = [c[b - 1] for c in cums]
    right = [tot - lv for tot, lv in zip(totals, left)]
    nl = b.astype(np.float64)
    nr = (n - b).astype(np.float64)
    return _seg_sse(nl, *left) + _seg_sse(nr, *right)
