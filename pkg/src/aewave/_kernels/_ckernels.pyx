# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Semantics mirror ``_pykernels`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


def find_runs(const double[::1] energy, double threshold, Py_ssize_t min_duration,
              Py_ssize_t merge_gap):
    cdef Py_ssize_t n = energy.shape[0]
    cdef Py_ssize_t i, run_start = -1
    cdef Py_ssize_t cs = -1, ce = -1
    onsets = []
    durations = []
    for i in range(n + 1):
        if i < n and energy[i] > threshold:
            if run_start < 0:
                run_start = i
            continue
        if run_start < 0:
            continue
        # run [run_start, i) just closed
        if cs >= 0 and run_start - ce < merge_gap:
            ce = i
        else:
            if cs >= 0 and ce - cs >= min_duration:
                onsets.append(cs)
                durations.append(ce - cs)
            cs = run_start
            ce = i
        run_start = -1
    if cs >= 0 and ce - cs >= min_duration:
        onsets.append(cs)
        durations.append(ce - cs)
    return np.asarray(onsets, dtype=np.int64), np.asarray(durations, dtype=np.int64)


def smo_solve(const double[:, ::1] K, const double[::1] y, double c_pos, double c_neg,
              double tol, long max_iter):
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t t, i, j
    cdef long it
    cdef double TAU = 1e-12
    cdef double gmax, gmax2, v, grad_diff, quad, obj, obj_min
    cdef double ci, cj, old_ai, old_aj, delta, diff, total, dai, daj
    cdef double ub, lb, sum_free, yg, rho, ct
    cdef Py_ssize_t nr_free
    alpha_arr = np.zeros(n)
    grad_arr = -np.ones(n)
    cost_arr = np.where(np.asarray(y) > 0, c_pos, c_neg).astype(np.float64)
    cdef double[::1] alpha = alpha_arr
    cdef double[::1] G = grad_arr
    cdef double[::1] C = cost_arr
    gap = INFINITY
    it = 0
    while it < max_iter:
        gmax = -INFINITY
        i = -1
        for t in range(n):
            if y[t] > 0:
                if alpha[t] < C[t]:
                    v = -G[t]
                    if v > gmax:
                        gmax = v
                        i = t
            else:
                if alpha[t] > 0:
                    v = G[t]
                    if v > gmax:
                        gmax = v
                        i = t
        gmax2 = -INFINITY
        j = -1
        obj_min = INFINITY
        for t in range(n):
            if y[t] > 0:
                if alpha[t] > 0:
                    v = G[t]
                else:
                    continue
            else:
                if alpha[t] < C[t]:
                    v = -G[t]
                else:
                    continue
            if v > gmax2:
                gmax2 = v
            if i < 0:
                continue
            grad_diff = gmax + v
            if grad_diff > 0:
                quad = K[i, i] + K[t, t] - 2.0 * K[i, t]
                if quad <= 0:
                    quad = TAU
                obj = -(grad_diff * grad_diff) / quad
                if obj < obj_min:
                    obj_min = obj
                    j = t
        gap = gmax + gmax2
        if gap < tol or i < 0 or j < 0:
            break
        it += 1
        ci = C[i]
        cj = C[j]
        old_ai = alpha[i]
        old_aj = alpha[j]
        if y[i] != y[j]:
            quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
            if quad <= 0:
                quad = TAU
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0
                    alpha[j] = -diff
            if diff > ci - cj:
                if alpha[i] > ci:
                    alpha[i] = ci
                    alpha[j] = ci - diff
            else:
                if alpha[j] > cj:
                    alpha[j] = cj
                    alpha[i] = cj + diff
        else:
            quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
            if quad <= 0:
                quad = TAU
            delta = (G[i] - G[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > ci:
                if alpha[i] > ci:
                    alpha[i] = ci
                    alpha[j] = total - ci
            else:
                if alpha[j] < 0:
                    alpha[j] = 0
                    alpha[i] = total
            if total > cj:
                if alpha[j] > cj:
                    alpha[j] = cj
                    alpha[i] = total - cj
            else:
                if alpha[i] < 0:
                    alpha[i] = 0
                    alpha[j] = total
        dai = (alpha[i] - old_ai) * y[i]
        daj = (alpha[j] - old_aj) * y[j]
        for t in range(n):
            G[t] += y[t] * (K[i, t] * dai + K[j, t] * daj)

    ub = INFINITY
    lb = -INFINITY
    sum_free = 0.0
    nr_free = 0
    for t in range(n):
        yg = y[t] * G[t]
        ct = C[t]
        if alpha[t] >= ct:
            if y[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif alpha[t] <= 0:
            if y[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            nr_free += 1
            sum_free += yg
    if nr_free > 0:
        rho = sum_free / nr_free
    else:
        rho = (ub + lb) / 2.0
    return alpha_arr, rho, int(it), float(gap)


def two_line_sse(const double[::1] t, const double[::1] y, Py_ssize_t lo, Py_ssize_t hi):
    cdef Py_ssize_t n = t.shape[0]
    cdef Py_ssize_t b, k
    cdef double st = 0, sy = 0, stt = 0, sty = 0, syy = 0
    cdef double tt, ty, tyy, tst, tsy, nl, nr
    cdef double a_st, a_sy, a_stt, a_sty, a_syy
    out_arr = np.empty(hi - lo + 1)
    cdef double[::1] out = out_arr
    for k in range(n):
        st += t[k]
        sy += y[k]
        stt += t[k] * t[k]
        sty += t[k] * y[k]
        syy += y[k] * y[k]
    tst, tsy, tt, ty, tyy = st, sy, stt, sty, syy
    st = sy = stt = sty = syy = 0
    k = 0
    for b in range(lo, hi + 1):
        while k < b:
            st += t[k]
            sy += y[k]
            stt += t[k] * t[k]
            sty += t[k] * y[k]
            syy += y[k] * y[k]
            k += 1
        nl = <double> b
        nr = <double> (n - b)
        a_st = tst - st
        a_sy = tsy - sy
        a_stt = tt - stt
        a_sty = ty - sty
        a_syy = tyy - syy
        out[b - lo] = _seg_sse(nl, st, sy, stt, sty, syy) + _seg_sse(nr, a_st, a_sy, a_stt, a_sty, a_syy)
    return out_arr


cdef inline double _seg_sse(double n, double st, double sy, double stt, double sty, double syy):
    cdef double sxx = stt - st * st / n
    cdef double sxy = sty - st * sy / n
    cdef double s_yy = syy - sy * sy / n
    cdef double r
    if sxx > 0:
        r = s_yy - sxy * sxy / sxx
    else:
        r = s_yy
    return r if r > 0 else 0.0
