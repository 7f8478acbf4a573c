# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled event kernels; the fast twin of `zrpsim._kernels_py`.

Same call signatures, same semantics, bit-identical arithmetic (plain IEEE
double operations in the same order).  See the pure module for the
documented contracts.
"""

import numpy as np

cimport numpy as cnp
from libc.stdint cimport int64_t, uint64_t, uint8_t, int32_t

cnp.import_array()

BACKEND = "cython"

cdef int64_t SENTINEL = -1

cdef uint64_t _GOLDEN = 0x9E3779B97F4A7C15u
cdef uint64_t _MIX1 = 0xBF58476D1CE4E5B9u
cdef uint64_t _MIX2 = 0x94D049BB133111EBu
cdef double _U53 = 1.0 / 9007199254740992.0


cdef inline uint64_t _mix64(uint64_t z) nogil:
    z = z + _GOLDEN
    z = (z ^ (z >> 30)) * _MIX1
    z = (z ^ (z >> 27)) * _MIX2
    return z ^ (z >> 31)


cdef inline uint64_t _combine(uint64_t h, uint64_t v) nogil:
    return _mix64(h ^ _mix64(v))


cdef inline double _g_eval(int mode, double[::1] table, Py_ssize_t n_table,
                           int64_t k) nogil:
    if k == SENTINEL:
        return 1.0
    if k <= 0:
        return 0.0
    if mode == 0:
        return 1.0
    if mode == 1:
        return k / (k + 1.0)
    if k < n_table:
        return table[k]
    return 1.0


def evolve_zrp(occ, lam, g_mode, g_table, neighbor, gaps, origins, disps, marks,
               start, t_last, t_acc, t_end, acc=None):
    cdef int64_t[::1] occ_v = occ
    cdef double[::1] lam_v = lam
    cdef double[::1] tbl = g_table
    cdef int64_t[:, ::1] nb = neighbor
    cdef double[::1] gaps_v = gaps
    cdef int64_t[::1] org_v = origins
    cdef int64_t[::1] dsp_v = disps
    cdef double[::1] mrk_v = marks
    cdef int mode = g_mode
    cdef Py_ssize_t n = occ_v.shape[0]
    cdef Py_ssize_t n_table = tbl.shape[0]
    cdef Py_ssize_t i = start
    cdef Py_ssize_t n_events = gaps_v.shape[0]
    cdef double tl = t_last
    cdef double ta = t_acc
    cdef double tend = t_end

    cdef bint want_occ = acc is not None and acc.occ_time is not None
    cdef bint want_rate = acc is not None and acc.rate_time is not None
    cdef bint want_counts = acc is not None and acc.attempts is not None
    cdef bint want_empty = acc is not None and acc.emptying is not None
    cdef Py_ssize_t tagged = acc.tagged_idx if acc is not None else -1

    cdef double[::1] occ_time = acc.occ_time if want_occ else None
    cdef double[::1] last_t = acc.last_t if want_occ else None
    cdef double[::1] rate_time_a = acc.rate_time if want_rate else None
    cdef int64_t[::1] attempts = acc.attempts if want_counts else None
    cdef int64_t[::1] fired_c = acc.fired if want_counts else None
    cdef int64_t[::1] emptying = acc.emptying if want_empty else None
    cdef double[::1] hist = acc.tagged_hist if tagged >= 0 else None
    cdef Py_ssize_t hist_cap = hist.shape[0] - 1 if tagged >= 0 else 0
    cdef double[::1] tagged_last_a = acc.tagged_last if tagged >= 0 else None
    cdef double tagged_last = tagged_last_a[0] if tagged >= 0 else 0.0
    cdef double rate_time = rate_time_a[0] if want_rate else 0.0

    cdef double s_rate = 0.0
    cdef Py_ssize_t s
    cdef bint hit = False
    cdef double te, gx, u
    cdef int64_t x, y, kx, ky, kt

    if want_rate:
        for s in range(n):
            s_rate += lam_v[s] * _g_eval(mode, tbl, n_table, occ_v[s])

    while i < n_events:
        te = tl + gaps_v[i]
        if te > tend:
            hit = True
            break
        if want_rate:
            rate_time += s_rate * (te - ta)
        tl = te
        ta = te
        x = org_v[i]
        kx = occ_v[x]
        gx = _g_eval(mode, tbl, n_table, kx)
        if want_counts:
            attempts[x] += 1
        if mrk_v[i] < lam_v[x] * gx:
            if want_counts:
                fired_c[x] += 1
            y = nb[x, dsp_v[i]]
            if y != x:
                ky = occ_v[y]
                if want_occ:
                    occ_time[x] += kx * (te - last_t[x])
                    last_t[x] = te
                    occ_time[y] += ky * (te - last_t[y])
                    last_t[y] = te
                if tagged >= 0 and (x == tagged or y == tagged):
                    kt = occ_v[tagged]
                    hist[kt if 0 <= kt < hist_cap else hist_cap] += te - tagged_last
                    tagged_last = te
                if kx != SENTINEL:
                    occ_v[x] = kx - 1
                    if want_empty and kx == 1:
                        emptying[x] += 1
                if ky != SENTINEL:
                    occ_v[y] = ky + 1
                if want_rate:
                    s_rate += lam_v[x] * (_g_eval(mode, tbl, n_table, occ_v[x]) - gx)
                    s_rate += lam_v[y] * (_g_eval(mode, tbl, n_table, occ_v[y])
                                          - _g_eval(mode, tbl, n_table, ky))
        i += 1

    cdef double t_flush = tend if hit else tl
    if want_rate:
        rate_time += s_rate * (t_flush - ta)
        rate_time_a[0] = rate_time
    if want_occ:
        for s in range(n):
            occ_time[s] += occ_v[s] * (t_flush - last_t[s])
            last_t[s] = t_flush
    if tagged >= 0:
        kt = occ_v[tagged]
        hist[kt if 0 <= kt < hist_cap else hist_cap] += t_flush - tagged_last
        tagged_last_a[0] = t_flush

    return i - start, tl, hit


def evolve_pair(occ_a, lam_a, occ_b, lam_b, g_mode, g_table, neighbor,
                gaps, origins, disps, marks, start, t_last, t_end):
    cdef int64_t[::1] a = occ_a
    cdef int64_t[::1] b = occ_b
    cdef double[::1] la = lam_a
    cdef double[::1] lb = lam_b
    cdef double[::1] tbl = g_table
    cdef int64_t[:, ::1] nb = neighbor
    cdef double[::1] gaps_v = gaps
    cdef int64_t[::1] org_v = origins
    cdef int64_t[::1] dsp_v = disps
    cdef double[::1] mrk_v = marks
    cdef int mode = g_mode
    cdef Py_ssize_t n_table = tbl.shape[0]
    cdef Py_ssize_t i = start
    cdef Py_ssize_t n_events = gaps_v.shape[0]
    cdef double tl = t_last
    cdef double tend = t_end
    cdef int64_t violations = 0
    cdef bint hit = False
    cdef double te, u
    cdef int64_t x, y, ka, kb
    cdef Py_ssize_t r
    cdef int64_t s

    while i < n_events:
        te = tl + gaps_v[i]
        if te > tend:
            hit = True
            break
        tl = te
        x = org_v[i]
        y = nb[x, dsp_v[i]]
        u = mrk_v[i]
        if y != x:
            ka = a[x]
            if u < la[x] * _g_eval(mode, tbl, n_table, ka):
                if ka != SENTINEL:
                    a[x] = ka - 1
                if a[y] != SENTINEL:
                    a[y] += 1
            kb = b[x]
            if u < lb[x] * _g_eval(mode, tbl, n_table, kb):
                if kb != SENTINEL:
                    b[x] = kb - 1
                if b[y] != SENTINEL:
                    b[y] += 1
            for r in range(2):
                s = x if r == 0 else y
                if b[s] != SENTINEL and (a[s] == SENTINEL or a[s] > b[s]):
                    violations += 1
        i += 1

    return i - start, tl, hit, violations


def evolve_coupled(occ_a, occ_b, lam, g_mode, g_table, neighbor,
                   gaps, origins, disps, marks, start, t_last, t_end,
                   probe_slot, last_positive, counters):
    cdef int64_t[::1] a = occ_a
    cdef int64_t[::1] b = occ_b
    cdef double[::1] lam_v = lam
    cdef double[::1] tbl = g_table
    cdef int64_t[:, ::1] nb = neighbor
    cdef double[::1] gaps_v = gaps
    cdef int64_t[::1] org_v = origins
    cdef int64_t[::1] dsp_v = disps
    cdef double[::1] mrk_v = marks
    cdef int32_t[::1] slot = probe_slot
    cdef double[::1] lp = last_positive
    cdef int64_t[::1] cnt = counters
    cdef int mode = g_mode
    cdef Py_ssize_t n_table = tbl.shape[0]
    cdef Py_ssize_t i = start
    cdef Py_ssize_t n_events = gaps_v.shape[0]
    cdef double tl = t_last
    cdef double tend = t_end
    cdef int64_t n_coal = cnt[0]
    cdef int64_t n_abs = cnt[1]
    cdef bint hit = False
    cdef double te, u
    cdef int64_t x, y, ka, kb, d_y
    cdef bint fired_a, fired_b, pre_x, pre_y

    while i < n_events:
        te = tl + gaps_v[i]
        if te > tend:
            hit = True
            break
        tl = te
        x = org_v[i]
        y = nb[x, dsp_v[i]]
        u = mrk_v[i]
        if y != x:
            ka = a[x]
            kb = b[x]
            fired_a = u < lam_v[x] * _g_eval(mode, tbl, n_table, ka)
            fired_b = u < lam_v[x] * _g_eval(mode, tbl, n_table, kb)
            if fired_a or fired_b:
                pre_x = (ka != kb and ka != SENTINEL)
                pre_y = (a[y] != b[y] and a[y] != SENTINEL)
                if fired_a != fired_b:
                    if a[y] == SENTINEL:
                        n_abs += 1
                    else:
                        d_y = a[y] - b[y]
                        if (fired_a and d_y < 0) or (fired_b and d_y > 0):
                            n_coal += 1
                if fired_a:
                    if ka != SENTINEL:
                        a[x] = ka - 1
                    if a[y] != SENTINEL:
                        a[y] += 1
                if fired_b:
                    if kb != SENTINEL:
                        b[x] = kb - 1
                    if b[y] != SENTINEL:
                        b[y] += 1
                if slot[x] >= 0 and (pre_x or (a[x] != b[x] and a[x] != SENTINEL)):
                    lp[slot[x]] = te
                if slot[y] >= 0 and (pre_y or (a[y] != b[y] and a[y] != SENTINEL)):
                    lp[slot[y]] = te
        i += 1

    cnt[0] = n_coal
    cnt[1] = n_abs
    return i - start, tl, hit


def run_walks(starts, env_seeds, walk_seeds, disp, cdf, theta, max_steps,
              out_tau, out_censored, out_first0, out_last0, out_visits0,
              out_distinct):
    cdef int64_t[:, ::1] starts_v = starts
    cdef uint64_t[::1] env_v = env_seeds
    cdef uint64_t[::1] wseed_v = walk_seeds
    cdef int64_t[:, ::1] disp_v = disp
    cdef double[::1] cdf_v = cdf
    cdef double th = theta
    cdef Py_ssize_t msteps = max_steps
    cdef int64_t[::1] o_tau = out_tau
    cdef uint8_t[::1] o_cen = out_censored
    cdef int64_t[::1] o_first = out_first0
    cdef int64_t[::1] o_last = out_last0
    cdef int64_t[::1] o_vis = out_visits0
    cdef int64_t[::1] o_dis = out_distinct

    cdef Py_ssize_t n = starts_v.shape[0]
    cdef Py_ssize_t d = starts_v.shape[1]
    cdef Py_ssize_t w, ax, step, j
    cdef uint64_t env_seed, walk_seed, h
    cdef double u
    cdef int64_t tau, distinct, visits0, first0, last0
    cdef bint at_origin, fresh
    cdef int64_t pos[8]
    cdef set visited
    cdef object key

    if d > 8:
        raise ValueError("walk kernel supports dimension <= 8")

    for w in range(n):
        for ax in range(d):
            pos[ax] = starts_v[w, ax]
        env_seed = env_v[w]
        walk_seed = wseed_v[w]
        at_origin = True
        for ax in range(d):
            if pos[ax] != 0:
                at_origin = False
                break
        visits0 = 0
        first0 = -1
        last0 = -1
        tau = -1
        distinct = 0
        visited = set()
        h = _mix64(env_seed)
        for ax in range(d):
            h = _combine(h, <uint64_t> pos[ax])
        if ((h >> 11) + 1) * _U53 <= th:
            tau = 0
            if at_origin:
                visits0 = 1
                first0 = 0
                last0 = 0
        else:
            distinct = 1
            key = pos[0] if d == 1 else tuple([pos[ax] for ax in range(d)])
            visited.add(key)
            if at_origin:
                visits0 = 1
                first0 = 0
                last0 = 0
            step = 0
            while step < msteps:
                step += 1
                u = (_combine(walk_seed, <uint64_t> step) >> 11) * _U53
                j = 0
                while u >= cdf_v[j]:
                    j += 1
                for ax in range(d):
                    pos[ax] += disp_v[j, ax]
                key = pos[0] if d == 1 else tuple([pos[ax] for ax in range(d)])
                fresh = key not in visited
                at_origin = True
                for ax in range(d):
                    if pos[ax] != 0:
                        at_origin = False
                        break
                if fresh:
                    h = _mix64(env_seed)
                    for ax in range(d):
                        h = _combine(h, <uint64_t> pos[ax])
                    if ((h >> 11) + 1) * _U53 <= th:
                        tau = step
                        if at_origin:
                            visits0 += 1
                            if first0 < 0:
                                first0 = step
                            last0 = step
                        break
                    visited.add(key)
                    distinct += 1
                if at_origin:
                    visits0 += 1
                    if first0 < 0:
                        first0 = step
                    last0 = step

        if tau < 0:
            o_tau[w] = msteps
            o_cen[w] = 1
        else:
            o_tau[w] = tau
            o_cen[w] = 0
        o_first[w] = first0
        o_last[w] = last0
        o_vis[w] = visits0
        o_dis[w] = distinct
