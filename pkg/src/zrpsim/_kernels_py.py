"""Pure-Python event kernels.

Reference implementation of the hot loops; `zrpsim._kernels_cy` is the
compiled twin with the same call signatures and bit-identical results
(same IEEE double operations in the same order).  Drivers in
`zrpsim.dynamics` / `zrpsim.coupling` / `zrpsim.walkers` pick a backend
through `zrpsim.kernels`.

Shared conventions:

* occupancies are int64 with -1 as the "infinitely many particles"
  sentinel; the rate profile g evaluates to 1 there and increments or
  decrements leave the sentinel unchanged;
* an event fires iff its uniform mark is strictly below
  lam[origin] * g(occ[origin]);
* event times accumulate sequentially (t += gap) in double precision;
* a kernel call consumes events until the batch is exhausted or the next
  event would land beyond t_end, and reports which happened.
"""

from __future__ import annotations

from .rng import MASK64, combine, key_hash, uniform_halfopen, uniform_open_low

BACKEND = "python"

SENTINEL = -1


def _g_scalar(mode: int, table, k: int) -> float:
    if k == SENTINEL:
        return 1.0
    if k <= 0:
        return 0.0
    if mode == 0:
        return 1.0
    if mode == 1:
        return k / (k + 1.0)
    return table[k] if k < len(table) else 1.0


def evolve_zrp(occ, lam, g_mode, g_table, neighbor, gaps, origins, disps, marks,
               start, t_last, t_acc, t_end, acc=None):
    """Apply events to one configuration; returns (consumed, t_last, hit_tend).

    `acc`, when given, carries optional accumulator arrays (see
    dynamics.EvolveAccumulators); they are flushed to t_end when the call
    stops on the time horizon, else to the last consumed event time.
    """
    n = len(occ)
    k_disp = neighbor.shape[1]
    occ_l = occ.tolist()
    lam_l = lam.tolist()
    tbl = g_table.tolist()
    nb = neighbor.ravel().tolist()
    gaps_l = gaps.tolist()
    org_l = origins.tolist()
    dsp_l = disps.tolist()
    mrk_l = marks.tolist()
    mode = int(g_mode)

    want_occ = acc is not None and acc.occ_time is not None
    want_rate = acc is not None and acc.rate_time is not None
    want_counts = acc is not None and acc.attempts is not None
    want_empty = acc is not None and acc.emptying is not None
    tagged = acc.tagged_idx if acc is not None else -1
    occ_time = acc.occ_time.tolist() if want_occ else None
    last_t = acc.last_t.tolist() if want_occ else None
    rate_time = float(acc.rate_time[0]) if want_rate else 0.0
    attempts = acc.attempts.tolist() if want_counts else None
    fired_c = acc.fired.tolist() if want_counts else None
    emptying = acc.emptying.tolist() if want_empty else None
    hist = acc.tagged_hist.tolist() if tagged >= 0 else None
    hist_cap = len(hist) - 1 if hist is not None else 0
    tagged_last = float(acc.tagged_last[0]) if tagged >= 0 else 0.0

    s_rate = 0.0
    if want_rate:
        for i in range(n):
            s_rate += lam_l[i] * _g_scalar(mode, tbl, occ_l[i])

    hit = False
    i = start
    n_events = len(gaps_l)
    while i < n_events:
        te = t_last + gaps_l[i]
        if te > t_end:
            hit = True
            break
        if want_rate:
            rate_time += s_rate * (te - t_acc)
        t_last = te
        t_acc = te
        x = org_l[i]
        kx = occ_l[x]
        gx = _g_scalar(mode, tbl, kx)
        if want_counts:
            attempts[x] += 1
        if mrk_l[i] < lam_l[x] * gx:
            if want_counts:
                fired_c[x] += 1
            y = nb[x * k_disp + dsp_l[i]]
            if y != x:
                ky = occ_l[y]
                if want_occ:
                    occ_time[x] += kx * (te - last_t[x])
                    last_t[x] = te
                    occ_time[y] += ky * (te - last_t[y])
                    last_t[y] = te
                if hist is not None and (x == tagged or y == tagged):
                    kt = occ_l[tagged]
                    hist[kt if 0 <= kt < hist_cap else hist_cap] += te - tagged_last
                    tagged_last = te
                if kx != SENTINEL:
                    occ_l[x] = kx - 1
                    if want_empty and kx == 1:
                        emptying[x] += 1
                if ky != SENTINEL:
                    occ_l[y] = ky + 1
                if want_rate:
                    s_rate += lam_l[x] * (_g_scalar(mode, tbl, occ_l[x]) - gx)
                    s_rate += lam_l[y] * (_g_scalar(mode, tbl, occ_l[y])
                                          - _g_scalar(mode, tbl, ky))
        i += 1

    t_flush = t_end if hit else t_last
    if want_rate:
        rate_time += s_rate * (t_flush - t_acc)
        acc.rate_time[0] = rate_time
    if want_occ:
        for s in range(n):
            occ_time[s] += occ_l[s] * (t_flush - last_t[s])
            last_t[s] = t_flush
        acc.occ_time[:] = occ_time
        acc.last_t[:] = last_t
    if hist is not None:
        kt = occ_l[tagged]
        hist[kt if 0 <= kt < hist_cap else hist_cap] += t_flush - tagged_last
        acc.tagged_hist[:] = hist
        acc.tagged_last[0] = t_flush
    if want_counts:
        acc.attempts[:] = attempts
        acc.fired[:] = fired_c
    if want_empty:
        acc.emptying[:] = emptying
    occ[:] = occ_l
    return i - start, t_last, hit


def evolve_pair(occ_a, lam_a, occ_b, lam_b, g_mode, g_table, neighbor,
                gaps, origins, disps, marks, start, t_last, t_end):
    """Drive two configurations with the same events and marks.

    Marginal a uses lam_a, marginal b uses lam_b.  After every event the
    touched sites are checked for order violations a > b (a sentinel in b
    dominates everything).  Returns (consumed, t_last, hit_tend, violations).
    """
    k_disp = neighbor.shape[1]
    a = occ_a.tolist()
    b = occ_b.tolist()
    la = lam_a.tolist()
    lb = lam_b.tolist()
    tbl = g_table.tolist()
    nb = neighbor.ravel().tolist()
    gaps_l = gaps.tolist()
    org_l = origins.tolist()
    dsp_l = disps.tolist()
    mrk_l = marks.tolist()
    mode = int(g_mode)

    violations = 0
    hit = False
    i = start
    n_events = len(gaps_l)
    while i < n_events:
        te = t_last + gaps_l[i]
        if te > t_end:
            hit = True
            break
        t_last = te
        x = org_l[i]
        y = nb[x * k_disp + dsp_l[i]]
        u = mrk_l[i]
        if y != x:
            ka = a[x]
            if u < la[x] * _g_scalar(mode, tbl, ka):
                if ka != SENTINEL:
                    a[x] = ka - 1
                if a[y] != SENTINEL:
                    a[y] += 1
            kb = b[x]
            if u < lb[x] * _g_scalar(mode, tbl, kb):
                if kb != SENTINEL:
                    b[x] = kb - 1
                if b[y] != SENTINEL:
                    b[y] += 1
            for s in (x, y):
                if b[s] != SENTINEL and (a[s] == SENTINEL or a[s] > b[s]):
                    violations += 1
        i += 1

    occ_a[:] = a
    occ_b[:] = b
    return i - start, t_last, hit, violations


def evolve_coupled(occ_a, occ_b, lam, g_mode, g_table, neighbor,
                   gaps, origins, disps, marks, start, t_last, t_end,
                   probe_slot, last_positive, counters):
    """Basic coupling of two same-environment configurations.

    Both marginals share every event and mark, so a site's discrepancy
    content is |a - b|.  Tracks, per probe site, the last event time at
    which the site held any discrepancy, and counts coalescence events
    (a one-sided arrival meeting the opposite type) and absorptions
    (a one-sided arrival landing on a sentinel site).
    Returns (consumed, t_last, hit_tend).
    """
    k_disp = neighbor.shape[1]
    a = occ_a.tolist()
    b = occ_b.tolist()
    lam_l = lam.tolist()
    tbl = g_table.tolist()
    nb = neighbor.ravel().tolist()
    gaps_l = gaps.tolist()
    org_l = origins.tolist()
    dsp_l = disps.tolist()
    mrk_l = marks.tolist()
    slot = probe_slot.tolist()
    lp = last_positive.tolist()
    mode = int(g_mode)
    n_coal = int(counters[0])
    n_abs = int(counters[1])

    hit = False
    i = start
    n_events = len(gaps_l)
    while i < n_events:
        te = t_last + gaps_l[i]
        if te > t_end:
            hit = True
            break
        t_last = te
        x = org_l[i]
        y = nb[x * k_disp + dsp_l[i]]
        u = mrk_l[i]
        if y != x:
            ka = a[x]
            kb = b[x]
            fired_a = u < lam_l[x] * _g_scalar(mode, tbl, ka)
            fired_b = u < lam_l[x] * _g_scalar(mode, tbl, kb)
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

    occ_a[:] = a
    occ_b[:] = b
    last_positive[:] = lp
    counters[0] = n_coal
    counters[1] = n_abs
    return i - start, t_last, hit


def run_walks(starts, env_seeds, walk_seeds, disp, cdf, theta, max_steps,
              out_tau, out_censored, out_first0, out_last0, out_visits0,
              out_distinct):
    """Independent discrete-time kernel walks absorbed at slow sites.

    Site slowness is a pure function of (env_seed, coordinates): the site
    uniform is <= theta.  Jumps are driven by the counter-based stream of
    (walk_seed, step).  Per walk reports: absorption step tau (max_steps if
    censored), origin-visit statistics on steps 0..tau inclusive, and the
    number of distinct sites explored strictly before absorption.
    """
    n, d = starts.shape
    n_disp = len(cdf)
    disp_l = disp.tolist()
    cdf_l = cdf.tolist()
    starts_l = starts.tolist()
    env_l = env_seeds.tolist()
    wseed_l = walk_seeds.tolist()

    for w in range(n):
        pos = list(starts_l[w])
        env_seed = env_l[w] & MASK64
        walk_seed = wseed_l[w] & MASK64
        at_origin = all(c == 0 for c in pos)
        visits0 = 0
        first0 = -1
        last0 = -1
        tau = -1
        distinct = 0
        visited = set()
        if uniform_open_low(key_hash(env_seed, *pos)) <= theta:
            tau = 0
            if at_origin:
                visits0 = 1
                first0 = 0
                last0 = 0
        else:
            distinct = 1
            visited.add(pos[0] if d == 1 else tuple(pos))
            if at_origin:
                visits0 = 1
                first0 = 0
                last0 = 0
            step = 0
            while step < max_steps:
                step += 1
                u = uniform_halfopen(combine(walk_seed, step))
                j = 0
                while u >= cdf_l[j]:
                    j += 1
                move = disp_l[j]
                for ax in range(d):
                    pos[ax] += move[ax]
                key = pos[0] if d == 1 else tuple(pos)
                fresh = key not in visited
                if fresh and uniform_open_low(key_hash(env_seed, *pos)) <= theta:
                    tau = step
                    if all(c == 0 for c in pos):
                        visits0 += 1
                        if first0 < 0:
                            first0 = step
                        last0 = step
                    break
                if fresh:
                    visited.add(key)
                    distinct += 1
                if all(c == 0 for c in pos):
                    visits0 += 1
                    if first0 < 0:
                        first0 = step
                    last0 = step
        if tau < 0:
            out_tau[w] = max_steps
            out_censored[w] = 1
        else:
            out_tau[w] = tau
            out_censored[w] = 0
        out_first0[w] = first0
        out_last0[w] = last0
        out_visits0[w] = visits0
        out_distinct[w] = distinct
