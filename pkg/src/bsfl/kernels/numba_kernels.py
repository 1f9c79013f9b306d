"""Loop-form kernels compiled with numba.

Energies travel as ``(kind, value, tie)`` triples: ``kind`` is 1 when the
set's minimum score is the unobserved sentinel (``+inf``), ``value`` is
``min + G`` for finite sets and ``G`` otherwise, and ``tie`` is ``G``, the
scaled g-sum. Triples compare lexicographically.
"""
import math

import numpy as np
from numba import njit


@njit(cache=True)
def _greater(k1, v1, t1, k2, v2, t2):
    if k1 != k2:
        return k1 > k2
    if v1 != v2:
        return v1 > v2
    return t1 > t2


@njit(cache=True)
def set_energy(members, scores, g, coef):
    mn = np.inf
    total = 0.0
    for i in range(members.shape[0]):
        k = members[i]
        if scores[k] < mn:
            mn = scores[k]
        total += g[k]
    gterm = coef * total
    if math.isinf(mn):
        return 1, gterm, gterm
    return 0, mn + gterm, gterm


@njit(cache=True)
def best_subset(scores, g, coef, avail, m):
    """Lexicographically first energy-maximal m-subset of ``avail`` (sorted ids)."""
    n = avail.shape[0]
    pos = np.arange(m)
    pmin = np.empty(m)
    psum = np.empty(m)
    best = np.empty(m, dtype=np.int64)
    bk, bv, bt = -1, -np.inf, -np.inf
    start = 0
    while True:
        for j in range(start, m):
            k = avail[pos[j]]
            if j == 0:
                pmin[0] = scores[k]
                psum[0] = g[k]
            else:
                pmin[j] = min(pmin[j - 1], scores[k])
                psum[j] = psum[j - 1] + g[k]
        gterm = coef * psum[m - 1]
        if math.isinf(pmin[m - 1]):
            ck, cv = 1, gterm
        else:
            ck, cv = 0, pmin[m - 1] + gterm
        if _greater(ck, cv, gterm, bk, bv, bt):
            bk, bv, bt = ck, cv, gterm
            for j in range(m):
                best[j] = avail[pos[j]]
        i = m - 1
        while i >= 0 and pos[i] == n - m + i:
            i -= 1
        if i < 0:
            break
        pos[i] += 1
        for j in range(i + 1, m):
            pos[j] = pos[j - 1] + 1
        start = i
    return best, bk, bv, bt


@njit(cache=True)
def _two_smallest(members, vals):
    a = np.inf
    b = np.inf
    for i in range(members.shape[0]):
        v = vals[members[i]]
        if v < a:
            b = a
            a = v
        elif v < b:
            b = v
    return a, b


@njit(cache=True)
def _rest_min(v_out, a, b):
    # min over S minus one copy of v_out, given the two smallest values a <= b of S
    if v_out <= a:
        return b
    return a


@njit(cache=True)
def _lw_ok(o, j, scores, g, sa, sb, ga, gb):
    if scores[o] <= sa or g[o] <= ga:
        return True
    if scores[j] <= _rest_min(scores[o], sa, sb):
        return True
    return g[j] <= _rest_min(g[o], ga, gb)


@njit(cache=True)
def anneal(scores, g, coef, members0, outside0, u_pick, u_accept, d, lightweight, surrogate_gap):
    """Metropolis chain with logarithmic cooling, best-so-far tracking.

    ``members0``/``outside0`` are sorted client ids. Step 0 is the initial
    state; step ``i >= 1`` proposes a uniform neighbour at ``T = d/log(i+1)``.
    """
    steps = u_pick.shape[0]
    m = members0.shape[0]
    r = outside0.shape[0]
    mem = members0.copy()
    out = outside0.copy()
    cand = np.empty(m, dtype=np.int64)

    cur_kind = np.empty(steps, dtype=np.int8)
    cur_val = np.empty(steps)
    best_kind = np.empty(steps, dtype=np.int8)
    best_val = np.empty(steps)
    temps = np.empty(steps)

    ck, cv, ct = set_energy(mem, scores, g, coef)
    bk, bv, bt = ck, cv, ct
    best = mem.copy()
    cur_kind[0] = ck
    cur_val[0] = cv
    best_kind[0] = bk
    best_val[0] = bv
    temps[0] = np.inf

    for step in range(1, steps):
        temp = d / math.log(step + 1.0)
        temps[step] = temp
        total = m * r
        oi = -1
        ji = -1
        if total > 0:
            if lightweight:
                sa, sb = _two_smallest(mem, scores)
                ga, gb = _two_smallest(mem, g)
                count = 0
                for a in range(m):
                    for b in range(r):
                        if _lw_ok(mem[a], out[b], scores, g, sa, sb, ga, gb):
                            count += 1
                target = int(u_pick[step] * count)
                seen = 0
                for a in range(m):
                    if oi >= 0:
                        break
                    for b in range(r):
                        if _lw_ok(mem[a], out[b], scores, g, sa, sb, ga, gb):
                            if seen == target:
                                oi = a
                                ji = b
                                break
                            seen += 1
            else:
                target = int(u_pick[step] * total)
                oi = target // r
                ji = target % r
        if oi >= 0:
            for a in range(m):
                cand[a] = mem[a]
            cand[oi] = out[ji]
            # energies are always summed in ascending id order
            cand.sort()
            nk, nv, nt = set_energy(cand, scores, g, coef)
            if not _greater(ck, cv, ct, nk, nv, nt):
                accept = True
            else:
                if ck == 1 and nk == 0:
                    diff = -surrogate_gap
                else:
                    diff = nv - cv
                accept = u_accept[step] < math.exp(diff / temp)
            if accept:
                out[ji] = mem[oi]
                mem[:] = cand
                out.sort()
                ck, cv, ct = nk, nv, nt
                if _greater(ck, cv, ct, bk, bv, bt):
                    bk, bv, bt = ck, cv, ct
                    best[:] = mem
        cur_kind[step] = ck
        cur_val[step] = cv
        best_kind[step] = bk
        best_val[step] = bv
    return best, bk, bv, bt, cur_kind, cur_val, best_kind, best_val, temps
