"""Vectorised numpy twins of ``numba_kernels`` (same signatures, same results)."""
import functools
import itertools
import math

import numpy as np


def _greater(k1, v1, t1, k2, v2, t2):
    return (k1, v1, t1) > (k2, v2, t2)


def set_energy(members, scores, g, coef):
    mn = np.inf
    total = 0.0
    for k in members:
        mn = min(mn, scores[k])
        total += g[k]
    gterm = coef * total
    if math.isinf(mn):
        return 1, gterm, gterm
    return 0, mn + gterm, gterm


@functools.lru_cache(maxsize=16)
def _combinations(n, m):
    if m == 0:
        return np.zeros((1, 0), dtype=np.int64)
    combos = np.fromiter(itertools.chain.from_iterable(itertools.combinations(range(n), m)),
                         dtype=np.int64)
    return combos.reshape(-1, m)


def best_subset(scores, g, coef, avail, m):
    ids = np.asarray(avail, dtype=np.int64)[_combinations(len(avail), m)]
    s = scores[ids]
    gv = g[ids]
    mn = s[:, 0].copy()
    acc = gv[:, 0].copy()
    for j in range(1, m):
        mn = np.minimum(mn, s[:, j])
        acc = acc + gv[:, j]
    gterm = coef * acc
    kind = np.isinf(mn).astype(np.int64)
    with np.errstate(invalid="ignore"):
        value = np.where(kind == 1, gterm, mn + gterm)
    # first index of the lexicographic (kind, value, tie) maximum
    keep = kind == kind.max()
    keep &= value == value[keep].max()
    keep &= gterm == gterm[keep].max()
    i = int(np.argmax(keep))
    return ids[i].copy(), int(kind[i]), float(value[i]), float(gterm[i])


def lightweight_mask(mem, out, scores, g):
    """Boolean ``(len(mem), len(out))`` matrix: is swapping ``mem[a]`` for ``out[b]`` allowed."""
    def rest_min(vals):
        v = vals[mem]
        srt = np.sort(v)
        a = srt[0]
        b = srt[1] if len(srt) > 1 else np.inf
        # min over S without member a: b if that member holds the smallest value
        return a, np.where(v <= a, b, a)

    sa, s_rest = rest_min(scores)
    ga, g_rest = rest_min(g)
    left = (scores[mem] <= sa) | (g[mem] <= ga)
    right_s = scores[out][None, :] <= s_rest[:, None]
    right_g = g[out][None, :] <= g_rest[:, None]
    return left[:, None] | right_s | right_g


def anneal(scores, g, coef, members0, outside0, u_pick, u_accept, d, lightweight, surrogate_gap):
    steps = u_pick.shape[0]
    m = members0.shape[0]
    r = outside0.shape[0]
    mem = np.sort(members0.copy())
    out = np.sort(outside0.copy())

    cur_kind = np.empty(steps, dtype=np.int8)
    cur_val = np.empty(steps)
    best_kind = np.empty(steps, dtype=np.int8)
    best_val = np.empty(steps)
    temps = np.empty(steps)

    ck, cv, ct = set_energy(mem, scores, g, coef)
    bk, bv, bt = ck, cv, ct
    best = mem.copy()
    cur_kind[0], cur_val[0], best_kind[0], best_val[0], temps[0] = ck, cv, bk, bv, np.inf

    for step in range(1, steps):
        temp = d / math.log(step + 1.0)
        temps[step] = temp
        pair = None
        if m * r > 0:
            if lightweight:
                flat = np.flatnonzero(lightweight_mask(mem, out, scores, g))
                target = int(u_pick[step] * len(flat))
                pair = divmod(int(flat[target]), r)
            else:
                pair = divmod(int(u_pick[step] * (m * r)), r)
        if pair is not None:
            oi, ji = pair
            cand = mem.copy()
            cand[oi] = out[ji]
            cand.sort()
            nk, nv, nt = set_energy(cand, scores, g, coef)
            if not _greater(ck, cv, ct, nk, nv, nt):
                accept = True
            else:
                diff = -surrogate_gap if (ck == 1 and nk == 0) else nv - cv
                accept = u_accept[step] < math.exp(diff / temp)
            if accept:
                out[ji] = mem[oi]
                mem = cand
                out.sort()
                ck, cv, ct = nk, nv, nt
                if _greater(ck, cv, ct, bk, bv, bt):
                    bk, bv, bt = ck, cv, ct
                    best = mem.copy()
        cur_kind[step], cur_val[step] = ck, cv
        best_kind[step], best_val[step] = bk, bv
    return best, bk, bv, bt, cur_kind, cur_val, best_kind, best_val, temps
