"""Solvers for the per-round subset argmax.

All three solvers maximise the same set energy::

    E(S) = min_{k in S} s[k] + (alpha / m) * sum_{k in S} g[k]

where ``s`` holds UCB indices (or true mean speeds for the genie) and an
unobserved client carries the ``+inf`` sentinel score.
"""
from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from .core import Energy, InvalidInput, SelectionSet
from .kernels import numpy_kernels

DEFAULT_ENUMERATION_CAP = 2_000_000


class SolverRefused(InvalidInput):
    """The instance is too large for exhaustive enumeration."""


@dataclass(frozen=True)
class ScoreTable:
    scores: np.ndarray      # +inf marks an unobserved client
    g: np.ndarray
    alpha: float
    m: int
    available: np.ndarray   # sorted client ids

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        g = np.asarray(self.g, dtype=np.float64)
        avail = np.unique(np.asarray(self.available, dtype=np.int64))
        if scores.shape != g.shape:
            raise InvalidInput("scores and g must have the same length")
        if avail.size and (avail[0] < 0 or avail[-1] >= scores.shape[0]):
            raise InvalidInput("available ids out of range")
        if not 1 <= self.m <= avail.size:
            raise InvalidInput(f"need 1 <= m <= |available|, got m={self.m}, |available|={avail.size}")
        if np.any(np.isnan(scores[avail])) or np.any(~np.isfinite(g[avail])):
            raise InvalidInput("scores and g must be defined for every available client")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "available", avail)

    @classmethod
    def build(cls, scores, g, alpha, m, available=None):
        if available is None:
            available = np.arange(len(scores))
        return cls(scores, g, float(alpha), int(m), available)

    @property
    def coef(self) -> float:
        return self.alpha / self.m

    def num_states(self) -> int:
        return math.comb(self.available.size, self.m)


class Solution(NamedTuple):
    selection: SelectionSet
    energy: Energy


def _energy(kind, value, tie) -> Energy:
    return Energy(int(kind), float(value), float(tie))


def energy(selection: SelectionSet, table: ScoreTable) -> Energy:
    members = selection.as_array()
    if not np.isin(members, table.available).all():
        raise InvalidInput(f"{selection} is not a subset of the available clients")
    return _energy(*numpy_kernels.set_energy(members, table.scores, table.g, table.coef))


def solve_exhaustive(table: ScoreTable, cap: int = DEFAULT_ENUMERATION_CAP) -> Solution:
    """Exact argmax by enumerating every m-subset in lexicographic order."""
    n_states = table.num_states()
    if n_states > cap:
        raise SolverRefused(
            f"exhaustive search over C({table.available.size},{table.m}) = {n_states} sets exceeds "
            f"the cap of {cap}; use the 'alsa' or 'sa' annealing solver instead"
        )
    best, k, v, t = kernels.best_subset(table.scores, table.g, table.coef, table.available, table.m)
    return Solution(SelectionSet(tuple(int(x) for x in best)), _energy(k, v, t))


def _outside(selection: SelectionSet, table: ScoreTable) -> np.ndarray:
    return np.setdiff1d(table.available, selection.as_array())


def neighbors_classic(selection: SelectionSet, table: ScoreTable) -> list[SelectionSet]:
    """Every available set sharing ``m - 1`` members with ``selection``."""
    out = _outside(selection, table)
    return [selection.swap(o, int(j)) for o in selection for j in out]


def neighbors_lightweight(selection: SelectionSet, table: ScoreTable) -> list[SelectionSet]:
    """Single swaps in which the removed client is a score- or g-minimiser of
    ``selection``, or the added client is one of the new set."""
    mem = selection.as_array()
    out = _outside(selection, table)
    if out.size == 0:
        return []
    mask = numpy_kernels.lightweight_mask(mem, out, table.scores, table.g)
    return [selection.swap(int(mem[a]), int(out[b])) for a, b in zip(*np.nonzero(mask))]


def _argmin_set(members, vals) -> set[int]:
    lo = min(vals[k] for k in members)
    return {k for k in members if vals[k] <= lo}


def is_lightweight_neighbor(s: SelectionSet, u: SelectionSet, table: ScoreTable) -> bool:
    removed = set(s) - set(u)
    added = set(u) - set(s)
    if len(removed) != 1 or len(added) != 1:
        return False
    (o,), (j,) = removed, added
    return (
        o in _argmin_set(s, table.scores) or o in _argmin_set(s, table.g)
        or j in _argmin_set(u, table.scores) or j in _argmin_set(u, table.g)
    )


# ---------------------------------------------------------------- annealing


@dataclass(frozen=True)
class AnnealerConfig:
    steps: int
    d: float | None = None              # None: 2 * alpha + 1
    neighborhood: str = "lightweight"   # or "classic"
    surrogate_gap: float | None = None  # None: 1000 * d

    def __post_init__(self):
        if self.steps < 1:
            raise InvalidInput(f"annealer needs at least one step, got {self.steps}")
        if self.d is not None and not self.d > 0:
            raise InvalidInput(f"temperature numerator d must be positive, got {self.d}")
        if self.neighborhood not in ("classic", "lightweight"):
            raise InvalidInput(f"unknown neighborhood {self.neighborhood!r}")

    def temperature_numerator(self, alpha: float) -> float:
        return self.d if self.d is not None else 2.0 * alpha + 1.0


@dataclass(frozen=True)
class AnnealTrace:
    current_kind: np.ndarray
    current: np.ndarray
    best_kind: np.ndarray
    best: np.ndarray
    temperature: np.ndarray

    def __len__(self):
        return self.current.shape[0]


class AnnealResult(NamedTuple):
    selection: SelectionSet
    energy: Energy
    trace: AnnealTrace


def anneal(table: ScoreTable, config: AnnealerConfig, rng: np.random.Generator, backend=None) -> AnnealResult:
    """Run one chain from a uniformly random initial m-subset; return the best state visited."""
    k_mod = backend if backend is not None else kernels
    d = config.temperature_numerator(table.alpha)
    gap = config.surrogate_gap if config.surrogate_gap is not None else 1000.0 * d
    start = np.sort(rng.choice(table.available, size=table.m, replace=False)).astype(np.int64)
    outside = np.setdiff1d(table.available, start).astype(np.int64)
    u_pick = rng.random(config.steps)
    u_accept = rng.random(config.steps)
    best, bk, bv, bt, ck, cv, bks, bvs, temps = k_mod.anneal(
        table.scores, table.g, table.coef, start, outside, u_pick, u_accept,
        float(d), config.neighborhood == "lightweight", float(gap),
    )
    trace = AnnealTrace(ck, _as_values(ck, cv), bks, _as_values(bks, bvs), temps)
    return AnnealResult(SelectionSet(tuple(int(x) for x in best)), _energy(bk, bv, bt), trace)


def _as_values(kind, value):
    return np.where(kind == 1, np.inf, value)


def write_trace_csv(trace: AnnealTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "current_energy", "best_energy", "temperature"])
        for i in range(len(trace)):
            w.writerow([i, repr(float(trace.current[i])), repr(float(trace.best[i])),
                        repr(float(trace.temperature[i]))])


# ---------------------------------------------------------------- paths


@dataclass(frozen=True)
class PathResult:
    path: list[SelectionSet]
    method: str   # "two_phase", "bfs" or "canonical"

    @property
    def used_fallback(self) -> bool:
        return self.method != "two_phase"


def _argmin_id(members, vals):
    return min(members, key=lambda k: (vals[k], k))


def _two_phase(start, optimum, table, max_len):
    """Swap out a score- or g-minimiser lying outside the optimum for the best
    missing optimum member, alternating the two criteria. ``None`` on a stall."""
    path = [start]
    cur = start
    target = set(optimum)
    while cur != optimum and len(path) <= max_len:
        missing = [k for k in optimum if k not in cur]
        moved = False
        for vals in (table.scores, table.g):
            lows = sorted(k for k in _argmin_set(cur, vals) if k not in target)
            if lows:
                into = max(missing, key=lambda k: (vals[k], -k))
                cur = cur.swap(lows[0], into)
                path.append(cur)
                moved = True
                break
        if not moved:
            return None
    return path if cur == optimum else None


def _bfs(start, optimum, table, state_cap):
    if table.num_states() > state_cap:
        return None
    parent = {start: None}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        if s == optimum:
            break
        for u in neighbors_lightweight(s, table):
            if u not in parent:
                parent[u] = s
                queue.append(u)
    if optimum not in parent:
        return None
    path = [optimum]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    return path[::-1]


def _climb(start, table):
    """Route to the top-m set under (score, -id) by always evicting the worst member."""
    rank = lambda k: (table.scores[k], -k)  # noqa: E731
    path = [start]
    cur = start
    while True:
        worst = min(cur, key=rank)
        outside = [int(k) for k in table.available if k not in cur]
        if not outside:
            return path
        best_out = max(outside, key=rank)
        if rank(best_out) <= rank(worst):
            return path
        cur = cur.swap(worst, best_out)
        path.append(cur)


def _canonical(start, optimum, table):
    up = _climb(start, table)
    down = _climb(optimum, table)[::-1]
    path = up + down[1:]
    # drop any loop created where the two climbs overlap
    seen = {}
    out = []
    for s in path:
        if s in seen:
            out = out[: seen[s] + 1]
            seen = {x: i for i, x in enumerate(out)}
            continue
        seen[s] = len(out)
        out.append(s)
    return out


def construct_path_to_optimum(start: SelectionSet, optimum: SelectionSet, table: ScoreTable,
                              bfs_state_cap: int = 200_000) -> PathResult:
    """A lightweight-graph path from ``start`` to ``optimum`` with at most ``2m`` edges."""
    m = table.m
    start.validate(table.scores.shape[0], m)
    optimum.validate(table.scores.shape[0], m)
    avail = set(int(k) for k in table.available)
    if not (set(start) <= avail and set(optimum) <= avail):
        raise InvalidInput("path endpoints must use available clients only")
    if start == optimum:
        return PathResult([start], "two_phase")
    path = _two_phase(start, optimum, table, max_len=2 * m + 1)
    if path is not None:
        return PathResult(path, "two_phase")
    path = _bfs(start, optimum, table, bfs_state_cap)
    if path is not None:
        return PathResult(path, "bfs")
    return PathResult(_canonical(start, optimum, table), "canonical")
