"""Client-selection policies sharing one interface: ``select(available)`` then ``update(...)``."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import InvalidInput, SelectionHistory, SelectionSet, SystemParams, record_round
from .generalization import GeneralizationSpec, g_vector
from .optimizer import (
    DEFAULT_ENUMERATION_CAP,
    AnnealerConfig,
    ScoreTable,
    anneal,
    solve_exhaustive,
)

SOLVERS = ("exhaustive", "alsa", "sa")


class SchedulingError(InvalidInput):
    """Fewer clients are available than there are channels."""


def exploration_radius(count, m: int, log_t: float):
    """``sqrt((m + 1) ln t / c)`` for observed clients (``count >= 1``)."""
    return np.sqrt((m + 1) * log_t / np.asarray(count, dtype=np.float64))


def ucb_indices(history: SelectionHistory, m: int) -> np.ndarray:
    """Per-client UCB of the mean speed after ``history.t`` rounds; ``+inf`` if never observed."""
    ucb = np.full(history.num_clients, np.inf)
    seen = history.counts > 0
    if seen.any():
        log_t = np.log(history.t) if history.t > 0 else 0.0
        ucb[seen] = history.mean_speed[seen] + exploration_radius(history.counts[seen], m, log_t)
    return ucb


@dataclass(frozen=True)
class BsflState:
    history: SelectionHistory
    ucb: np.ndarray
    spec: GeneralizationSpec
    params: SystemParams
    solver: str = "exhaustive"
    budget: int = 5000
    cap: int = DEFAULT_ENUMERATION_CAP

    @classmethod
    def initial(cls, params: SystemParams, spec: GeneralizationSpec, solver: str = "exhaustive",
                budget: int = 5000, cap: int = DEFAULT_ENUMERATION_CAP) -> "BsflState":
        if solver not in SOLVERS:
            raise InvalidInput(f"unknown solver {solver!r}; choose from {SOLVERS}")
        hist = SelectionHistory.empty(params.K)
        return cls(hist, ucb_indices(hist, params.m), spec, params, solver, budget, cap)


def _check_available(available, m) -> np.ndarray:
    avail = np.unique(np.asarray(available, dtype=np.int64))
    if avail.size < m:
        raise SchedulingError(f"only {avail.size} clients available for {m} channels")
    return avail


def _solve(table: ScoreTable, solver: str, budget: int, cap: int, rng) -> SelectionSet:
    if solver == "exhaustive":
        return solve_exhaustive(table, cap).selection
    if rng is None:
        raise InvalidInput(f"solver {solver!r} needs a random generator")
    hood = "lightweight" if solver == "alsa" else "classic"
    return anneal(table, AnnealerConfig(steps=budget, neighborhood=hood), rng).selection


def bsfl_select(state: BsflState, available, rng: np.random.Generator | None = None,
                alpha: float | None = None) -> SelectionSet:
    """Argmax of ``min ucb + (alpha/m) * sum g`` using data through the previous round."""
    avail = _check_available(available, state.params.m)
    a = state.params.alpha if alpha is None else alpha
    g = g_vector(state.spec, state.history)
    table = ScoreTable(state.ucb, g, float(a), state.params.m, avail)
    return _solve(table, state.solver, state.budget, state.cap, rng)


def bsfl_update(state: BsflState, chosen: SelectionSet, latencies) -> BsflState:
    """Fold in this round's observations and refresh every observed client's UCB."""
    hist = record_round(state.history, chosen, latencies, state.params)
    return replace(state, history=hist, ucb=ucb_indices(hist, state.params.m))


def genie_select(true_means, history: SelectionHistory, spec: GeneralizationSpec, params: SystemParams,
                 available=None, cap: int = DEFAULT_ENUMERATION_CAP) -> SelectionSet:
    """Exact argmax of ``min mu + (alpha/m) * sum g`` against the given (policy's) history."""
    mu = np.asarray(true_means, dtype=np.float64)
    avail = _check_available(np.arange(params.K) if available is None else available, params.m)
    table = ScoreTable(mu, g_vector(spec, history), params.alpha, params.m, avail)
    return solve_exhaustive(table, cap).selection


def random_uniform_select(available, m: int, rng: np.random.Generator) -> SelectionSet:
    avail = _check_available(available, m)
    return SelectionSet.of(rng.choice(avail, size=m, replace=False))


def random_proportional_select(available, m: int, weights, rng: np.random.Generator) -> SelectionSet:
    """Successive draws without replacement, each proportional to the remaining weights."""
    avail = _check_available(available, m)
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w[avail] <= 0):
        raise InvalidInput("selection weights must be positive")
    pool = list(avail)
    chosen = []
    for _ in range(m):
        p = w[pool]
        i = int(np.searchsorted(np.cumsum(p), rng.random() * p.sum(), side="right"))
        chosen.append(pool.pop(min(i, len(pool) - 1)))
    return SelectionSet.of(chosen)


def latency_ucb_select(state: BsflState, available, rng=None) -> SelectionSet:
    """Speed-only UCB baseline: BSFL with the generalization weight forced to zero."""
    return bsfl_select(state, available, rng, alpha=0.0)


# ------------------------------------------------------------ policy objects


class Policy:
    """Stateful wrapper used by the simulators."""

    name = "policy"

    def select(self, available, rng: np.random.Generator) -> SelectionSet:
        raise NotImplementedError

    def update(self, chosen: SelectionSet, latencies) -> None:
        pass


class BsflPolicy(Policy):
    name = "bsfl"

    def __init__(self, params: SystemParams, spec: GeneralizationSpec, solver="exhaustive",
                 budget=5000, speed_only=False):
        self.state = BsflState.initial(params, spec, solver, budget)
        self.speed_only = speed_only
        if speed_only:
            self.name = "latency_ucb"

    def select(self, available, rng):
        if self.speed_only:
            return latency_ucb_select(self.state, available, rng)
        return bsfl_select(self.state, available, rng)

    def update(self, chosen, latencies):
        self.state = bsfl_update(self.state, chosen, latencies)


class GeniePolicy(Policy):
    """Oracle that knows the true mean speeds and tracks its own history."""

    name = "genie"

    def __init__(self, params, spec, true_means):
        self.params = params
        self.spec = spec
        self.mu = np.asarray(true_means, dtype=np.float64)
        self.history = SelectionHistory.empty(params.K)

    def select(self, available, rng):
        return genie_select(self.mu, self.history, self.spec, self.params, available)

    def update(self, chosen, latencies):
        self.history = record_round(self.history, chosen, latencies, self.params)


class RandomUniformPolicy(Policy):
    name = "random_uniform"

    def __init__(self, m):
        self.m = m

    def select(self, available, rng):
        return random_uniform_select(available, self.m, rng)


class RandomProportionalPolicy(Policy):
    name = "random_proportional"

    def __init__(self, m, weights):
        self.m = m
        self.weights = np.asarray(weights, dtype=np.float64)

    def select(self, available, rng):
        return random_proportional_select(available, self.m, self.weights, rng)
