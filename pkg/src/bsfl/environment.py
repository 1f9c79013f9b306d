"""The hidden world: client latency laws, round latency, realized reward, availability."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate, stats

from .core import (
    ClientProfile,
    InvalidInput,
    SelectionHistory,
    SelectionSet,
    SystemParams,
    speeds_of,
)
from .generalization import GeneralizationSpec, g_vector


class Family(str, enum.Enum):
    LOGNORMAL = "lognormal"
    EXPONENTIAL = "exponential"
    FIXED = "fixed"


@dataclass(frozen=True)
class LatencyLaw:
    """A latency distribution whose samples are clipped to ``[tau_min, tau_max]``.

    ``lognormal``: params ``(log_mean, log_sd)``.
    ``exponential``: params ``(scale, loc)``; samples are ``loc + Exp(scale)``.
    ``fixed``: params ``(value,)``.
    """

    family: Family
    params: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        p = tuple(float(x) for x in self.params)
        object.__setattr__(self, "params", p)
        if self.family is Family.FIXED:
            if len(p) != 1 or p[0] <= 0:
                raise InvalidInput(f"fixed law needs one positive value, got {p}")
        elif self.family is Family.LOGNORMAL:
            if len(p) != 2 or p[1] <= 0:
                raise InvalidInput(f"lognormal law needs (log_mean, log_sd>0), got {p}")
        elif self.family is Family.EXPONENTIAL:
            if len(p) != 2 or p[0] <= 0 or p[1] < 0:
                raise InvalidInput(f"exponential law needs (scale>0, loc>=0), got {p}")

    @classmethod
    def fixed(cls, value: float) -> "LatencyLaw":
        return cls(Family.FIXED, (value,))

    @classmethod
    def lognormal(cls, log_mean: float, log_sd: float) -> "LatencyLaw":
        return cls(Family.LOGNORMAL, (log_mean, log_sd))

    @classmethod
    def exponential(cls, scale: float, loc: float = 0.0) -> "LatencyLaw":
        return cls(Family.EXPONENTIAL, (scale, loc))

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray | float:
        """Raw (unclipped) draws."""
        if self.family is Family.FIXED:
            return self.params[0] if size is None else np.full(size, self.params[0])
        if self.family is Family.LOGNORMAL:
            return rng.lognormal(self.params[0], self.params[1], size)
        return self.params[1] + rng.exponential(self.params[0], size)

    def _dist(self):
        if self.family is Family.LOGNORMAL:
            return stats.lognorm(s=self.params[1], scale=np.exp(self.params[0]))
        return stats.expon(loc=self.params[1], scale=self.params[0])

    def mean_speed(self, params: SystemParams) -> float:
        """``E[tau_min / clip(X)]``, exact for ``fixed`` and by quadrature otherwise."""
        lo, hi = params.tau_min, params.tau_max
        if self.family is Family.FIXED:
            v = min(max(self.params[0], lo), hi)
            return lo / v
        dist = self._dist()
        body, _ = integrate.quad(lambda x: lo / x * dist.pdf(x), lo, hi, limit=200, epsabs=1e-12, epsrel=1e-10)
        return float(dist.cdf(lo) + body + dist.sf(hi) * lo / hi)


@dataclass(frozen=True)
class RoundRecord:
    t: int
    chosen: SelectionSet
    latencies: tuple[float, ...]
    iteration_latency: float
    realized_reward: float
    genie_expected_reward: float
    policy_expected_reward: float
    cumulative_clock: float
    genie_set: SelectionSet | None = None
    instantaneous_gap: float = 0.0
    rates: np.ndarray | None = field(default=None, repr=False)


def iteration_latency(latencies: Sequence[float], params: SystemParams) -> float:
    """Round duration: the slowest chosen client, capped at ``tau_max``."""
    if len(latencies) == 0:
        raise InvalidInput("iteration latency of an empty round is undefined")
    return float(min(max(latencies), params.tau_max))


def realized_reward(
    latencies: Sequence[float],
    chosen: SelectionSet,
    history: SelectionHistory,
    spec: GeneralizationSpec,
    params: SystemParams,
    g: np.ndarray | None = None,
) -> float:
    if len(chosen) != params.m or len(latencies) != params.m:
        raise InvalidInput(f"reward needs exactly m={params.m} chosen clients")
    if g is None:
        g = g_vector(spec, history)
    speed_term = float(np.min(speeds_of(latencies, params)))
    gsum = 0.0
    for k in chosen:
        gsum += g[k]
    return speed_term + params.alpha / params.m * gsum


@dataclass(frozen=True)
class Availability:
    mode: str = "full"
    p: float = 1.0

    def __post_init__(self):
        if self.mode not in ("full", "bernoulli"):
            raise InvalidInput(f"unknown availability mode {self.mode!r}")
        if not 0.0 < self.p <= 1.0:
            raise InvalidInput(f"availability probability must lie in (0, 1], got {self.p}")


def availability(t: int, rng: np.random.Generator | None, config: Availability, num_clients: int,
                 m: int) -> np.ndarray:
    """Ids of clients reachable in round ``t`` (always at least ``m`` of them)."""
    everyone = np.arange(num_clients, dtype=np.int64)
    if config.mode == "full" or config.p >= 1.0:
        return everyone
    while True:
        present = rng.random(num_clients) < config.p
        if present.sum() >= m:
            return everyone[present]


class Environment:
    """Client profiles plus their cached true mean speeds."""

    def __init__(self, params: SystemParams, profiles: Sequence[ClientProfile],
                 avail: Availability | None = None):
        if len(profiles) != params.K:
            raise InvalidInput(f"expected {params.K} client profiles, got {len(profiles)}")
        self.params = params
        self.profiles = list(profiles)
        self.avail = avail or Availability()
        self.true_means = np.array([p.latency_law.mean_speed(params) for p in self.profiles])

    @property
    def data_sizes(self) -> np.ndarray:
        return np.array([p.data_size for p in self.profiles], dtype=np.float64)

    def sample_round(self, chosen: SelectionSet, rng: np.random.Generator) -> np.ndarray:
        return sample_round(self.profiles, chosen, rng, self.params)

    def available(self, t: int, rng: np.random.Generator | None) -> np.ndarray:
        return availability(t, rng, self.avail, self.params.K, self.params.m)


def sample_round(profiles: Sequence[ClientProfile], chosen: SelectionSet, rng: np.random.Generator,
                 params: SystemParams) -> np.ndarray:
    """One clipped draw per chosen client, in member order."""
    out = np.empty(len(chosen))
    for i, k in enumerate(chosen):
        out[i] = profiles[k].latency_law.sample(rng)
    return np.clip(out, params.tau_min, params.tau_max)


def random_laws(
    num_clients: int,
    rng: np.random.Generator,
    family: Family | str = Family.LOGNORMAL,
    median_range: tuple[float, float] = (1.2, 6.0),
    spread_range: tuple[float, float] = (0.1, 0.5),
) -> list[LatencyLaw]:
    """Per-client laws with log-uniform median latency.

    For lognormal laws ``spread`` is the log-sd; for exponential laws the
    median is split into a deterministic offset and an exponential tail whose
    share of the median is ``spread``.
    """
    family = Family(family)
    lo, hi = median_range
    if not 0 < lo <= hi:
        raise InvalidInput(f"bad median range {median_range}")
    if not 0 <= spread_range[0] <= spread_range[1]:
        raise InvalidInput(f"bad spread range {spread_range}")
    medians = np.exp(rng.uniform(np.log(lo), np.log(hi), num_clients))
    spreads = rng.uniform(spread_range[0], spread_range[1], num_clients)
    laws = []
    for med, sp in zip(medians, spreads):
        if family is Family.LOGNORMAL:
            laws.append(LatencyLaw.lognormal(np.log(med), sp))
        elif family is Family.EXPONENTIAL:
            tail = sp * med
            laws.append(LatencyLaw.exponential(tail / np.log(2.0), med - tail))
        else:
            laws.append(LatencyLaw.fixed(med))
    return laws


@dataclass(frozen=True)
class Tier:
    """A share of the fleet whose laws are drawn from one median/spread box."""

    fraction: float
    median_range: tuple[float, float]
    spread_range: tuple[float, float] = (0.1, 0.5)


def tier_sizes(num_clients: int, fractions) -> list[int]:
    """Largest-remainder split of ``num_clients`` by ``fractions`` (normalised)."""
    f = np.asarray(fractions, dtype=np.float64)
    if f.size == 0 or np.any(f < 0) or f.sum() <= 0:
        raise InvalidInput(f"tier fractions must be non-negative with a positive sum, got {list(fractions)}")
    exact = f / f.sum() * num_clients
    sizes = np.floor(exact).astype(int)
    order = np.argsort(-(exact - sizes), kind="stable")
    sizes[order[: num_clients - sizes.sum()]] += 1
    return [int(x) for x in sizes]


def tiered_laws(num_clients: int, rng: np.random.Generator, tiers, family: Family | str = Family.LOGNORMAL) -> list[LatencyLaw]:
    """Laws drawn tier by tier, then assigned to client ids in a random order."""
    tiers = list(tiers)
    laws = []
    for tier, n in zip(tiers, tier_sizes(num_clients, [t.fraction for t in tiers])):
        laws.extend(random_laws(n, rng, family, tier.median_range, tier.spread_range))
    return [laws[i] for i in rng.permutation(num_clients)]
