"""Shared domain types: system parameters, clients, selection history, energies."""
from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class InvalidInput(ValueError):
    """Raised when an argument violates an operation's precondition."""


@dataclass(frozen=True)
class SystemParams:
    num_clients: int
    num_channels: int
    alpha: float = 1.0
    beta: int = 2
    tau_min: float = 1.0
    tau_max: float = 10.0
    delta_min: float = 0.01
    rng_seed: int = 0

    def __post_init__(self):
        if not 1 <= self.num_channels <= self.num_clients:
            raise InvalidInput(
                f"num_channels must satisfy 1 <= m <= K, got m={self.num_channels}, K={self.num_clients}"
            )
        if not 0 < self.tau_min < self.tau_max:
            raise InvalidInput(f"need 0 < tau_min < tau_max, got {self.tau_min}, {self.tau_max}")
        if self.alpha < 0:
            raise InvalidInput(f"alpha must be >= 0, got {self.alpha}")
        if int(self.beta) != self.beta or self.beta < 1:
            raise InvalidInput(f"beta must be a natural number, got {self.beta}")
        if self.delta_min <= 0:
            raise InvalidInput(f"delta_min must be > 0, got {self.delta_min}")

    @property
    def K(self) -> int:
        return self.num_clients

    @property
    def m(self) -> int:
        return self.num_channels

    @property
    def min_speed(self) -> float:
        return self.tau_min / self.tau_max


@dataclass(frozen=True)
class ClientProfile:
    id: int
    latency_law: "object"  # environment.LatencyLaw; kept loose to avoid an import cycle
    data_size: int = 1
    data_quality: float = 1.0

    def __post_init__(self):
        if self.data_size < 1:
            raise InvalidInput(f"data_size must be >= 1, got {self.data_size}")
        if not 0.0 <= self.data_quality <= 1.0:
            raise InvalidInput(f"data_quality must lie in [0, 1], got {self.data_quality}")

    @property
    def significance(self) -> float:
        return self.data_quality * self.data_size


@functools.total_ordering
@dataclass(frozen=True)
class SelectionSet:
    """A sorted m-subset of client ids."""

    members: tuple[int, ...]

    def __post_init__(self):
        members = tuple(int(k) for k in self.members)
        if any(b <= a for a, b in zip(members, members[1:])):
            raise InvalidInput(f"members must be strictly increasing, got {members}")
        if members and members[0] < 0:
            raise InvalidInput(f"negative client id in {members}")
        object.__setattr__(self, "members", members)

    @classmethod
    def of(cls, ids: Iterable[int]) -> "SelectionSet":
        ids = sorted(int(k) for k in ids)
        if len(set(ids)) != len(ids):
            raise InvalidInput(f"duplicate client ids in {ids}")
        return cls(tuple(ids))

    def validate(self, num_clients: int, m: int) -> None:
        if len(self.members) != m:
            raise InvalidInput(f"expected {m} members, got {len(self.members)}")
        if self.members and self.members[-1] >= num_clients:
            raise InvalidInput(f"client id {self.members[-1]} out of range for K={num_clients}")

    def __iter__(self):
        return iter(self.members)

    def __len__(self):
        return len(self.members)

    def __contains__(self, k) -> bool:
        return k in self.members

    def __lt__(self, other: "SelectionSet") -> bool:
        return self.members < other.members

    def as_array(self) -> np.ndarray:
        return np.asarray(self.members, dtype=np.int64)

    def swap(self, out: int, into: int) -> "SelectionSet":
        return SelectionSet.of([k for k in self.members if k != out] + [into])

    def __str__(self):
        return ";".join(str(k) for k in self.members)


FINITE = 0
UNOBSERVED = 1


@functools.total_ordering
@dataclass(frozen=True)
class Energy:
    """Extended-real set score.

    Any unobserved-infinite energy beats every finite one. Two infinite
    energies compare by ``tiebreak_g``; two finite ones by ``value`` then
    ``tiebreak_g``.
    """

    kind: int
    value: float
    tiebreak_g: float

    @classmethod
    def finite(cls, value: float, tiebreak_g: float = 0.0) -> "Energy":
        return cls(FINITE, float(value), float(tiebreak_g))

    @classmethod
    def unobserved(cls, tiebreak_g: float) -> "Energy":
        return cls(UNOBSERVED, float(tiebreak_g), float(tiebreak_g))

    @property
    def is_finite(self) -> bool:
        return self.kind == FINITE

    def key(self) -> tuple[int, float, float]:
        return (self.kind, self.value, self.tiebreak_g)

    def __lt__(self, other: "Energy") -> bool:
        return self.key() < other.key()

    def __float__(self) -> float:
        return self.value if self.is_finite else float("inf")


def speed_of(latency: float, params: SystemParams) -> float:
    """Normalised speed ``tau_min / clip(latency)``, in ``[tau_min/tau_max, 1]``."""
    if not latency > 0:
        raise InvalidInput(f"latency must be positive, got {latency}")
    clipped = min(max(latency, params.tau_min), params.tau_max)
    return params.tau_min / clipped


def speeds_of(latencies: Sequence[float] | np.ndarray, params: SystemParams) -> np.ndarray:
    lat = np.asarray(latencies, dtype=np.float64)
    if np.any(~(lat > 0)):
        raise InvalidInput("latencies must be positive")
    return params.tau_min / np.clip(lat, params.tau_min, params.tau_max)


@dataclass(frozen=True)
class SelectionHistory:
    """Per-client counters and sample-mean speeds after ``t`` completed rounds.

    Arrays are never mutated once the instance is built; updates return copies.
    """

    t: int
    counts: np.ndarray
    mean_speed: np.ndarray = field(repr=False)

    @classmethod
    def empty(cls, num_clients: int) -> "SelectionHistory":
        return cls(0, np.zeros(num_clients, dtype=np.int64), np.zeros(num_clients, dtype=np.float64))

    @property
    def num_clients(self) -> int:
        return self.counts.shape[0]

    @property
    def observed(self) -> np.ndarray:
        return self.counts > 0

    def rates(self) -> np.ndarray:
        """``c[k] / t`` with the ``t = 0`` convention ``c/t := 0``."""
        if self.t == 0:
            return np.zeros(self.num_clients)
        return self.counts / self.t


def _check_client(history: SelectionHistory, client: int) -> None:
    if not 0 <= client < history.num_clients:
        raise InvalidInput(f"client id {client} out of range for K={history.num_clients}")


def record_observation(
    history: SelectionHistory, client: int, latency: float, params: SystemParams
) -> SelectionHistory:
    """One observation of ``client``; the round counter is left alone."""
    _check_client(history, client)
    s = speed_of(latency, params)
    counts = history.counts.copy()
    means = history.mean_speed.copy()
    old = counts[client]
    counts[client] = old + 1
    means[client] = (means[client] * old + s) / (old + 1)
    return SelectionHistory(history.t, counts, means)


def record_round(
    history: SelectionHistory,
    chosen: SelectionSet,
    latencies: Sequence[float],
    params: SystemParams,
) -> SelectionHistory:
    """Record every chosen client's latency, then close the round (``t += 1``)."""
    if len(latencies) != len(chosen):
        raise InvalidInput("need exactly one latency per chosen client")
    counts = history.counts.copy()
    means = history.mean_speed.copy()
    for k, lat in zip(chosen, latencies):
        if not 0 <= k < history.num_clients:
            raise InvalidInput(f"client id {k} out of range for K={history.num_clients}")
        s = speed_of(lat, params)
        old = counts[k]
        counts[k] = old + 1
        means[k] = (means[k] * old + s) / (old + 1)
    return SelectionHistory(history.t + 1, counts, means)
