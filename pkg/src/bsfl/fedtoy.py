"""Federated averaging on synthetic linear regression, driven by any selection policy.

Each client holds a shard ``y = x . w_true + noise``; a round trains the chosen
clients' local copies with full-batch gradient descent on their MSE, averages
them weighted by shard size, and advances a simulated clock by the round's
latency. The trace records test MSE against simulated seconds.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import ClientProfile, InvalidInput, SystemParams
from .environment import Environment, iteration_latency, tier_sizes
from .policies import Policy

PARTITIONS = ("iid", "non_iid")


@dataclass(frozen=True)
class Shard:
    x: np.ndarray
    y: np.ndarray
    noise_sd: float

    @property
    def size(self) -> int:
        return self.y.shape[0]

    @property
    def quality(self) -> float:
        return 1.0 / (1.0 + self.noise_sd)


@dataclass(frozen=True)
class ToyDataset:
    shards: list[Shard]
    test_x: np.ndarray
    test_y: np.ndarray
    w_true: np.ndarray
    partition: str = "iid"

    @property
    def dim(self) -> int:
        return self.w_true.shape[0]

    @property
    def sizes(self) -> np.ndarray:
        return np.array([s.size for s in self.shards], dtype=np.float64)

    def pooled(self) -> tuple[np.ndarray, np.ndarray]:
        return np.vstack([s.x for s in self.shards]), np.concatenate([s.y for s in self.shards])

    def profiles(self, laws: Sequence) -> list[ClientProfile]:
        """Client profiles whose size and quality match the shards."""
        if len(laws) != len(self.shards):
            raise InvalidInput(f"need one latency law per shard, got {len(laws)} for {len(self.shards)}")
        return [ClientProfile(k, law, s.size, s.quality) for k, (law, s) in enumerate(zip(laws, self.shards))]


@dataclass(frozen=True)
class DataConfig:
    total_samples: int = 70_000
    test_samples: int = 10_000
    dim: int = 10
    noise_sd: float = 0.5                    # iid shards and the test set
    noise_range: tuple[float, float] = (0.1, 3.0)   # non-iid per-client label noise
    size_spread: float = 1.0                 # non-iid log-sd of shard-size weights
    feature_skew: float = 0.75               # non-iid log-sd of per-client feature scales
    min_shard: int = 20

    def __post_init__(self):
        if self.dim < 1 or self.total_samples < 1 or self.test_samples < 1:
            raise InvalidInput("dim, total_samples and test_samples must be positive")
        if self.noise_sd < 0 or not 0 <= self.noise_range[0] <= self.noise_range[1]:
            raise InvalidInput("label noise must be non-negative")
        if self.size_spread < 0 or self.feature_skew < 0 or self.min_shard < 1:
            raise InvalidInput("size_spread and feature_skew must be >= 0 and min_shard >= 1")


def make_dataset(num_clients: int, rng: np.random.Generator, partition: str = "iid",
                 config: DataConfig | None = None) -> ToyDataset:
    """Synthetic shards sharing one ``w_true``.

    Non-iid shards differ in size, label noise and per-feature covariate
    scale. The test set is drawn from the pooled client distribution (each
    client contributing in proportion to its shard size) with the base
    label noise.
    """
    cfg = config or DataConfig()
    if partition not in PARTITIONS:
        raise InvalidInput(f"unknown partition {partition!r}; choose from {PARTITIONS}")
    if cfg.total_samples < num_clients * cfg.min_shard:
        raise InvalidInput(f"{cfg.total_samples} samples cannot give {num_clients} shards of {cfg.min_shard}")
    w_true = rng.standard_normal(cfg.dim)
    if partition == "iid":
        sizes = tier_sizes(cfg.total_samples, np.ones(num_clients))
        noise = np.full(num_clients, cfg.noise_sd)
        scales = np.ones((num_clients, cfg.dim))
    else:
        weights = rng.lognormal(0.0, cfg.size_spread, num_clients)
        spare = cfg.total_samples - num_clients * cfg.min_shard
        sizes = [cfg.min_shard + s for s in tier_sizes(spare, weights)]
        noise = rng.uniform(cfg.noise_range[0], cfg.noise_range[1], num_clients)
        scales = rng.lognormal(0.0, cfg.feature_skew, (num_clients, cfg.dim))
    shards = []
    for n, sd, sc in zip(sizes, noise, scales):
        x = rng.standard_normal((n, cfg.dim)) * sc
        y = x @ w_true + sd * rng.standard_normal(n)
        shards.append(Shard(x, y, float(sd)))
    test_sizes = tier_sizes(cfg.test_samples, sizes)
    test_x = np.vstack([rng.standard_normal((n, cfg.dim)) * sc for n, sc in zip(test_sizes, scales)])
    test_y = test_x @ w_true + cfg.noise_sd * rng.standard_normal(cfg.test_samples)
    return ToyDataset(shards, test_x, test_y, w_true, partition)


@dataclass
class GlobalModel:
    weights: np.ndarray
    round: int = 0

    @classmethod
    def zeros(cls, dim: int) -> "GlobalModel":
        return cls(np.zeros(dim))


def mse(w: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
    r = x @ w - y
    return float(r @ r / y.shape[0])


def gradient(w: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Gradient of the mean squared error with respect to ``w``."""
    return 2.0 / y.shape[0] * (x.T @ (x @ w - y))


def local_train(weights: np.ndarray, shard: Shard, steps: int, lr: float) -> np.ndarray:
    """``steps`` full-batch gradient steps from ``weights``; returns a new array."""
    if shard.size == 0:
        raise InvalidInput("cannot train on an empty shard")
    if steps < 0:
        raise InvalidInput(f"steps must be >= 0, got {steps}")
    w = np.array(weights, dtype=np.float64, copy=True)
    for _ in range(steps):
        w -= lr * gradient(w, shard.x, shard.y)
    return w


def aggregate(local_weights: Sequence[np.ndarray], sizes: Sequence[float], round: int = 0) -> GlobalModel:
    """Shard-size weighted average of participant models."""
    if len(local_weights) == 0:
        raise InvalidInput("aggregate needs at least one participant")
    if len(local_weights) != len(sizes):
        raise InvalidInput("one size per participant is required")
    p = np.asarray(sizes, dtype=np.float64)
    if np.any(p <= 0):
        raise InvalidInput("shard sizes must be positive")
    stack = np.vstack([np.asarray(w, dtype=np.float64) for w in local_weights])
    return GlobalModel((p / p.sum()) @ stack, round)


def least_squares_mse(dataset: ToyDataset) -> float:
    """Test MSE of the centralized least-squares fit on all shards pooled."""
    x, y = dataset.pooled()
    w, *_ = np.linalg.lstsq(x, y, rcond=None)
    return mse(w, dataset.test_x, dataset.test_y)


TRACE_COLUMNS = ("clock_seconds", "round", "test_loss", "policy_name", "seed")


@dataclass
class FlTrace:
    policy: str
    seed: int
    clock: list[float] = field(default_factory=list)
    rounds: list[int] = field(default_factory=list)
    loss: list[float] = field(default_factory=list)
    model: GlobalModel | None = None

    def rows(self):
        for c, r, l in zip(self.clock, self.rounds, self.loss):
            yield (c, r, l, self.policy, self.seed)

    @property
    def final_loss(self) -> float:
        return self.loss[-1]

    @property
    def completed_rounds(self) -> int:
        return self.rounds[-1]


def run_fl(dataset: ToyDataset, policy: Policy, env: Environment, budget: float, *,
           rng_latency: np.random.Generator, rng_policy: np.random.Generator,
           rng_avail: np.random.Generator | None = None, steps: int = 5, lr: float = 0.01,
           seed: int = 0, max_rounds: int | None = None) -> FlTrace:
    """Train until the next round would finish after ``budget`` simulated seconds.

    Row 0 is the untrained model at clock 0. A round whose latency would push
    the clock past the budget is drawn but not trained or recorded.
    """
    if not budget > 0:
        raise InvalidInput(f"budget must be positive, got {budget}")
    params: SystemParams = env.params
    if len(dataset.shards) != params.K:
        raise InvalidInput(f"dataset has {len(dataset.shards)} shards for {params.K} clients")
    model = GlobalModel.zeros(dataset.dim)
    trace = FlTrace(policy.name, seed)
    clock = 0.0
    trace.clock.append(clock)
    trace.rounds.append(0)
    trace.loss.append(mse(model.weights, dataset.test_x, dataset.test_y))
    t = 0
    while max_rounds is None or t < max_rounds:
        avail = env.available(t + 1, rng_avail)
        chosen = policy.select(avail, rng_policy)
        lat = env.sample_round(chosen, rng_latency)
        tau = iteration_latency(lat, params)
        if clock + tau > budget:
            break
        t += 1
        clock += tau
        local = [local_train(model.weights, dataset.shards[k], steps, lr) for k in chosen]
        model = aggregate(local, [dataset.shards[k].size for k in chosen], t)
        policy.update(chosen, lat)
        trace.clock.append(clock)
        trace.rounds.append(t)
        trace.loss.append(mse(model.weights, dataset.test_x, dataset.test_y))
    trace.model = model
    return trace
