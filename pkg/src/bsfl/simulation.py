"""Bandit simulation loop: select, observe latencies, score against the genie, update."""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass

import numpy as np

from .core import InvalidInput, SelectionHistory, SystemParams, record_round
from .environment import Environment, RoundRecord, iteration_latency, realized_reward
from .evaluation import GapTracker, expected_reward, instantaneous_gap
from .generalization import GeneralizationSpec, g_vector
from .optimizer import DEFAULT_ENUMERATION_CAP, ScoreTable, solve_exhaustive
from .policies import (
    BsflPolicy,
    GeniePolicy,
    Policy,
    RandomProportionalPolicy,
    RandomUniformPolicy,
)

# Stream purposes. A run's generator for purpose P is
# SeedSequence(seed, spawn_key=(crc32(policy_name), P)); purposes that are
# shared by every policy of a seed (scenario, dataset) use policy name "".
SCENARIO, LATENCY, AVAILABILITY, POLICY, DATASET, ANNEALER = range(6)


def stream(seed: int, purpose: int, policy: str = "") -> np.random.Generator:
    key = (zlib.crc32(policy.encode()), purpose)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


POLICY_KINDS = ("bsfl", "latency_ucb", "random_uniform", "random_proportional", "genie")


def make_policy(kind: str, params: SystemParams, spec: GeneralizationSpec, env: Environment,
                solver: str = "exhaustive", budget: int = 5000) -> Policy:
    if kind == "bsfl":
        return BsflPolicy(params, spec, solver, budget)
    if kind == "latency_ucb":
        return BsflPolicy(params, spec, solver, budget, speed_only=True)
    if kind == "random_uniform":
        return RandomUniformPolicy(params.m)
    if kind == "random_proportional":
        return RandomProportionalPolicy(params.m, env.data_sizes)
    if kind == "genie":
        return GeniePolicy(params, spec, env.true_means)
    raise InvalidInput(f"unknown policy kind {kind!r}; choose from {POLICY_KINDS}")


@dataclass
class BanditRun:
    records: list[RoundRecord]
    history: SelectionHistory
    tracker: GapTracker


def run_bandit(env: Environment, policy: Policy, spec: GeneralizationSpec, rounds: int | None = None,
               seed: int = 0, regret: bool = True, cap: int = DEFAULT_ENUMERATION_CAP, keep_rates: bool = True,
               seconds: float | None = None) -> BanditRun:
    """Run ``rounds`` rounds, or until the next round would end after ``seconds`` of simulated time."""
    if (rounds is None) == (seconds is None):
        raise InvalidInput("give exactly one of rounds or seconds")
    params = env.params
    if regret and math.comb(params.K, params.m) > cap:
        raise InvalidInput(
            f"regret needs the exact genie, but C({params.K},{params.m}) exceeds the enumeration cap {cap}"
        )
    name = policy.name
    rng_lat = stream(seed, LATENCY, name)
    rng_pol = stream(seed, POLICY, name)
    rng_av = stream(seed, AVAILABILITY, name)
    mu = env.true_means
    history = SelectionHistory.empty(params.K)
    tracker = GapTracker()
    clock = 0.0
    records = []
    t = 0
    while rounds is None or t < rounds:
        avail = env.available(t + 1, rng_av)
        g = g_vector(spec, history)
        chosen = policy.select(avail, rng_pol)
        lat = env.sample_round(chosen, rng_lat)
        tau = iteration_latency(lat, params)
        if seconds is not None and clock + tau > seconds:
            break
        t += 1
        clock += tau
        reward = realized_reward(lat, chosen, history, spec, params, g)
        policy_value = expected_reward(chosen, mu, g, params)
        genie_set = None
        genie_value = policy_value
        gap = 0.0
        if regret:
            genie_set = solve_exhaustive(ScoreTable(mu, g, params.alpha, params.m, avail), cap).selection
            genie_value = expected_reward(genie_set, mu, g, params)
            gap = instantaneous_gap(genie_set, chosen, mu, history, spec, params, tracker, g)
        history = record_round(history, chosen, lat, params)
        policy.update(chosen, lat)
        records.append(RoundRecord(
            t=t, chosen=chosen, latencies=tuple(float(x) for x in lat), iteration_latency=tau,
            realized_reward=reward, genie_expected_reward=genie_value, policy_expected_reward=policy_value,
            cumulative_clock=clock, genie_set=genie_set, instantaneous_gap=gap,
            rates=history.counts / history.t if keep_rates else None,
        ))
    return BanditRun(records, history, tracker)
