"""Builds seeded worlds from a config and runs one (policy, seed) job."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig, PolicyConfig, ScenarioConfig
from .core import ClientProfile, SystemParams
from .environment import Availability, Environment, Tier, tiered_laws
from .evaluation import MetricTable, collect_metrics
from .fedtoy import DataConfig, FlTrace, ToyDataset, make_dataset, run_fl
from .generalization import GeneralizationSpec
from .simulation import AVAILABILITY, DATASET, LATENCY, POLICY, SCENARIO, make_policy, run_bandit, stream


@dataclass
class World:
    profiles: list[ClientProfile]
    dataset: ToyDataset | None


def build_world(cfg: ExperimentConfig, seed: int) -> World:
    """Client laws, sizes and (optionally) fedtoy shards for one seed; shared by every policy."""
    sc = cfg.scenario
    rng = stream(seed, SCENARIO)
    tiers = [Tier(t.fraction, t.median_range, t.spread_range) for t in sc.tiers]
    laws = tiered_laws(sc.num_clients, rng, tiers, sc.family)
    if cfg.fedtoy_on:
        f = cfg.fedtoy
        data = DataConfig(f.total_samples, f.test_samples, f.dim, f.noise_sd, f.noise_range,
                          f.size_spread, f.feature_skew)
        dataset = make_dataset(sc.num_clients, stream(seed, DATASET), sc.partition, data)
        return World(dataset.profiles(laws), dataset)
    lo, hi = sc.data_size_range
    sizes = rng.integers(lo, hi + 1, sc.num_clients)
    return World([ClientProfile(k, law, int(n)) for k, (law, n) in enumerate(zip(laws, sizes))], None)


def system_params(sc: ScenarioConfig, pol: PolicyConfig) -> SystemParams:
    return SystemParams(sc.num_clients, sc.num_channels, pol.alpha, pol.beta, sc.tau_min, sc.tau_max,
                        sc.delta_min)


def environment(cfg: ExperimentConfig, world: World, pol: PolicyConfig) -> tuple[Environment, GeneralizationSpec]:
    sc = cfg.scenario
    params = system_params(sc, pol)
    env = Environment(params, world.profiles, Availability(sc.availability, sc.availability_p))
    spec = GeneralizationSpec.for_clients(world.profiles, sc.num_channels, pol.beta, sc.partition, sc.quantum)
    return env, spec


@dataclass
class JobResult:
    policy: str
    kind: str
    seed: int
    metrics: MetricTable
    trace: FlTrace | None
    rounds: int
    final_regret: float
    final_clock: float
    negative_gaps: int
    wall_time: float


def run_job(cfg: ExperimentConfig, pol: PolicyConfig, seed: int) -> JobResult:
    start = time.perf_counter()
    world = build_world(cfg, seed)
    env, spec = environment(cfg, world, pol)
    policy = make_policy(pol.kind, env.params, spec, env, pol.solver, pol.budget)
    policy.name = pol.name
    run = run_bandit(env, policy, spec, cfg.rounds, seed, cfg.regret, cfg.cap, keep_rates=cfg.rate_cadence > 0,
                     seconds=cfg.seconds)
    table = collect_metrics(run.records, pol.name, seed, cfg.rate_cadence, env.params.K)
    trace = None
    if cfg.fedtoy_on:
        budget = cfg.fedtoy.budget_seconds if cfg.fedtoy.budget_seconds is not None else cfg.seconds
        fl_policy = make_policy(pol.kind, env.params, spec, env, pol.solver, pol.budget)
        fl_policy.name = pol.name
        trace = run_fl(
            world.dataset, fl_policy, env, budget,
            rng_latency=stream(seed, LATENCY, pol.name), rng_policy=stream(seed, POLICY, pol.name),
            rng_avail=stream(seed, AVAILABILITY, pol.name), steps=cfg.fedtoy.local_steps, lr=cfg.fedtoy.lr,
            seed=seed,
        )
    last = run.records[-1] if run.records else None
    return JobResult(
        policy=pol.name, kind=pol.kind, seed=seed, metrics=table, trace=trace, rounds=len(run.records),
        final_regret=table.final_regret, final_clock=last.cumulative_clock if last else 0.0,
        negative_gaps=run.tracker.negative_gaps, wall_time=time.perf_counter() - start,
    )


def median_curve(curves: list[np.ndarray]) -> np.ndarray:
    """Pointwise median over runs, truncated to the shortest run."""
    n = min(len(c) for c in curves)
    return np.median(np.vstack([np.asarray(c[:n]) for c in curves]), axis=0)
