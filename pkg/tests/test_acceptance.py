"""End-to-end acceptance checks, one test per criterion at its stated tolerance.

Each test records a PASS/FAIL line that is printed in the terminal summary.
"""
import itertools
import json
import math
from collections import deque

import numpy as np
import pytest

from bsfl.cli import main as cli_main
from bsfl.config import parse_config
from bsfl.core import ClientProfile, SelectionHistory, SelectionSet, SystemParams, record_observation, record_round
from bsfl.environment import Environment, LatencyLaw
from bsfl.evaluation import delta_max_estimate, lattice_delta_min, theorem1_bound
from bsfl.experiment import median_curve, run_job
from bsfl.generalization import GeneralizationSpec, Mode, g_of_rate
from bsfl.optimizer import construct_path_to_optimum, neighbors_classic, neighbors_lightweight, solve_exhaustive
from bsfl.race import energy_race
from bsfl.simulation import SCENARIO, make_policy, run_bandit, stream

from conftest import random_table, report

SEEDS = list(range(10))


def experiment(raw: dict):
    return parse_config(json.dumps(raw))


def median_over_seeds(results, name, column):
    return median_curve([np.asarray(r.metrics.column(column)) for r in results if r.policy == name])


# ---------------------------------------------------------------- 1


def test_criterion_1_log_vs_linear_regret():
    cfg = experiment({
        "scenario": {
            "num_clients": 20, "num_channels": 5, "data_size_range": [500, 5000],
            "latency": {"family": "lognormal", "tiers": [
                {"fraction": 0.5, "median_range": [1.0, 1.05], "spread_range": [0.02, 0.08]},
                {"fraction": 0.5, "median_range": [5.0, 10.0], "spread_range": [0.1, 0.5]}]},
        },
        "policies": [{"kind": "bsfl", "alpha": 1, "beta": 2, "solver": "exhaustive"},
                     {"kind": "random_uniform", "alpha": 1, "beta": 2},
                     {"kind": "random_proportional", "alpha": 1, "beta": 2}],
        "horizon": {"rounds": 10_000},
        "seeds": SEEDS,
    })
    results = [run_job(cfg, p, s) for p in cfg.policies for s in cfg.seeds]
    per_seed = max(sum(r.wall_time for r in results if r.seed == s) for s in SEEDS)
    n = np.arange(1, 10_001)
    window = slice(4999, 10_000)
    med = {p.name: median_over_seeds(results, p.name, "cumulative_regret") for p in cfg.policies}
    r_ln = med["bsfl"][window] / np.log(n[window])
    variation = r_ln.max() / r_ln.min() - 1.0
    bsfl_rate = (med["bsfl"][window] / n[window]).max()
    base_rates = {k: (med[k][window] / n[window]).min() for k in ("random_uniform", "random_proportional")}
    ok = variation < 0.25 and all(v > 10 * bsfl_rate for v in base_rates.values()) and per_seed <= 300
    report("criterion 1", ok,
           f"BSFL R/ln n variation {variation:.3f} (<0.25); BSFL max R/n {bsfl_rate:.4f}; "
           f"baseline min R/n {base_rates['random_uniform']:.4f} / {base_rates['random_proportional']:.4f} "
           f"(>10x); slowest seed {per_seed:.0f}s (<=300s)")
    assert variation < 0.25
    for v in base_rates.values():
        assert v > 10 * bsfl_rate
    assert per_seed <= 300


# ---------------------------------------------------------------- 2


def test_criterion_2_regret_below_bound():
    K, m, n = 8, 3, 10_000
    grid = np.round(np.arange(0.1, 1.0001, 0.05), 10)
    worst = np.inf
    for seed in SEEDS:
        speeds = np.sort(stream(seed, SCENARIO).choice(grid, size=K, replace=False))[::-1]
        laws = [LatencyLaw.fixed(1.0 / s) for s in speeds]
        probe = SystemParams(K, m, alpha=1.0, beta=2)
        spec = GeneralizationSpec.iid(K, m, beta=2, quantum=0.075)
        mu = Environment(probe, [ClientProfile(k, law) for k, law in enumerate(laws)]).true_means
        dmin = lattice_delta_min(mu, probe, spec)
        params = SystemParams(K, m, alpha=1.0, beta=2, delta_min=dmin)
        env = Environment(params, [ClientProfile(k, law) for k, law in enumerate(laws)])
        run = run_bandit(env, make_policy("bsfl", params, spec, env), spec, n, seed)
        regret = np.cumsum([r.instantaneous_gap for r in run.records])
        dmax = delta_max_estimate(mu, params.alpha)
        bound = np.array([theorem1_bound(t, params, dmax) for t in range(1, n + 1)])
        worst = min(worst, float((bound - regret).min()))
        assert np.all(regret <= bound), f"seed {seed}: bound violated"
    report("criterion 2", worst >= 0, f"min over seeds and n of bound - regret = {worst:.3f} (>= 0)")


# ---------------------------------------------------------------- 3


def test_criterion_3_energy_race():
    big = energy_race(100, 10, 200, 5000, alpha=1.0, seed=0, generator="ucb")
    small = energy_race(8, 4, 100, 50_000, alpha=1.0, seed=0, generator="ucb", check_exhaustive=True)
    wins, ties, losses = big.counts()
    rate = big.win_or_tie_rate
    a_hits, s_hits = small.optimum_matches()
    ok = rate >= 0.80 and a_hits >= 95 and s_hits >= 95
    report("criterion 3", ok,
           f"K=100 m=10: ALSA >= SA in {rate:.1%} of 200 (wins {wins}, ties {ties}, losses {losses}; need >=80%); "
           f"K=8 m=4: ALSA {a_hits}/100, SA {s_hits}/100 match exhaustive (need >=95)")
    assert a_hits >= 95 and s_hits >= 95
    assert rate >= 0.80


# ---------------------------------------------------------------- 4


def _bfs_reaches_all(states, nbrs):
    seen = {states[0]}
    q = deque([states[0]])
    while q:
        for u in nbrs[q.popleft()]:
            if u not in seen:
                seen.add(u)
                q.append(u)
    return len(seen) == len(states)


def test_criterion_4_neighborhood_structure():
    violations = 0
    checked = 0
    for K in (5, 6, 7, 8):
        for m in (2, 3):
            rng = np.random.default_rng(1000 * K + m)
            for i in range(100):
                table = random_table(rng, K, m, float(rng.uniform(0, 3)), 0.2 * (i % 3 == 0), ties=bool(i % 2))
                states = [SelectionSet(c) for c in itertools.combinations(range(K), m)]
                classic = {s: set(neighbors_classic(s, table)) for s in states}
                light = {s: set(neighbors_lightweight(s, table)) for s in states}
                opt = solve_exhaustive(table).selection
                for s in states:
                    violations += len(classic[s]) != m * (K - m)
                    violations += not light[s] <= classic[s]
                    violations += sum(s not in classic[u] for u in classic[s])
                    violations += sum(s not in light[u] for u in light[s])
                    path = construct_path_to_optimum(s, opt, table).path
                    violations += path[0] != s or path[-1] != opt
                    violations += sum(b not in light[a] for a, b in zip(path, path[1:]))
                violations += not _bfs_reaches_all(states, light)
                checked += 1
    report("criterion 4", violations == 0, f"{checked} tables, {violations} violations (need 0)")
    assert violations == 0


# ---------------------------------------------------------------- 5


def test_criterion_5_counter_and_mean_algebra():
    rng = np.random.default_rng(5)
    worst_mean = 0.0
    for _ in range(500):
        lats = rng.uniform(1.0, 10.0, int(rng.integers(1, 200)))
        params = SystemParams(2, 1)
        h = SelectionHistory.empty(2)
        for lat in lats:
            h = record_observation(h, 0, lat, params)
        worst_mean = max(worst_mean, abs(h.mean_speed[0] - np.mean(1.0 / lats)))
    conservation_ok = True
    for _ in range(200):
        K = int(rng.integers(1, 12))
        m = int(rng.integers(1, K + 1))
        params = SystemParams(K, m)
        h = SelectionHistory.empty(K)
        for _ in range(int(rng.integers(0, 40))):
            chosen = SelectionSet.of(rng.choice(K, m, replace=False))
            h = record_round(h, chosen, rng.uniform(1, 10, m), params)
        conservation_ok &= int(h.counts.sum()) == m * h.t
    worst_g = 0.0
    sign_ok = True
    for beta in (1, 2, 3):
        target = rng.integers(0, 2 ** 20, 10_000) / 2.0 ** 20
        d = rng.integers(-(2 ** 20), 2 ** 20 + 1, 10_000) / 2.0 ** 20
        spec = GeneralizationSpec(Mode.NON_IID_WEIGHTED, beta, target)
        under, over = g_of_rate(spec, target - d), g_of_rate(spec, target + d)
        worst_g = max(worst_g, float(np.abs(under + over).max()))
        sign_ok &= bool(np.all(np.sign(under) == np.sign(d)))
    ok = worst_mean <= 1e-9 and conservation_ok and worst_g <= 1e-12 and sign_ok
    report("criterion 5", ok, f"batch-mean error {worst_mean:.1e} (<=1e-9); counter conservation {conservation_ok}; "
                              f"g odd-symmetry error {worst_g:.1e} (<=1e-12); sign agreement {sign_ok}")
    assert worst_mean <= 1e-9 and conservation_ok and worst_g <= 1e-12 and sign_ok


# ---------------------------------------------------------------- 6


def test_criterion_6_selection_rate_convergence():
    cfg = experiment({
        "scenario": {"num_clients": 20, "num_channels": 5},
        "policies": [{"kind": "bsfl", "alpha": 5, "beta": 1}],
        "horizon": {"rounds": 5000},
        "seeds": SEEDS,
        "evaluation": {"regret": False, "rate_cadence": 5000},
    })
    devs = []
    for seed in SEEDS:
        res = run_job(cfg, cfg.policies[0], seed)
        rates = np.asarray(res.metrics.rate_rows[-1][1:])
        devs.append(float(np.abs(rates - 5 / 20).max()))
    ok = max(devs) <= 0.05
    report("criterion 6", ok, "max |c/t - m/K| per seed " + ", ".join(f"{d:.4f}" for d in devs) + " (need <=0.05 each)")
    assert max(devs) <= 0.05


# ---------------------------------------------------------------- 7


@pytest.mark.parametrize("partition", ["iid", "non_iid"])
def test_criterion_7_fedtoy_ordering(partition):
    cfg = experiment({
        "scenario": {
            "num_clients": 20, "num_channels": 5, "partition": partition,
            "latency": {"family": "lognormal", "tiers": [
                {"fraction": 0.5, "median_range": [1.0, 1.2], "spread_range": [0.05, 0.2]},
                {"fraction": 0.5, "median_range": [4.0, 8.0], "spread_range": [0.1, 0.3]}]},
        },
        "policies": [{"kind": "bsfl", "alpha": 5, "beta": 2}, {"kind": "latency_ucb", "beta": 2},
                     {"kind": "random_uniform"}, {"kind": "random_proportional"}],
        "horizon": {"seconds": 3000},
        "seeds": SEEDS,
        "evaluation": {"regret": False, "fedtoy": True},
        "fedtoy": {"total_samples": 70000, "lr": 0.0005, "local_steps": 5, "feature_skew": 0.75},
    })
    finals = {p.name: [] for p in cfg.policies}
    for p in cfg.policies:
        for s in cfg.seeds:
            finals[p.name].append(run_job(cfg, p, s).trace.final_loss)
    med = {k: float(np.median(v)) for k, v in finals.items()}
    ok = all(med["bsfl"] <= v for v in med.values())
    report(f"criterion 7 ({partition})", ok,
           "median final test MSE " + ", ".join(f"{k} {v:.5f}" for k, v in med.items()) + " (BSFL must be lowest)")
    assert ok


def test_criterion_7_gradient_finite_differences():
    from bsfl.fedtoy import DataConfig, gradient, make_dataset, mse
    ds = make_dataset(5, np.random.default_rng(0), "non_iid", DataConfig(total_samples=2000, test_samples=100))
    rng = np.random.default_rng(1)
    worst = 0.0
    for shard in ds.shards:
        w = rng.standard_normal(ds.dim)
        g = gradient(w, shard.x, shard.y)
        # central differences are exact on a quadratic, so a wide step only trims round-off
        h = 1e-3
        fd = np.array([(mse(w + h * e, shard.x, shard.y) - mse(w - h * e, shard.x, shard.y)) / (2 * h)
                       for e in np.eye(ds.dim)])
        worst = max(worst, float(np.max(np.abs(g - fd) / np.maximum(np.abs(fd), 1e-8))))
    report("criterion 7 (gradient)", worst <= 1e-5, f"max relative gradient error {worst:.1e} (<=1e-5)")
    assert worst <= 1e-5


# ---------------------------------------------------------------- 8


def test_criterion_8_determinism(tmp_path):
    raw = {
        "scenario": {"num_clients": 8, "num_channels": 3, "partition": "non_iid",
                     "availability": {"mode": "bernoulli", "p": 0.7}},
        "policies": [{"kind": "bsfl"}, {"name": "alsa", "kind": "bsfl", "solver": "alsa", "budget": 300},
                     {"kind": "random_proportional"}],
        "horizon": {"rounds": 150},
        "seeds": [0, 1],
        "evaluation": {"fedtoy": True, "rate_cadence": 25},
        "fedtoy": {"total_samples": 3000, "test_samples": 300, "budget_seconds": 80},
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(raw))
    outputs = []
    for i, par in enumerate(("1", "1", "2")):
        out = tmp_path / f"run{i}"
        assert cli_main(["run", str(path), "--output-dir", str(out), "--parallelism", par]) == 0
        outputs.append({str(p.relative_to(out)): p.read_bytes() for p in sorted(out.rglob("*.csv"))})
    same = outputs[0] == outputs[1] == outputs[2]
    report("criterion 8", same, f"{len(outputs[0])} CSV files byte-identical across 2 serial reruns and 1 parallel run")
    assert same and len(outputs[0]) == 3 * 2 * 3
