import math

import numpy as np
import pytest

from bsfl.core import ClientProfile, InvalidInput, SystemParams
from bsfl.environment import Availability, Environment, LatencyLaw
from bsfl.generalization import GeneralizationSpec
from bsfl.simulation import LATENCY, make_policy, run_bandit, stream


def env6(avail=None):
    params = SystemParams(6, 2)
    laws = [LatencyLaw.lognormal(math.log(v), 0.3) for v in (1.0, 1.6, 2.5, 4.0, 6.0, 9.0)]
    return Environment(params, [ClientProfile(k, law, 100 * (k + 1)) for k, law in enumerate(laws)], avail)


@pytest.mark.parametrize("kind", ["bsfl", "latency_ucb", "random_uniform", "random_proportional", "genie"])
def test_rerun_identical(kind):
    env = env6()
    spec = GeneralizationSpec.iid(6, 2)
    a = run_bandit(env, make_policy(kind, env.params, spec, env), spec, 80, seed=5)
    b = run_bandit(env, make_policy(kind, env.params, spec, env), spec, 80, seed=5)
    assert [r.chosen for r in a.records] == [r.chosen for r in b.records]
    assert [r.latencies for r in a.records] == [r.latencies for r in b.records]
    assert [r.instantaneous_gap for r in a.records] == [r.instantaneous_gap for r in b.records]


def test_streams_keyed_by_policy_name():
    a = stream(1, LATENCY, "bsfl").random(4)
    np.testing.assert_array_equal(a, stream(1, LATENCY, "bsfl").random(4))
    assert not np.array_equal(a, stream(1, LATENCY, "other").random(4))
    assert not np.array_equal(a, stream(2, LATENCY, "bsfl").random(4))


def test_counters_and_regret():
    env = env6()
    spec = GeneralizationSpec.iid(6, 2)
    run = run_bandit(env, make_policy("bsfl", env.params, spec, env), spec, 300, seed=0)
    assert run.history.t == 300 and run.history.counts.sum() == 600
    gaps = np.array([r.instantaneous_gap for r in run.records])
    assert np.all(gaps >= 0) and run.tracker.negative_gaps == 0
    for r in run.records:
        assert r.genie_expected_reward >= r.policy_expected_reward - 1e-12
        assert r.iteration_latency == max(r.latencies)


def test_seconds_horizon():
    env = env6()
    spec = GeneralizationSpec.iid(6, 2)
    run = run_bandit(env, make_policy("random_uniform", env.params, spec, env), spec, seconds=100.0, seed=2,
                     regret=False)
    clock = [r.cumulative_clock for r in run.records]
    assert clock[-1] <= 100.0 and clock[-1] > 100.0 - env.params.tau_max
    np.testing.assert_allclose(clock, np.cumsum([r.iteration_latency for r in run.records]), rtol=1e-12)


def test_horizon_arguments():
    env = env6()
    spec = GeneralizationSpec.iid(6, 2)
    pol = make_policy("random_uniform", env.params, spec, env)
    with pytest.raises(InvalidInput):
        run_bandit(env, pol, spec)
    with pytest.raises(InvalidInput):
        run_bandit(env, pol, spec, 5, seconds=10.0)


def test_regret_refused_above_cap():
    env = env6()
    spec = GeneralizationSpec.iid(6, 2)
    with pytest.raises(InvalidInput, match="cap"):
        run_bandit(env, make_policy("random_uniform", env.params, spec, env), spec, 5, cap=10)


def test_bernoulli_availability_respected():
    env = env6(Availability("bernoulli", 0.5))
    spec = GeneralizationSpec.iid(6, 2)
    run = run_bandit(env, make_policy("bsfl", env.params, spec, env), spec, 200, seed=1)
    assert all(len(r.chosen) == 2 for r in run.records)
    assert all(r.instantaneous_gap >= 0 for r in run.records)


def test_unknown_kind():
    env = env6()
    with pytest.raises(InvalidInput):
        make_policy("oracle", env.params, GeneralizationSpec.iid(6, 2), env)
