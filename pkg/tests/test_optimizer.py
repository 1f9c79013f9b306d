import itertools
import math
from collections import deque

import numpy as np
import pytest

from bsfl.core import Energy, InvalidInput, SelectionSet
from bsfl.optimizer import (
    AnnealerConfig,
    ScoreTable,
    SolverRefused,
    anneal,
    construct_path_to_optimum,
    energy,
    is_lightweight_neighbor,
    neighbors_classic,
    neighbors_lightweight,
    solve_exhaustive,
    write_trace_csv,
)

from conftest import random_table


def brute_energy(members, table):
    """Independent scalar evaluation of the set energy."""
    mn = min(table.scores[k] for k in members)
    tie = 0.0
    for k in sorted(members):
        tie += table.g[k]
    tie *= table.coef
    if math.isinf(mn):
        return (1, tie, tie)
    return (0, mn + tie, tie)


def brute_argmax(table):
    best = None
    for c in itertools.combinations(table.available.tolist(), table.m):
        e = brute_energy(c, table)
        if best is None or e > best[1]:
            best = (c, e)
    return best


def all_states(table):
    return [SelectionSet(c) for c in itertools.combinations(table.available.tolist(), table.m)]


def lightweight_by_predicate(s, table):
    return {u for u in neighbors_classic(s, table) if is_lightweight_neighbor(s, u, table)}


class TestEnergy:
    def test_hand_example(self):
        t = ScoreTable.build([0.9, 0.5, 0.1], [0, 0, 0], 1.0, 2)
        assert energy(SelectionSet.of([0, 1]), t) == Energy.finite(0.5, 0.0)

    def test_unobserved_sentinel_minimum(self):
        t = ScoreTable.build([np.inf, np.inf, 0.1], [0.2, 0.4, 0.0], 1.0, 2)
        e = energy(SelectionSet.of([0, 1]), t)
        assert not e.is_finite and e.tiebreak_g == pytest.approx(0.3)
        assert e > energy(SelectionSet.of([1, 2]), t)

    def test_partly_unobserved_min_is_finite(self):
        # the min runs over the score term, so one observed member makes it finite
        t = ScoreTable.build([np.inf, 0.5, 0.1], [0.2, 0.0, 0.0], 1.0, 2)
        assert energy(SelectionSet.of([0, 2]), t) == Energy.finite(0.1 + 0.1, 0.1)

    def test_alpha_zero_pure_min(self, rng):
        t = ScoreTable.build(rng.uniform(size=6), rng.uniform(-1, 1, 6), 0.0, 3)
        e = energy(SelectionSet.of([1, 2, 4]), t)
        assert e.value == t.scores[[1, 2, 4]].min()

    def test_not_available(self):
        t = ScoreTable.build([0.9, 0.5, 0.1], [0, 0, 0], 1.0, 1, available=[0, 1])
        with pytest.raises(InvalidInput):
            energy(SelectionSet.of([2]), t)

    @pytest.mark.parametrize("kw", [dict(m=4), dict(m=0), dict(available=[0, 5])])
    def test_table_rejects(self, kw):
        args = dict(scores=[0.1, 0.2, 0.3], g=[0, 0, 0], alpha=1.0, m=2) | kw
        with pytest.raises(InvalidInput):
            ScoreTable.build(**args)


class TestExhaustive:
    def test_hand_example(self):
        sol = solve_exhaustive(ScoreTable.build([0.9, 0.5, 0.1], [0, 0, 0], 1.0, 2))
        assert sol.selection == SelectionSet.of([0, 1])
        assert sol.energy.value == 0.5

    def test_full_set(self, rng):
        t = random_table(rng, 5, 5)
        assert solve_exhaustive(t).selection.members == (0, 1, 2, 3, 4)

    @pytest.mark.parametrize("ties,unobserved", [(False, 0.0), (True, 0.0), (False, 0.4), (True, 0.3)])
    def test_matches_brute_force(self, ties, unobserved):
        rng = np.random.default_rng(int(ties) * 10 + int(unobserved * 10))
        for _ in range(60):
            K = int(rng.integers(3, 9))
            m = int(rng.integers(1, K + 1))
            t = random_table(rng, K, m, rng.uniform(0, 3), unobserved, ties)
            sol = solve_exhaustive(t)
            members, e = brute_argmax(t)
            assert sol.selection.members == members
            assert sol.energy.key() == e

    def test_available_subset(self, rng):
        t = random_table(rng, 8, 3)
        t = ScoreTable.build(t.scores, t.g, 1.0, 3, available=[1, 3, 4, 6, 7])
        sol = solve_exhaustive(t)
        assert set(sol.selection) <= {1, 3, 4, 6, 7}
        assert sol.selection.members == brute_argmax(t)[0]

    def test_relabel_symmetry(self, rng):
        for _ in range(20):
            t = random_table(rng, 7, 3)
            perm = rng.permutation(7)
            # client k of the relabelled table is client perm[k] of the original
            t2 = ScoreTable.build(t.scores[perm], t.g[perm], t.alpha, 3)
            a = solve_exhaustive(t).selection
            b = solve_exhaustive(t2).selection
            assert SelectionSet.of(perm[list(b)]) == a

    def test_cap_refusal(self, rng):
        t = random_table(rng, 30, 15)
        with pytest.raises(SolverRefused, match="alsa"):
            solve_exhaustive(t)


class TestNeighborhoods:
    def test_classic_degree(self, rng):
        t = random_table(rng, 7, 3)
        for s in all_states(t):
            nb = neighbors_classic(s, t)
            assert len(nb) == len(set(nb)) == 3 * 4

    def test_m_equals_k(self, rng):
        t = random_table(rng, 4, 4)
        s = SelectionSet.of(range(4))
        assert neighbors_classic(s, t) == [] and neighbors_lightweight(s, t) == []

    @pytest.mark.parametrize("ties", [False, True])
    def test_lightweight_equals_predicate_filter(self, ties):
        rng = np.random.default_rng(3 + ties)
        for _ in range(30):
            K = int(rng.integers(4, 9))
            m = int(rng.integers(1, K))
            t = random_table(rng, K, m, 1.0, 0.2, ties)
            for s in all_states(t):
                got = neighbors_lightweight(s, t)
                assert len(got) == len(set(got))
                assert set(got) == lightweight_by_predicate(s, t)

    def test_symmetry_all_pairs(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            t = random_table(rng, 7, 3, 1.0, 0.0, True)
            for s in all_states(t):
                for u in neighbors_lightweight(s, t):
                    assert s in neighbors_lightweight(u, t)
                for u in neighbors_classic(s, t):
                    assert s in neighbors_classic(u, t)

    def test_constructed_branch_b_empty(self):
        # client 0 is the strict score-minimiser and client 1 the strict g-minimiser of S,
        # and both are strictly below every outsider
        K, m = 8, 3
        scores = np.array([0.05, 0.6, 0.5, 0.7, 0.8, 0.9, 0.75, 0.65])
        g = np.array([0.5, -0.9, 0.1, 0.2, 0.3, 0.4, 0.25, 0.35])
        t = ScoreTable.build(scores, g, 1.0, m)
        s = SelectionSet.of([0, 1, 2])
        nb = neighbors_lightweight(s, t)
        assert len(nb) == 2 * (K - m)
        assert all(0 not in u or 1 not in u for u in nb)

    def test_lightweight_connected(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            t = random_table(rng, 7, 3, 1.0, 0.0, True)
            states = all_states(t)
            seen = {states[0]}
            q = deque([states[0]])
            while q:
                for u in neighbors_lightweight(q.popleft(), t):
                    if u not in seen:
                        seen.add(u)
                        q.append(u)
            assert len(seen) == len(states)


class TestAnneal:
    def test_single_state(self, rng):
        t = random_table(rng, 4, 4)
        res = anneal(t, AnnealerConfig(1), rng)
        assert res.selection.members == (0, 1, 2, 3)
        assert len(res.trace) == 1

    def test_budget_one_returns_start(self, rng):
        t = random_table(rng, 10, 3)
        a = anneal(t, AnnealerConfig(1, neighborhood="lightweight"), np.random.default_rng(9))
        b = anneal(t, AnnealerConfig(1, neighborhood="classic"), np.random.default_rng(9))
        assert a.selection == b.selection

    def test_best_trace_non_decreasing(self, rng):
        t = random_table(rng, 20, 5)
        for hood in ("classic", "lightweight"):
            tr = anneal(t, AnnealerConfig(2000, neighborhood=hood), rng).trace
            assert np.all(np.diff(tr.best) >= 0)
            assert np.all(tr.best >= tr.current)

    def test_result_energy_consistent(self, rng):
        t = random_table(rng, 12, 4, 1.0, 0.2)
        res = anneal(t, AnnealerConfig(500), rng)
        assert energy(res.selection, t) == res.energy

    def test_reaches_optimum_small(self):
        hits = 0
        for i in range(100):
            rng = np.random.default_rng(i)
            t = random_table(rng, 10, 3)
            res = anneal(t, AnnealerConfig(5000, neighborhood="lightweight"), rng)
            hits += res.energy == solve_exhaustive(t).energy
        assert hits >= 95

    def test_config_rejects(self):
        with pytest.raises(InvalidInput):
            AnnealerConfig(0)
        with pytest.raises(InvalidInput):
            AnnealerConfig(10, d=0.0)
        with pytest.raises(InvalidInput):
            AnnealerConfig(10, neighborhood="fancy")

    def test_trace_csv(self, rng, tmp_path):
        t = random_table(rng, 6, 2)
        res = anneal(t, AnnealerConfig(5), rng)
        path = tmp_path / "trace.csv"
        write_trace_csv(res.trace, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "step,current_energy,best_energy,temperature"
        assert len(lines) == 6


class TestPaths:
    def test_trivial(self, rng):
        t = random_table(rng, 6, 2)
        s = SelectionSet.of([0, 1])
        assert construct_path_to_optimum(s, s, t).path == [s]

    @pytest.mark.parametrize("K,m", [(6, 2), (7, 3), (8, 4)])
    def test_all_pairs_validate(self, K, m):
        rng = np.random.default_rng(K * 10 + m)
        for _ in range(5):
            t = random_table(rng, K, m, 1.0, 0.0, True)
            states = all_states(t)
            opt = solve_exhaustive(t).selection
            for s in states:
                res = construct_path_to_optimum(s, opt, t)
                assert res.path[0] == s and res.path[-1] == opt
                for a, b in zip(res.path, res.path[1:]):
                    assert b in neighbors_lightweight(a, t)
                if res.method == "two_phase":
                    assert len(res.path) - 1 <= 2 * m
