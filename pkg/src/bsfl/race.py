"""Paired annealer comparison on frozen random score tables.

Both chains of an instance draw from identically seeded generators, so they
start from the same subset and see the same uniforms; only the neighbourhood
differs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .generalization import GeneralizationSpec, g_of_rate
from .optimizer import AnnealerConfig, ScoreTable, anneal, solve_exhaustive

GENERATORS = ("ucb", "uniform")


def make_table(K: int, m: int, alpha: float, rng: np.random.Generator, generator: str = "ucb") -> ScoreTable:
    """A random score table.

    ``ucb``: scores are UCB indices of random counts and means, and g comes
    from the implied selection rates (iid targets, beta 2). ``uniform``:
    scores ~ U(0, 1) and g ~ U(-1, 1).
    """
    if generator == "uniform":
        return ScoreTable.build(rng.uniform(0.0, 1.0, K), rng.uniform(-1.0, 1.0, K), alpha, m)
    if generator != "ucb":
        raise ValueError(f"unknown table generator {generator!r}")
    counts = rng.integers(1, 201, K)
    mu = rng.uniform(0.1, 1.0, K)
    t = max(int(counts.sum()) // m, int(counts.max()))
    scores = mu + np.sqrt((m + 1) * np.log(t) / counts)
    g = g_of_rate(GeneralizationSpec.iid(K, m, 2), counts / t)
    return ScoreTable.build(scores, g, alpha, m)


@dataclass
class RaceReport:
    alsa_best: list[float] = field(default_factory=list)
    sa_best: list[float] = field(default_factory=list)
    optimum: list[float] = field(default_factory=list)
    alsa_mean_trace: np.ndarray | None = None
    sa_mean_trace: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.alsa_best)

    def counts(self) -> tuple[int, int, int]:
        a = np.asarray(self.alsa_best)
        s = np.asarray(self.sa_best)
        return int((a > s).sum()), int((a == s).sum()), int((a < s).sum())

    @property
    def win_or_tie_rate(self) -> float:
        w, t, _ = self.counts()
        return (w + t) / self.n if self.n else 0.0

    def optimum_matches(self) -> tuple[int, int]:
        if not self.optimum:
            return 0, 0
        o = np.asarray(self.optimum)
        return int((np.asarray(self.alsa_best) == o).sum()), int((np.asarray(self.sa_best) == o).sum())


def energy_race(K: int, m: int, instances: int, steps: int, alpha: float = 1.0, d: float | None = None,
                seed: int = 0, generator: str = "ucb", check_exhaustive: bool = False) -> RaceReport:
    report = RaceReport()
    sum_a = np.zeros(steps)
    sum_s = np.zeros(steps)
    for i in range(instances):
        table = make_table(K, m, alpha, np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i, 0))), generator)
        chain = np.random.SeedSequence(seed, spawn_key=(i, 1))
        a = anneal(table, AnnealerConfig(steps, d, "lightweight"), np.random.default_rng(chain))
        s = anneal(table, AnnealerConfig(steps, d, "classic"), np.random.default_rng(chain))
        report.alsa_best.append(a.energy.value)
        report.sa_best.append(s.energy.value)
        sum_a += a.trace.best
        sum_s += s.trace.best
        if check_exhaustive:
            report.optimum.append(solve_exhaustive(table).energy.value)
    report.alsa_mean_trace = sum_a / max(instances, 1)
    report.sa_mean_trace = sum_s / max(instances, 1)
    return report
