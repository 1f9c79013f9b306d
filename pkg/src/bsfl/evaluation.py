"""Pseudo-regret accounting, the logarithmic regret bound, and per-run metric tables."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import InvalidInput, SelectionHistory, SelectionSet, SystemParams
from .environment import RoundRecord
from .generalization import GeneralizationSpec, g_of_rate, g_vector

NEGATIVE_GAP_TOL = 1e-12


@dataclass
class GapTracker:
    """Counts gaps that came out negative beyond round-off and were floored to zero."""

    negative_gaps: int = 0


def expected_reward(selection: SelectionSet, true_means, g: np.ndarray, params: SystemParams) -> float:
    mu = np.asarray(true_means, dtype=np.float64)
    total = 0.0
    for k in selection:
        total += g[k]
    return float(min(mu[k] for k in selection)) + params.alpha / params.m * total


def instantaneous_gap(genie_set: SelectionSet, policy_set: SelectionSet, true_means,
                      history: SelectionHistory, spec: GeneralizationSpec, params: SystemParams,
                      tracker: GapTracker | None = None, g: np.ndarray | None = None) -> float:
    """Genie's expected reward minus the policy's, both against the policy's history."""
    genie_set.validate(params.K, params.m)
    policy_set.validate(params.K, params.m)
    if g is None:
        g = g_vector(spec, history)
    gap = expected_reward(genie_set, true_means, g, params) - expected_reward(policy_set, true_means, g, params)
    if gap < 0:
        if gap < -NEGATIVE_GAP_TOL and tracker is not None:
            tracker.negative_gaps += 1
        gap = 0.0
    return float(gap)


def theorem1_bound(n: int, params: SystemParams, delta_max: float) -> float:
    """``delta_max * K * (4 (m+1) ln n / delta_min^2 + 1 + pi^2 / 3)``."""
    if n < 1:
        raise InvalidInput(f"n must be >= 1, got {n}")
    if not delta_max > 0:
        raise InvalidInput(f"delta_max must be positive, got {delta_max}")
    inner = 4.0 * (params.m + 1) * math.log(n) / params.delta_min ** 2 + 1.0 + math.pi ** 2 / 3.0
    return delta_max * params.K * inner


def delta_max_estimate(true_means, alpha: float) -> float:
    """Upper bound ``2 alpha + mu_max - mu_min`` on the largest expected-reward gap."""
    mu = np.asarray(true_means, dtype=np.float64)
    if mu.size == 0:
        raise InvalidInput("need at least one mean speed")
    return 2.0 * alpha + float(mu.max() - mu.min())


def _frac(x: float) -> Fraction:
    return Fraction(x).limit_denominator(10 ** 9)


def lattice_delta_min(true_means, params: SystemParams, spec: GeneralizationSpec) -> float:
    """Smallest positive difference between two attainable expected rewards.

    Requires a quantised generalization spec. Enumerates every attainable
    minimum mean speed over m-subsets and every attainable lattice g-sum,
    and returns the smallest positive gap between the resulting rewards.
    """
    if spec.quantum is None:
        raise InvalidInput("exact delta_min needs a quantised generalization spec")
    mu = [_frac(x) for x in true_means]
    mins = {min(mu[k] for k in s) for s in itertools.combinations(range(len(mu)), params.m)}
    q = _frac(spec.quantum)
    # g ranges over [-(1 - target)^beta, target^beta] before quantisation
    lo = g_of_rate(spec, np.ones(spec.num_clients))
    hi = g_of_rate(spec, np.zeros(spec.num_clients))
    j_lo = min(int(round(v / spec.quantum)) for v in lo)
    j_hi = max(int(round(v / spec.quantum)) for v in hi)
    coef = _frac(params.alpha) / params.m * q
    sums = range(params.m * j_lo, params.m * j_hi + 1)
    values = sorted({a + coef * s for a in mins for s in sums})
    gaps = [b - a for a, b in zip(values, values[1:]) if b > a]
    return float(min(gaps))


# ------------------------------------------------------------ metric tables

METRIC_COLUMNS = (
    "t", "policy", "seed", "cumulative_regret", "instantaneous_gap", "realized_reward",
    "iteration_latency", "cumulative_clock", "chosen_set",
)


@dataclass
class MetricTable:
    columns: tuple[str, ...] = METRIC_COLUMNS
    rows: list[tuple] = field(default_factory=list)
    rate_columns: tuple[str, ...] = ()
    rate_rows: list[tuple] = field(default_factory=list)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    @property
    def final_regret(self) -> float:
        return self.rows[-1][3] if self.rows else 0.0


def collect_metrics(records: Sequence[RoundRecord], policy: str = "", seed: int = 0,
                    rate_cadence: int = 0, num_clients: int | None = None) -> MetricTable:
    """Per-round rows plus ``c[k]/t`` snapshots every ``rate_cadence`` rounds (0 disables)."""
    if num_clients is None:
        num_clients = len(records[0].rates) if records and records[0].rates is not None else 0
    table = MetricTable(rate_columns=("t",) + tuple(f"client_{k}" for k in range(num_clients)))
    regret = 0.0
    for rec in records:
        regret += rec.instantaneous_gap
        table.rows.append((
            rec.t, policy, seed, regret, rec.instantaneous_gap, rec.realized_reward,
            rec.iteration_latency, rec.cumulative_clock, str(rec.chosen),
        ))
        if rate_cadence > 0 and rec.t % rate_cadence == 0 and rec.rates is not None:
            table.rate_rows.append((rec.t,) + tuple(float(x) for x in rec.rates))
    return table


def regret_curve(records: Sequence[RoundRecord]) -> np.ndarray:
    return np.cumsum([r.instantaneous_gap for r in records])
