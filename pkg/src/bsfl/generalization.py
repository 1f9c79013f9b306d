"""History-dependent generalization scores ``g_k`` in [-1, 1].

A client selected less often than its target rate gets a positive score,
one selected more often a negative score, and exactly zero at the target.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import InvalidInput, SelectionHistory, SelectionSet


class Mode(str, enum.Enum):
    IID_BALANCED = "iid"
    NON_IID_WEIGHTED = "non_iid"


@dataclass(frozen=True)
class GeneralizationSpec:
    mode: Mode
    beta: int
    target_rate: np.ndarray
    # Optional reward lattice: scores are rounded to multiples of ``quantum``.
    quantum: float | None = None

    def __post_init__(self):
        if int(self.beta) != self.beta or self.beta < 1:
            raise InvalidInput(f"beta must be a natural number, got {self.beta}")
        if self.quantum is not None and self.quantum <= 0:
            raise InvalidInput(f"quantum must be positive, got {self.quantum}")

    @classmethod
    def iid(cls, num_clients: int, m: int, beta: int = 2, quantum: float | None = None):
        return cls(Mode.IID_BALANCED, int(beta), np.full(num_clients, m / num_clients), quantum)

    @classmethod
    def non_iid(cls, significance, m: int, beta: int = 2, quantum: float | None = None):
        d = np.asarray(significance, dtype=np.float64)
        if np.any(d <= 0):
            raise InvalidInput("client significance q_k * |X_k| must be positive")
        return cls(Mode.NON_IID_WEIGHTED, int(beta), m * d / d.sum(), quantum)

    @classmethod
    def for_clients(cls, profiles, m: int, beta: int, mode: Mode | str = Mode.IID_BALANCED,
                    quantum: float | None = None):
        mode = Mode(mode)
        if mode is Mode.IID_BALANCED:
            return cls.iid(len(profiles), m, beta, quantum)
        return cls.non_iid([p.significance for p in profiles], m, beta, quantum)

    @property
    def num_clients(self) -> int:
        return self.target_rate.shape[0]


def g_of_rate(spec: GeneralizationSpec, rates: np.ndarray) -> np.ndarray:
    """Vectorised score for an array of selection rates ``c/t``."""
    diff = spec.target_rate - np.asarray(rates, dtype=np.float64)
    g = np.abs(diff) ** spec.beta * np.sign(diff)
    g = np.clip(g, -1.0, 1.0)
    if spec.quantum is not None:
        q = spec.quantum
        g = np.round(g / q) * q
        # stay inside the codomain when +-1 is not on the lattice
        over = np.abs(g) > 1.0
        g[over] = np.trunc(g[over] / q) * q
    return g


def g_vector(spec: GeneralizationSpec, history: SelectionHistory) -> np.ndarray:
    if history.num_clients != spec.num_clients:
        raise InvalidInput("history and spec disagree on the number of clients")
    return g_of_rate(spec, history.rates())


def g_value(spec: GeneralizationSpec, history: SelectionHistory, client: int) -> float:
    if not 0 <= client < spec.num_clients:
        raise InvalidInput(f"client id {client} out of range")
    return float(g_vector(spec, history)[client])


def g_sum(spec: GeneralizationSpec, history: SelectionHistory, chosen: SelectionSet) -> float:
    """Raw sum of member scores; the caller applies ``alpha / m``."""
    g = g_vector(spec, history)
    total = 0.0
    for k in chosen:
        total += g[k]
    return float(total)
