"""Experiment configuration: a single JSON document, validated fail-closed.

Errors carry the line of the offending key so a typo in a large sweep file
can be found quickly.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Any

from .environment import Family
from .fedtoy import PARTITIONS
from .optimizer import DEFAULT_ENUMERATION_CAP
from .policies import SOLVERS
from .race import GENERATORS as RACE_GENERATORS
from .simulation import POLICY_KINDS

FAMILIES = tuple(f.value for f in Family)


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str = "config"):
        self.line = line
        self.source = source
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class TierConfig:
    fraction: float = 1.0
    median_range: tuple[float, float] = (1.2, 6.0)
    spread_range: tuple[float, float] = (0.1, 0.5)


@dataclass(frozen=True)
class ScenarioConfig:
    num_clients: int = 20
    num_channels: int = 5
    tau_min: float = 1.0
    tau_max: float = 10.0
    delta_min: float = 0.01
    family: str = "lognormal"
    tiers: tuple[TierConfig, ...] = (TierConfig(),)
    availability: str = "full"
    availability_p: float = 1.0
    partition: str = "iid"
    data_size_range: tuple[int, int] = (1000, 1000)
    quantum: float | None = None


@dataclass(frozen=True)
class PolicyConfig:
    name: str
    kind: str
    alpha: float = 1.0
    beta: int = 2
    solver: str = "exhaustive"
    budget: int = 5000


@dataclass(frozen=True)
class FedtoyConfig:
    total_samples: int = 70_000
    test_samples: int = 10_000
    dim: int = 10
    noise_sd: float = 0.5
    noise_range: tuple[float, float] = (0.1, 3.0)
    size_spread: float = 1.0
    feature_skew: float = 0.75
    local_steps: int = 5
    lr: float = 0.01
    budget_seconds: float | None = None


@dataclass(frozen=True)
class RaceConfig:
    num_clients: int = 100
    num_channels: int = 10
    instances: int = 200
    steps: int = 5000
    alpha: float = 1.0
    d: float | None = None
    seed: int = 0
    generator: str = "ucb"
    check_exhaustive: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    policies: tuple[PolicyConfig, ...] = ()
    rounds: int | None = None
    seconds: float | None = None
    seeds: tuple[int, ...] = (0,)
    output_dir: str = "results"
    regret: bool = True
    fedtoy_on: bool = False
    rate_cadence: int = 0
    fedtoy: FedtoyConfig = field(default_factory=FedtoyConfig)
    race: RaceConfig = field(default_factory=RaceConfig)
    cap: int = DEFAULT_ENUMERATION_CAP


# ------------------------------------------------------------------ parsing


class _Reader:
    """Walks the decoded JSON while remembering where each key sits in the text."""

    def __init__(self, text: str, source: str):
        self.text = text
        self.source = source
        self.lines = text.splitlines()

    def line_of(self, path: tuple) -> int | None:
        """Best-effort line of the last key in ``path`` (keys searched in order)."""
        pos = 0
        line = None
        for part in path:
            if isinstance(part, int):
                # skip forward past ``part`` earlier elements of the list
                for _ in range(part):
                    nxt = self.text.find("{", pos + 1)
                    if nxt < 0:
                        break
                    pos = nxt
                continue
            mt = re.compile(r'"%s"\s*:' % re.escape(part)).search(self.text, pos)
            if mt is None:
                return line
            pos = mt.start()
            line = self.text.count("\n", 0, pos) + 1
        return line

    def fail(self, path: tuple, message: str):
        name = ".".join(str(p) for p in path)
        raise ConfigError(f"{name}: {message}" if name else message, self.line_of(path), self.source)


def _check_keys(r: _Reader, obj: Any, allowed, path: tuple):
    if not isinstance(obj, dict):
        r.fail(path, f"expected an object, got {type(obj).__name__}")
    for key in obj:
        if key not in allowed:
            r.fail(path + (key,), f"unknown key (allowed: {', '.join(sorted(allowed))})")


def _num(r, obj, key, path, default, kind=float, lo=None, hi=None, lo_open=False, allow_none=False):
    if key not in obj:
        return default
    v = obj[key]
    p = path + (key,)
    if v is None and allow_none:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        r.fail(p, f"expected a number, got {json.dumps(v)}")
    if kind is int and (not isinstance(v, int) and not float(v).is_integer()):
        r.fail(p, f"expected an integer, got {v}")
    if not math.isfinite(v):
        r.fail(p, "must be finite")
    v = kind(v)
    if lo is not None and (v <= lo if lo_open else v < lo):
        r.fail(p, f"must be {'>' if lo_open else '>='} {lo}, got {v}")
    if hi is not None and v > hi:
        r.fail(p, f"must be <= {hi}, got {v}")
    return v


def _choice(r, obj, key, path, default, options):
    if key not in obj:
        return default
    v = obj[key]
    if v not in options:
        r.fail(path + (key,), f"must be one of {', '.join(options)}, got {json.dumps(v)}")
    return v


def _bool(r, obj, key, path, default):
    if key not in obj:
        return default
    if not isinstance(obj[key], bool):
        r.fail(path + (key,), f"expected true or false, got {json.dumps(obj[key])}")
    return obj[key]


def _pair(r, obj, key, path, default, kind=float, lo=0.0, lo_open=False):
    if key not in obj:
        return default
    v = obj[key]
    p = path + (key,)
    if not isinstance(v, list) or len(v) != 2:
        r.fail(p, "expected a two-element list [low, high]")
    a = _num(r, {"0": v[0]}, "0", p, None, kind, lo, lo_open=lo_open)
    b = _num(r, {"1": v[1]}, "1", p, None, kind, lo, lo_open=lo_open)
    if a > b:
        r.fail(p, f"low {a} exceeds high {b}")
    return (a, b)


def _scenario(r: _Reader, obj, path) -> ScenarioConfig:
    allowed = {"num_clients", "num_channels", "tau_min", "tau_max", "delta_min", "latency",
               "availability", "partition", "data_size_range", "quantum"}
    _check_keys(r, obj, allowed, path)
    d = ScenarioConfig()
    K = _num(r, obj, "num_clients", path, d.num_clients, int, 1)
    m = _num(r, obj, "num_channels", path, d.num_channels, int, 1)
    if m > K:
        r.fail(path + ("num_channels",), f"m={m} exceeds num_clients K={K}")
    tau_min = _num(r, obj, "tau_min", path, d.tau_min, float, 0.0, lo_open=True)
    tau_max = _num(r, obj, "tau_max", path, d.tau_max, float, 0.0, lo_open=True)
    if tau_max <= tau_min:
        r.fail(path + ("tau_max",), f"must exceed tau_min={tau_min}, got {tau_max}")
    family, tiers = d.family, d.tiers
    if "latency" in obj:
        lat = obj["latency"]
        lp = path + ("latency",)
        _check_keys(r, lat, {"family", "median_range", "spread_range", "tiers"}, lp)
        family = _choice(r, lat, "family", lp, d.family, FAMILIES)
        if "tiers" in lat:
            if "median_range" in lat or "spread_range" in lat:
                r.fail(lp, "give either tiers or median_range/spread_range, not both")
            if not isinstance(lat["tiers"], list) or not lat["tiers"]:
                r.fail(lp + ("tiers",), "expected a non-empty list")
            out = []
            for i, t in enumerate(lat["tiers"]):
                tp = lp + ("tiers", i)
                _check_keys(r, t, {"fraction", "median_range", "spread_range"}, tp)
                out.append(TierConfig(
                    _num(r, t, "fraction", tp, 1.0, float, 0.0, lo_open=True),
                    _pair(r, t, "median_range", tp, TierConfig.median_range, lo=0.0, lo_open=True),
                    _pair(r, t, "spread_range", tp, TierConfig.spread_range),
                ))
            tiers = tuple(out)
        else:
            tiers = (TierConfig(
                1.0,
                _pair(r, lat, "median_range", lp, TierConfig.median_range, lo=0.0, lo_open=True),
                _pair(r, lat, "spread_range", lp, TierConfig.spread_range),
            ),)
    avail, p = d.availability, d.availability_p
    if "availability" in obj:
        av = obj["availability"]
        ap = path + ("availability",)
        _check_keys(r, av, {"mode", "p"}, ap)
        avail = _choice(r, av, "mode", ap, d.availability, ("full", "bernoulli"))
        p = _num(r, av, "p", ap, 1.0, float, 0.0, 1.0, lo_open=True)
    return ScenarioConfig(
        num_clients=K, num_channels=m, tau_min=tau_min, tau_max=tau_max,
        delta_min=_num(r, obj, "delta_min", path, d.delta_min, float, 0.0, lo_open=True),
        family=family, tiers=tiers, availability=avail, availability_p=p,
        partition=_choice(r, obj, "partition", path, d.partition, PARTITIONS),
        data_size_range=_pair(r, obj, "data_size_range", path, d.data_size_range, int, 1),
        quantum=_num(r, obj, "quantum", path, None, float, 0.0, lo_open=True, allow_none=True),
    )


def _policies(r: _Reader, obj, path) -> tuple[PolicyConfig, ...]:
    if not isinstance(obj, list) or not obj:
        r.fail(path, "expected a non-empty list of policies")
    out = []
    names = set()
    for i, p in enumerate(obj):
        pp = path + (i,)
        _check_keys(r, p, {"name", "kind", "alpha", "beta", "solver", "budget"}, pp)
        if "kind" not in p:
            r.fail(pp, "missing required key 'kind'")
        kind = _choice(r, p, "kind", pp, None, POLICY_KINDS)
        name = p.get("name", kind)
        if not isinstance(name, str) or not re.fullmatch(r"[A-Za-z0-9_.-]+", name):
            r.fail(pp + ("name",), f"names may use letters, digits, '_', '.', '-' only, got {json.dumps(name)}")
        if name in names:
            r.fail(pp + ("name",), f"duplicate policy name {name!r}")
        names.add(name)
        out.append(PolicyConfig(
            name=name, kind=kind,
            alpha=_num(r, p, "alpha", pp, 1.0, float, 0.0),
            beta=_num(r, p, "beta", pp, 2, int, 1),
            solver=_choice(r, p, "solver", pp, "exhaustive", SOLVERS),
            budget=_num(r, p, "budget", pp, 5000, int, 1),
        ))
    return tuple(out)


def _fedtoy(r: _Reader, obj, path) -> FedtoyConfig:
    allowed = {"total_samples", "test_samples", "dim", "noise_sd", "noise_range", "size_spread",
               "feature_skew", "local_steps", "lr", "budget_seconds"}
    _check_keys(r, obj, allowed, path)
    d = FedtoyConfig()
    return FedtoyConfig(
        total_samples=_num(r, obj, "total_samples", path, d.total_samples, int, 1),
        test_samples=_num(r, obj, "test_samples", path, d.test_samples, int, 1),
        dim=_num(r, obj, "dim", path, d.dim, int, 1),
        noise_sd=_num(r, obj, "noise_sd", path, d.noise_sd, float, 0.0),
        noise_range=_pair(r, obj, "noise_range", path, d.noise_range),
        size_spread=_num(r, obj, "size_spread", path, d.size_spread, float, 0.0),
        feature_skew=_num(r, obj, "feature_skew", path, d.feature_skew, float, 0.0),
        local_steps=_num(r, obj, "local_steps", path, d.local_steps, int, 0),
        lr=_num(r, obj, "lr", path, d.lr, float, 0.0, lo_open=True),
        budget_seconds=_num(r, obj, "budget_seconds", path, None, float, 0.0, lo_open=True, allow_none=True),
    )


def _race(r: _Reader, obj, path) -> RaceConfig:
    allowed = {"num_clients", "num_channels", "instances", "steps", "alpha", "d", "seed", "generator",
               "check_exhaustive"}
    _check_keys(r, obj, allowed, path)
    d = RaceConfig()
    K = _num(r, obj, "num_clients", path, d.num_clients, int, 1)
    m = _num(r, obj, "num_channels", path, d.num_channels, int, 1)
    if m > K:
        r.fail(path + ("num_channels",), f"m={m} exceeds num_clients K={K}")
    return RaceConfig(
        num_clients=K, num_channels=m,
        instances=_num(r, obj, "instances", path, d.instances, int, 1),
        steps=_num(r, obj, "steps", path, d.steps, int, 1),
        alpha=_num(r, obj, "alpha", path, d.alpha, float, 0.0),
        d=_num(r, obj, "d", path, None, float, 0.0, lo_open=True, allow_none=True),
        seed=_num(r, obj, "seed", path, d.seed, int, 0),
        generator=_choice(r, obj, "generator", path, d.generator, RACE_GENERATORS),
        check_exhaustive=_bool(r, obj, "check_exhaustive", path, d.check_exhaustive),
    )


def parse_config(text: str, source: str = "config", need_policies: bool = True) -> ExperimentConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})", exc.lineno, source) from None
    r = _Reader(text, source)
    top = {"scenario", "policies", "horizon", "seeds", "output_dir", "evaluation", "fedtoy", "race"}
    _check_keys(r, raw, top, ())
    scenario = _scenario(r, raw.get("scenario", {}), ("scenario",))
    policies = _policies(r, raw["policies"], ("policies",)) if "policies" in raw else ()
    if need_policies and not policies:
        r.fail(("policies",), "at least one policy is required")

    rounds = seconds = None
    if "horizon" in raw:
        h = raw["horizon"]
        _check_keys(r, h, {"rounds", "seconds"}, ("horizon",))
        rounds = _num(r, h, "rounds", ("horizon",), None, int, 1)
        seconds = _num(r, h, "seconds", ("horizon",), None, float, 0.0, lo_open=True)
        if (rounds is None) == (seconds is None):
            r.fail(("horizon",), "give exactly one of rounds or seconds")
    elif need_policies:
        r.fail(("horizon",), "missing required section")

    seeds = (0,)
    if "seeds" in raw:
        s = raw["seeds"]
        if not isinstance(s, list) or not s:
            r.fail(("seeds",), "expected a non-empty list of integers")
        for v in s:
            if isinstance(v, bool) or not isinstance(v, int) or v < 0:
                r.fail(("seeds",), f"seeds must be non-negative integers, got {json.dumps(v)}")
        if len(set(s)) != len(s):
            r.fail(("seeds",), "seeds must be distinct")
        seeds = tuple(s)

    output_dir = raw.get("output_dir", "results")
    if not isinstance(output_dir, str) or not output_dir:
        r.fail(("output_dir",), "expected a non-empty path string")

    regret, fed_on, cadence = True, False, 0
    if "evaluation" in raw:
        ev = raw["evaluation"]
        _check_keys(r, ev, {"regret", "fedtoy", "rate_cadence"}, ("evaluation",))
        regret = _bool(r, ev, "regret", ("evaluation",), True)
        fed_on = _bool(r, ev, "fedtoy", ("evaluation",), False)
        cadence = _num(r, ev, "rate_cadence", ("evaluation",), 0, int, 0)

    fedtoy = _fedtoy(r, raw.get("fedtoy", {}), ("fedtoy",))
    if fed_on and fedtoy.budget_seconds is None and seconds is None:
        r.fail(("fedtoy",), "fedtoy needs a time budget: set fedtoy.budget_seconds or horizon.seconds")
    race = _race(r, raw.get("race", {}), ("race",))

    cfg = ExperimentConfig(
        scenario=scenario, policies=policies, rounds=rounds, seconds=seconds, seeds=seeds,
        output_dir=output_dir, regret=regret, fedtoy_on=fed_on, rate_cadence=cadence,
        fedtoy=fedtoy, race=race,
    )
    if regret and policies:
        n_sets = math.comb(scenario.num_clients, scenario.num_channels)
        if n_sets > cfg.cap:
            r.fail(("evaluation", "regret"),
                   f"regret needs the exact genie, but C({scenario.num_clients},{scenario.num_channels}) = "
                   f"{n_sets} exceeds the enumeration cap {cfg.cap}; set regret to false")
    for i, p in enumerate(policies):
        if p.kind in ("bsfl", "latency_ucb", "genie") and p.solver == "exhaustive" \
                and math.comb(scenario.num_clients, scenario.num_channels) > cfg.cap:
            r.fail(("policies", i, "solver"), "exhaustive solver exceeds the enumeration cap; use alsa or sa")
    return cfg


def load_config(path: str, need_policies: bool = True) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(path)) from None
    return parse_config(text, str(path), need_policies)
