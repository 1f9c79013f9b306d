"""Command-line experiment runner.

    bsfl run config.json [--output-dir DIR] [--parallelism N] [--no-plots]
    bsfl compare-optimizers config.json [--output-dir DIR] [--no-plots]
    bsfl validate config.json
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config
from .evaluation import METRIC_COLUMNS
from .experiment import JobResult, median_curve, run_job
from .fedtoy import TRACE_COLUMNS
from .race import energy_race
from .svgplot import line_chart

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


# ------------------------------------------------------------------ output


def atomic_write(path: Path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename over ``path``."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            raise ValueError(f"refusing to write non-finite value {v!r}")
        return repr(v)
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _stem(policy: str, seed: int) -> str:
    return f"{policy}__seed{seed}"


def write_job(out: Path, res: JobResult) -> list[Path]:
    stem = _stem(res.policy, res.seed)
    written = [out / "metrics" / f"{stem}.csv"]
    atomic_write(written[-1], csv_text(METRIC_COLUMNS, res.metrics.rows))
    if res.metrics.rate_rows:
        written.append(out / "rates" / f"{stem}.csv")
        atomic_write(written[-1], csv_text(res.metrics.rate_columns, res.metrics.rate_rows))
    if res.trace is not None:
        written.append(out / "fedtoy" / f"{stem}.csv")
        atomic_write(written[-1], csv_text(TRACE_COLUMNS, res.trace.rows()))
    return written


def summary_entry(res: JobResult) -> dict:
    return {
        "policy": res.policy,
        "kind": res.kind,
        "seed": res.seed,
        "rounds_completed": res.rounds,
        "final_regret": res.final_regret,
        "final_clock": res.final_clock,
        "final_loss": res.trace.final_loss if res.trace is not None else None,
        "fedtoy_rounds": res.trace.completed_rounds if res.trace is not None else None,
        "negative_gaps": res.negative_gaps,
        "wall_time_seconds": round(res.wall_time, 3),
    }


def write_plots(out: Path, cfg: ExperimentConfig, results: list[JobResult]) -> None:
    names = [p.name for p in cfg.policies]
    if cfg.regret:
        series = []
        for name in names:
            curves = [r.metrics.column("cumulative_regret") for r in results if r.policy == name]
            if curves and min(len(c) for c in curves) > 0:
                med = median_curve(curves)
                series.append((name, range(1, len(med) + 1), med))
        atomic_write(out / "plots" / "regret.svg",
                     line_chart(series, "Cumulative pseudo-regret (median over seeds)", "round", "regret"))
    if cfg.fedtoy_on:
        series = []
        for r in results:
            if r.trace is not None and r.seed == cfg.seeds[0]:
                series.append((r.policy, r.trace.clock, r.trace.loss))
        atomic_write(out / "plots" / "loss.svg",
                     line_chart(series, f"Test MSE vs simulated time (seed {cfg.seeds[0]})", "seconds", "test MSE"))


# ------------------------------------------------------------------ commands


def _job(args):
    cfg, pol, seed = args
    return run_job(cfg, pol, seed)


def run_experiment(cfg: ExperimentConfig, output_dir: str | None = None, parallelism: int = 1,
                   plots: bool = True) -> tuple[list[JobResult], Path]:
    out = Path(output_dir or cfg.output_dir)
    jobs = [(cfg, pol, seed) for pol in cfg.policies for seed in cfg.seeds]
    if parallelism > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(_job, jobs))
    else:
        results = [_job(j) for j in jobs]
    for res in results:
        write_job(out, res)
    summary = {"runs": [summary_entry(r) for r in results]}
    atomic_write(out / "summary.json", json.dumps(summary, indent=2) + "\n")
    if plots:
        write_plots(out, cfg, results)
    return results, out


def compare_optimizers(cfg: ExperimentConfig, output_dir: str | None = None, plots: bool = True):
    rc = cfg.race
    out = Path(output_dir or cfg.output_dir)
    rep = energy_race(rc.num_clients, rc.num_channels, rc.instances, rc.steps, rc.alpha, rc.d, rc.seed,
                      rc.generator, rc.check_exhaustive)
    header = ["instance", "alsa_best", "sa_best", "alsa_minus_sa"] + (["exhaustive"] if rep.optimum else [])
    rows = []
    for i in range(rep.n):
        row = [i, rep.alsa_best[i], rep.sa_best[i], rep.alsa_best[i] - rep.sa_best[i]]
        if rep.optimum:
            row.append(rep.optimum[i])
        rows.append(row)
    atomic_write(out / "race" / "instances.csv", csv_text(header, rows))
    atomic_write(out / "race" / "mean_trace.csv", csv_text(
        ["step", "alsa_mean_best", "sa_mean_best"],
        ((i, float(a), float(s)) for i, (a, s) in enumerate(zip(rep.alsa_mean_trace, rep.sa_mean_trace))),
    ))
    wins, ties, losses = rep.counts()
    summary = {
        "num_clients": rc.num_clients, "num_channels": rc.num_channels, "instances": rep.n,
        "steps": rc.steps, "generator": rc.generator,
        "alsa_wins": wins, "ties": ties, "sa_wins": losses, "alsa_win_or_tie_rate": rep.win_or_tie_rate,
    }
    if rep.optimum:
        a, s = rep.optimum_matches()
        summary.update({"alsa_matches_exhaustive": a, "sa_matches_exhaustive": s})
    atomic_write(out / "race" / "summary.json", json.dumps(summary, indent=2) + "\n")
    if plots:
        steps = range(rc.steps)
        atomic_write(out / "plots" / "energy_race.svg", line_chart(
            [("ALSA", steps, rep.alsa_mean_trace), ("SA", steps, rep.sa_mean_trace)],
            f"Mean best energy, {rep.n} instances (K={rc.num_clients}, m={rc.num_channels})",
            "step", "best energy"))
    return rep, summary


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bsfl", description="Bandit client-selection experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("run", "run every (policy, seed) pair"),
                       ("compare-optimizers", "race ALSA against classic SA"),
                       ("validate", "check a config without running it")):
        p = sub.add_parser(name, help=text)
        p.add_argument("config")
        if name != "validate":
            p.add_argument("--output-dir", default=None)
            p.add_argument("--no-plots", action="store_true")
        if name == "run":
            p.add_argument("--parallelism", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, need_policies=args.command == "run")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "validate":
            print(f"ok: {len(cfg.policies)} policies x {len(cfg.seeds)} seeds")
        elif args.command == "run":
            if args.parallelism < 1:
                print("error: --parallelism must be >= 1", file=sys.stderr)
                return EXIT_CONFIG
            results, out = run_experiment(cfg, args.output_dir, args.parallelism, not args.no_plots)
            for r in results:
                loss = f" final_loss={r.trace.final_loss:.6g}" if r.trace is not None else ""
                print(f"{r.policy} seed={r.seed} rounds={r.rounds} regret={r.final_regret:.6g}{loss}")
            print(f"wrote {out}")
        else:
            _, summary = compare_optimizers(cfg, args.output_dir, not args.no_plots)
            print(json.dumps(summary, indent=2))
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
