"""Time the numba and pure-numpy kernels on the same inputs and check they agree.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import time

import numpy as np

from bsfl.kernels import get_backend
from bsfl.optimizer import AnnealerConfig, ScoreTable, anneal


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    numba_k, numpy_k = get_backend("numba"), get_backend("numpy")

    K, m = 20, 5
    scores, g = rng.uniform(0, 1, K), rng.uniform(-1, 1, K)
    avail = np.arange(K, dtype=np.int64)
    numba_k.best_subset(scores, g, 0.2, avail, m)  # compile
    rows = []
    for name, mod in (("numba", numba_k), ("numpy", numpy_k)):
        t, out = best_of(lambda: mod.best_subset(scores, g, 0.2, avail, m), args.repeat)
        rows.append(("best_subset K=20 m=5", name, t, tuple(out[0])))

    table = ScoreTable.build(rng.uniform(0, 1, 100), rng.uniform(-1, 1, 100), 1.0, 10)
    cfg = AnnealerConfig(5000, neighborhood="lightweight")
    anneal(table, AnnealerConfig(2), np.random.default_rng(1), backend=numba_k)  # compile
    for name, mod in (("numba", numba_k), ("numpy", numpy_k)):
        t, out = best_of(lambda: anneal(table, cfg, np.random.default_rng(1), backend=mod), args.repeat)
        rows.append(("ALSA K=100 m=10 5000 steps", name, t, out.selection.members))

    print(f"{'kernel':30s} {'backend':8s} {'seconds':>10s}")
    for kernel, name, t, _ in rows:
        print(f"{kernel:30s} {name:8s} {t:10.5f}")
    for i in range(0, len(rows), 2):
        same = rows[i][3] == rows[i + 1][3]
        speedup = rows[i + 1][2] / rows[i][2]
        print(f"{rows[i][0]}: results {'agree' if same else 'DIFFER'}, numba speedup x{speedup:.1f}")


if __name__ == "__main__":
    main()
