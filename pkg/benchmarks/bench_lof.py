#!/usr/bin/env python3
"""Compare the compiled LOF kernel against the numpy fallback.

Generates feature matrices shaped like encoded firewall logs: a configurable
share of rows drawn from a small template pool (heavy duplication, the
realistic case) and the rest unique. Both backends run on identical input;
results are checked to agree before timings are reported.

    python benchmarks/bench_lof.py
    python benchmarks/bench_lof.py --sizes 2000 8000 20000 --k 20 --dup 0.5
"""

import argparse
import time

import numpy as np

from firelog._native import native_lof_distinct
from firelog.analytics.lof import lof_scores


def make_points(n: int, d: int, dup_fraction: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    templates = rng.normal(size=(32, d))
    n_dup = int(n * dup_fraction)
    dup = templates[rng.integers(0, len(templates), size=n_dup)]
    unique = rng.normal(size=(n - n_dup, d))
    points = np.vstack([dup, unique])
    rng.shuffle(points, axis=0)
    return np.ascontiguousarray(points)


def run(points: np.ndarray, k: int, backend: str) -> tuple[float, np.ndarray]:
    started = time.perf_counter()
    scores = lof_scores(points, k, backend=backend)
    return time.perf_counter() - started, scores


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+",
                        default=[2000, 8000, 16000])
    parser.add_argument("--d", type=int, default=5)
    parser.add_argument("--k", type=int, default=20)
    parser.add_argument("--dup", type=float, default=0.5,
                        help="fraction of rows duplicated from templates")
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args()

    if native_lof_distinct is None:
        print("native kernel not built: timing the numpy fallback only")

    header = f"{'n':>8} {'distinct':>9} {'numpy [s]':>10}"
    if native_lof_distinct is not None:
        header += f" {'native [s]':>11} {'speedup':>8}"
    print(header)
    for n in args.sizes:
        points = make_points(n, args.d, args.dup, args.seed)
        distinct = np.unique(points, axis=0).shape[0]
        t_numpy, s_numpy = run(points, args.k, "numpy")
        line = f"{n:>8} {distinct:>9} {t_numpy:>10.3f}"
        if native_lof_distinct is not None:
            t_native, s_native = run(points, args.k, "native")
            drift = float(np.max(np.abs(s_numpy - s_native)))
            if drift > 1e-9:
                print(f"backend disagreement: {drift}")
                return 1
            line += f" {t_native:>11.3f} {t_numpy / t_native:>7.1f}x"
        print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
