"""Time the compiled and numpy descent kernels on the same problems.

    python3 benchmarks/bench_backends.py [--iters 200] [--repeat 5]
"""

import argparse
import time

import numpy as np

from redunet import _kernels
from redunet.data import singleton_groups
from redunet.penalty import make_penalty
from redunet.trainer import TrainConfig, train

# (label, p, N, h)
CASES = [
    ("iris-like", 4, 120, 10),
    ("wbc-like", 9, 550, 10),
    ("landsat-like", 44, 4435, 10),
    ("wide", 128, 1000, 10),
]


def problem(p, n, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((p, n))
    Y = np.eye(3)[:, rng.integers(0, 3, n)]
    return X, Y


def best_time(X, Y, cfg, g, backend, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        train(X, g, cfg, labels=Y, backend=backend)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--iters", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    names = sorted(_kernels.BACKENDS)
    print(f"backends: {', '.join(names)} (default {_kernels.BACKEND}); {args.iters} iterations, best of {args.repeat}")
    print(f"{'case':<14}{'p':>5}{'N':>7}{'h':>4}" + "".join(f"{n + ' ms/it':>16}" for n in names) + f"{'speedup':>10}")
    for label, p, n, h in CASES:
        X, Y = problem(p, n)
        g = singleton_groups(p)
        cfg = TrainConfig(eta=1e-4, max_iters=args.iters, hidden=h, checkpoint_every=0,
                          penalty=make_penalty(X, g, 1.0, 0.5))
        per = {b: 1e3 * best_time(X, Y, cfg, g, b, args.repeat) / args.iters for b in names}
        speed = f"{per['python'] / per['cython']:.2f}x" if "cython" in per else "-"
        print(f"{label:<14}{p:>5}{n:>7}{h:>4}" + "".join(f"{per[b]:>16.4f}" for b in names) + f"{speed:>10}")


if __name__ == "__main__":
    main()
