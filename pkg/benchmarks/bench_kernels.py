"""Time the numba and numpy collision kernels on random batches.

    python benchmarks/bench_kernels.py [--sizes 64 512 4096] [--repeat 5]

Prints one row per (kernel, batch size) with the best-of-``repeat`` time
for each backend and the speedup.  The numba kernels are compiled before
timing starts.
"""

from __future__ import annotations

import argparse
import math
import timeit

import numpy as np

from mrrefine import kernels
from mrrefine.geom import ConvexPolygon, Disc, place


def random_batch(rng: np.random.Generator, k: int) -> kernels.Placed:
    parts = []
    for _ in range(k):
        pose = np.array([[rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-math.pi, math.pi)]])
        if rng.random() < 0.4:
            parts.append(place(Disc(rng.uniform(0.05, 0.4)), pose))
        else:
            w, h = rng.uniform(0.1, 0.6, 2)
            parts.append(place(ConvexPolygon.box(w, h), pose))
    return kernels.concat(parts)


def best(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 512, 4096])
    ap.add_argument("--obstacles", type=int, default=40)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    obstacles = random_batch(rng, args.obstacles)
    warm = random_batch(rng, 4)
    kernels.hits_any_numba(warm, obstacles)
    kernels.collide_pairs_numba(warm, warm)

    print(f"{'kernel':<14}{'n':>7}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for n in args.sizes:
        a, b = random_batch(rng, n), random_batch(rng, n)
        assert np.array_equal(kernels.hits_any_numba(a, obstacles), kernels.hits_any_numpy(a, obstacles))
        rows = [
            ("hits_any", lambda: kernels.hits_any_numba(a, obstacles), lambda: kernels.hits_any_numpy(a, obstacles)),
            ("collide_pairs", lambda: kernels.collide_pairs_numba(a, b), lambda: kernels.collide_pairs_numpy(a, b)),
        ]
        for name, fast, slow in rows:
            t_nb, t_np = best(fast, args.repeat), best(slow, args.repeat)
            print(f"{name:<14}{n:>7}{t_nb * 1e3:>12.3f}{t_np * 1e3:>12.3f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
