"""Time the cover kernels under both backends.

    python benchmarks/bench_kernels.py --points 20000 --repeat 5
"""
import argparse
import time

import numpy as np

from degsob import _kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--points", type=int, default=20000)
    ap.add_argument("--dim", type=int, default=2)
    ap.add_argument("--radius", type=float, default=0.02)
    ap.add_argument("--alpha", type=float, default=1.0)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args(argv)

    pts = np.random.default_rng(a.seed).random((a.points, a.dim))
    seeds = np.empty((0, a.dim))
    net = _kernels.greedy_net_numpy(pts, a.radius, a.alpha, seeds)
    centers = pts[net]
    # compile outside the timed region
    _kernels.greedy_net_numba(pts[:10], a.radius, a.alpha, seeds)
    _kernels.count_within_numba(pts[:10], centers[:10], a.radius, a.alpha)

    rows = []
    for kernel, np_fn, nb_fn in [
        ("greedy_net",
         lambda: _kernels.greedy_net_numpy(pts, a.radius, a.alpha, seeds),
         lambda: _kernels.greedy_net_numba(pts, a.radius, a.alpha, seeds)),
        ("count_within",
         lambda: _kernels.count_within_numpy(pts, centers, 2 * a.radius, a.alpha),
         lambda: _kernels.count_within_numba(pts, centers, 2 * a.radius, a.alpha)),
    ]:
        t_np, t_nb = best_of(np_fn, a.repeat), best_of(nb_fn, a.repeat)
        rows.append((kernel, t_np, t_nb))

    print(f"{a.points} points in {a.dim}-d, r={a.radius}, {len(net)} centers, numba={_kernels.HAVE_NUMBA}")
    print(f"{'kernel':<14}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}")
    for kernel, t_np, t_nb in rows:
        print(f"{kernel:<14}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
