"""Compare compiled and pure-Python graph kernels.

    python3 benchmarks/bench_graph.py [--atoms 20 60 200] [--repeat 5]
"""

import argparse
import time

import numpy as np

from dimenet import _kernels


def random_cloud(n, rng, density=0.1):
    side = (n / density) ** (1.0 / 3.0)
    return rng.uniform(0.0, side, size=(n, 3))


def time_backend(backend, X, cutoff, repeat):
    radius_edges, triplets = backend
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        src, dst, _, _ = radius_edges(X, cutoff, 1e-8)
        kj, _ = triplets(src, dst, len(X))
        best = min(best, time.perf_counter() - t0)
    return best, len(src), len(kj)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--atoms", type=int, nargs="+", default=[20, 60, 200, 600])
    p.add_argument("--cutoff", type=float, default=5.0)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)

    rng = np.random.default_rng(0)
    backends = {name: (mod.radius_edges, mod.triplets) for name, mod in _kernels.BACKENDS.items()}
    print(f"{'atoms':>6} {'edges':>8} {'triplets':>9} " + " ".join(f"{n + ' ms':>12}" for n in backends)
          + f" {'speedup':>8}")
    for n in args.atoms:
        X = random_cloud(n, rng)
        times = {}
        for name, be in backends.items():
            times[name], n_e, n_t = time_backend(be, X, args.cutoff, args.repeat)
        speed = times["python"] / times["compiled"] if "compiled" in times else float("nan")
        print(f"{n:>6} {n_e:>8} {n_t:>9} " + " ".join(f"{1e3 * t:>12.3f}" for t in times.values())
              + f" {speed:>8.1f}")


if __name__ == "__main__":
    main()
