"""Time the compiled and numpy linkage backends on random deviance rows.

    python3 benchmarks/bench_linkage.py --sizes 500 1000 2600 --repeat 3

Both backends must produce identical merge lists; the script checks that
before reporting timings.
"""
import argparse
import time

import numpy as np

from demandshift import kernels


def _best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def run(sizes, repeat, threads, seed):
    backends = {"python": kernels.get_backend("python")}
    try:
        backends["cython"] = kernels.get_backend("cython")
    except ImportError:
        print("compiled backend not built; timing the numpy fallback only")

    rows = []
    for n in sizes:
        X = np.random.default_rng(seed).normal(size=(n, 5))
        results = {}
        for name, impl in backends.items():
            t_dist, D = _best_of(lambda: impl.cosine_distance_matrix(X, threads), repeat)
            t_link, Z = _best_of(lambda: impl.average_linkage(D), repeat)
            results[name] = (t_dist, t_link, Z)
        if len(results) == 2 and not np.array_equal(results["python"][2], results["cython"][2]):
            raise SystemExit(f"n={n}: backends disagree")
        for name, (t_dist, t_link, _) in results.items():
            rows.append((n, name, t_dist, t_link))
    return rows


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[250, 500, 1000, 2600])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    rows = run(args.sizes, args.repeat, args.threads, args.seed)
    print(f"{'n':>6} {'backend':>8} {'distance s':>11} {'linkage s':>10} {'total s':>9}")
    base = {}
    for n, name, t_dist, t_link in rows:
        total = t_dist + t_link
        base.setdefault(n, {})[name] = total
        print(f"{n:>6} {name:>8} {t_dist:>11.4f} {t_link:>10.4f} {total:>9.4f}")
    for n, t in base.items():
        if len(t) == 2:
            print(f"n={n}: compiled speed-up x{t['python'] / t['cython']:.1f}")


if __name__ == "__main__":
    main()
