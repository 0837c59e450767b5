"""Time the numba and numpy paths of the two O(N^2) kernels.

    python benchmarks/bench_kernels.py [--sizes 250 500 1000 2000] [--repeat 3] [--json out.json]
"""
import argparse
import json
import timeit

import numpy as np

from czlab import kernels
from czlab._accel import HAVE_NUMBA


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def bench(sizes, repeat, seed=0):
    rng = np.random.default_rng(seed)
    rows = []
    # compile once outside the timings
    P = rng.random((16, 2))
    kernels.transform_numba(P, P, np.ones(16, complex), 1e-3, kernels.CAUCHY)
    kernels.growth_scan_numba(P, np.ones(16), 1.0, 1e-3)
    for N in sizes:
        P = rng.random((N, 2))
        coef = rng.normal(size=N) + 1j * rng.normal(size=N)
        w = np.exp(rng.normal(size=N))
        eps = 1.0 / N
        cases = {
            "cauchy transform": (
                lambda: kernels.transform_numpy(P, P, coef, eps, kernels.CAUCHY),
                lambda: kernels.transform_numba(P, P, coef, eps, kernels.CAUCHY)),
            "growth scan": (
                lambda: kernels.growth_scan_numpy(P, w, 1.0, eps),
                lambda: kernels.growth_scan_numba(P, w, 1.0, eps)),
        }
        for name, (np_fn, nb_fn) in cases.items():
            a, b = np_fn(), nb_fn()
            if isinstance(a, tuple):
                a, b = a[0], b[0]
            err = float(np.abs(a - b).max() / max(np.abs(a).max(), 1e-300))
            t_np = best_of(np_fn, repeat)
            t_nb = best_of(nb_fn, repeat)
            rows.append({"kernel": name, "N": N, "numpy_s": t_np, "numba_s": t_nb,
                         "speedup": t_np / t_nb, "max_rel_diff": err})
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[250, 500, 1000, 2000])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json")
    args = ap.parse_args()
    if not HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    rows = bench(args.sizes, args.repeat)
    print(f"{'kernel':<18}{'N':>6}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>9}{'rel diff':>11}")
    for r in rows:
        print(f"{r['kernel']:<18}{r['N']:>6}{r['numpy_s']:>12.4f}{r['numba_s']:>12.4f}"
              f"{r['speedup']:>9.1f}{r['max_rel_diff']:>11.1e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=1)


if __name__ == "__main__":
    main()
