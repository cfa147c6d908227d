"""Compare the compiled and numpy kernels on the two hot loops.

Usage::

    python benchmarks/bench_kernels.py [--paths 200] [--repeat 3]

Reports the best wall time per backend and the speed-up, and checks that
both backends produce the same exit times.
"""
import argparse
import time

import numpy as np

from levyexit import _backend
from levyexit import measures as M
from levyexit.dynamics import Domain, Potential, simulate_paths
from levyexit.sampling import NoiseSampler, sample_increments

CASES = {
    "stable a=1, eps=0.1": (M.LevyTriplet(jumps=M.stable_measure(1.0)), 0.1),
    "log-perturbed, eps=0.1": (M.LevyTriplet(jumps=M.log_perturbed_stable_measure(1.0)), 0.1),
    "gaussian, eps=0.5": (M.LevyTriplet(0.0, 1.0), 0.5),
}


def best_of(fn, repeat):
    out, best = None, float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--paths", type=int, default=200)
    p.add_argument("--increments", type=int, default=200_000)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--threads", type=int, default=1)
    args = p.parse_args(argv)

    backends = sorted(_backend.BACKENDS)
    if "compiled" not in backends:
        print("compiled backend not built; timing the numpy kernels only")
    U, dom = Potential.quadratic(), Domain(1.0, 1.0)
    ids = np.arange(args.paths, dtype=np.uint64)
    print(f"{'kernel':<34}" + "".join(f"{b:>12}" for b in backends) + f"{'speed-up':>10}")
    for name, (t, eps) in CASES.items():
        s = NoiseSampler(t, eps)
        rows = {}
        for kind in ("paths", "increments"):
            res = {}
            for b in backends:
                if kind == "paths":
                    fn = lambda: simulate_paths(U, s, dom, 0.0, 1e-3, 1e4, 0, ids,
                                                threads=args.threads, backend=b)[0]
                else:
                    fn = lambda: sample_increments(s, 1e-3, args.increments, seed=0,
                                                   threads=args.threads, backend=b)
                res[b] = best_of(fn, args.repeat)
            if len(backends) == 2:
                a, c = res["compiled"][1], res["python"][1]
                if not np.allclose(a, c, rtol=1e-12, atol=0.0):
                    raise SystemExit(f"backends disagree on {name} {kind}")
            rows[kind] = res
        for kind, res in rows.items():
            line = f"{name + ' ' + kind:<34}" + "".join(f"{res[b][0]:>11.3f}s" for b in backends)
            if len(backends) == 2:
                line += f"{res['python'][0] / res['compiled'][0]:>9.1f}x"
            print(line)


if __name__ == "__main__":
    main()
