"""Throughput of the per-site mutation kernel, compiled vs pure numpy.

Both backends walk the same (rows x length) Bernoulli scan and consume
the RNG stream in the same order, so this measures implementation speed
only.  Run from the repository root:

    python3 benchmarks/bench_mutation.py
    python3 benchmarks/bench_mutation.py --rows 2000 --length 20000 --repeats 5
"""

import argparse
import os
import time

import numpy as np

from prenelab import kernels, rng


def time_backend(backend: str, rows: int, length: int, site_prob: float, repeats: int):
    os.environ["PRENELAB_BACKEND"] = backend
    prob = np.full(length, site_prob)
    gen = rng.stream(42)
    codes = gen.integers(0, 4, size=(rows, length), dtype=np.uint8)

    # untimed warmup; for numba this includes JIT compilation
    kernels.mutate_sites(codes.copy(), prob, rng.stream(43))

    best = np.inf
    flips = 0
    for r in range(repeats):
        work = codes.copy()
        t0 = time.perf_counter()
        out_rows, _, _, _ = kernels.mutate_sites(work, prob, rng.stream(44, r))
        best = min(best, time.perf_counter() - t0)
        flips = len(out_rows)
    return best, flips


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=1000, help="sequences per batch")
    parser.add_argument("--length", type=int, default=10000, help="sites per sequence")
    parser.add_argument("--site-prob", type=float, default=1 / 2000)
    parser.add_argument("--repeats", type=int, default=3, help="keep the best of N")
    args = parser.parse_args()

    sites = args.rows * args.length
    print(f"batch: {args.rows} x {args.length} = {sites:.2e} sites, p = {args.site_prob}")

    backends = ["numpy"] + (["numba"] if kernels.HAS_NUMBA else [])
    if not kernels.HAS_NUMBA:
        print("numba not importable; benchmarking the numpy backend only")

    results = {}
    for backend in backends:
        seconds, flips = time_backend(
            backend, args.rows, args.length, args.site_prob, args.repeats
        )
        results[backend] = seconds
        print(
            f"{backend:>6}: {seconds * 1e3:8.1f} ms/batch  "
            f"{sites / seconds / 1e6:8.1f} Msites/s  ({flips} flips)"
        )

    if len(results) == 2:
        print(f"speedup numba over numpy: {results['numpy'] / results['numba']:.2f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
