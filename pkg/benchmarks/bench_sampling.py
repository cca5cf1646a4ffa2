"""Benchmark the compiled sampling kernel against the numpy fallback.

Runs the per-image annotation kernel over many small batches (the hot path
of campaign simulation) and over a few large single-image batches, and
prints throughput for both backends.

Usage: python benchmarks/bench_sampling.py [--images 20000] [--a-full 50]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from softcamp.kernels import sampling_py
from softcamp.simulation import _cumulative, _identity_cum

try:
    from softcamp.kernels import _sampling

    BACKENDS = [("python", sampling_py.sample_many), ("compiled", _sampling.sample_many)]
except ImportError:
    BACKENDS = [("python", sampling_py.sample_many)]


def make_workload(n_images: int, k: int, a_full: int, seed: int):
    rng = np.random.default_rng(seed)
    images = []
    deltas = rng.uniform(0.0, 0.3, size=3)
    noise = np.stack([_identity_cum(k)] * 3)
    for i in range(n_images):
        gt_cum = _cumulative(rng.dirichlet(np.ones(k)))
        uniforms = rng.random((a_full, 3))
        proposal = int(rng.integers(k)) if i % 2 == 0 else -1
        images.append((gt_cum, proposal, uniforms))
    return images, deltas, noise


def run(backend, images, deltas, noise, a_cons: int, a_full: int) -> tuple[float, int]:
    start = time.perf_counter()
    drawn = 0
    for gt_cum, proposal, uniforms in images:
        out = backend(gt_cum, proposal, deltas, noise, a_cons, a_full, 1.0, uniforms)
        drawn += len(out)
    return time.perf_counter() - start, drawn


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--images", type=int, default=20_000)
    parser.add_argument("--k", type=int, default=4)
    parser.add_argument("--a-cons", type=int, default=10)
    parser.add_argument("--a-full", type=int, default=50)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    print(f"workload: {args.images} images, K={args.k}, "
          f"a_cons={args.a_cons}, a_full={args.a_full}")
    images, deltas, noise = make_workload(args.images, args.k, args.a_full, args.seed)

    results = {}
    for name, backend in BACKENDS:
        # warm up, then measure
        run(backend, images[:200], deltas, noise, args.a_cons, args.a_full)
        elapsed, drawn = run(backend, images, deltas, noise, args.a_cons, args.a_full)
        results[name] = elapsed
        print(f"{name:>9}: {elapsed:8.3f} s   "
              f"{drawn / elapsed / 1e6:6.2f} M annotations/s   ({drawn} drawn)")

    if "compiled" in results:
        print(f"  speedup: {results['python'] / results['compiled']:.1f}x "
              "(compiled over python)")
    else:
        print("  compiled kernel not built; only the fallback was measured")

    # sanity: identical outputs on a sample
    if len(BACKENDS) == 2:
        gt_cum, proposal, uniforms = images[0]
        a = BACKENDS[0][1](gt_cum, proposal, deltas, noise, args.a_cons, args.a_full, 1.0, uniforms)
        b = BACKENDS[1][1](gt_cum, proposal, deltas, noise, args.a_cons, args.a_full, 1.0, uniforms)
        assert np.array_equal(a, np.asarray(b)), "backends disagree"
        print("  backends agree bit-for-bit on sampled output")


if __name__ == "__main__":
    main()
