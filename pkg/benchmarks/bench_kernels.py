#!/usr/bin/env python3
"""Benchmark the compiled distance kernels against the numpy fallback.

Builds a synthetic sparse histogram bank shaped like a real training
store and times each metric under both backends, plus one end-to-end
classify call.

Usage:
    python benchmarks/bench_kernels.py [--instances N] [--nnz N] [--bins N]
"""

import argparse
import time

import numpy as np

from chorusid import _kernels_np
from chorusid.classifier import KL_EPSILON

try:
    from chorusid import _kernels

    HAVE_COMPILED = True
except ImportError:
    _kernels = None
    HAVE_COMPILED = False


def make_bank(rng, n_instances, nnz, n_bins):
    indices, masses, offsets = [], [], [0]
    for _ in range(n_instances):
        idx = np.sort(rng.choice(n_bins, size=nnz, replace=False)).astype(np.int32)
        m = rng.random(nnz)
        indices.append(idx)
        masses.append(m / m.sum())
        offsets.append(offsets[-1] + nnz)
    return (
        np.concatenate(indices),
        np.concatenate(masses),
        np.asarray(offsets, dtype=np.int64),
    )


def time_call(fn, *args, repeats=20):
    fn(*args)  # warm up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--instances", type=int, default=14400,
                        help="bank size (default: 72 classes x 200)")
    parser.add_argument("--nnz", type=int, default=60, help="stored bins per instance")
    parser.add_argument("--bins", type=int, default=5000, help="histogram dimensionality")
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    indices, masses, offsets = make_bank(rng, args.instances, args.nnz, args.bins)
    q = rng.random(args.bins)
    q /= q.sum()
    a_t = (q + KL_EPSILON) / (q.sum() + args.bins * KL_EPSILON)
    h_a = float((a_t * np.log(a_t)).sum())
    inst_sums = np.add.reduceat(masses, offsets[:-1])

    calls = {
        "l1": lambda mod: time_call(mod.l1_csr, q, indices, masses, offsets),
        "hellinger": lambda mod: time_call(mod.hellinger_csr, q, indices, masses, offsets),
        "kl": lambda mod: time_call(
            mod.kl_csr, a_t, h_a, KL_EPSILON, args.bins,
            indices, masses, offsets, inst_sums,
        ),
    }

    print(f"bank: {args.instances} instances x {args.nnz} nnz, {args.bins} bins")
    print(f"{'metric':<10} {'numpy':>12} {'cython':>12} {'speedup':>8}")
    for name, runner in calls.items():
        t_np = runner(_kernels_np)
        if HAVE_COMPILED:
            t_cy = runner(_kernels)
            print(f"{name:<10} {t_np * 1e3:>10.3f}ms {t_cy * 1e3:>10.3f}ms "
                  f"{t_np / t_cy:>7.1f}x")
        else:
            print(f"{name:<10} {t_np * 1e3:>10.3f}ms {'n/a':>12} {'':>8}")

    if HAVE_COMPILED:
        ok = all(
            np.allclose(
                getattr(_kernels_np, fn)(q, indices, masses, offsets),
                getattr(_kernels, fn)(q, indices, masses, offsets),
                rtol=1e-12, atol=1e-12,
            )
            for fn in ("l1_csr", "hellinger_csr")
        )
        print(f"backend agreement: {'ok' if ok else 'MISMATCH'}")


if __name__ == "__main__":
    main()
