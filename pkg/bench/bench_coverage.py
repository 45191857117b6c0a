"""Benchmark the two coverage kernel backends on fuzzing-shaped workloads.

Runs accumulate / classify / digest with both the numba and the numpy
implementation on identical data, checks they agree, and prints per-call
timings.  Usage:

    python3 bench/bench_coverage.py --reps 2000
"""

import argparse
import time

import numpy as np

from gramfuzz import _cov_numpy
from gramfuzz.coverage import MAP_SIZE

try:
    from gramfuzz import _cov_numba
    BACKENDS = [_cov_numba, _cov_numpy]
except ImportError:
    print("numba unavailable; timing the numpy kernels only")
    BACKENDS = [_cov_numpy]


def make_workload(rng, reps):
    # traces the size a toy interpreter emits, maps as sparse as real runs
    traces = [rng.integers(0, 4096, size=rng.integers(200, 3000)).astype(np.uint32)
              for _ in range(min(reps, 256))]
    maps = []
    for _ in range(min(reps, 256)):
        cov = np.zeros(MAP_SIZE, dtype=np.uint8)
        cells = rng.integers(0, MAP_SIZE, size=120)
        cov[cells] = rng.integers(1, 200, size=120).astype(np.uint8)
        maps.append(cov)
    return traces, maps


def check_agreement(traces, maps):
    if len(BACKENDS) < 2:
        return
    for tr in traces[:32]:
        a = np.zeros(MAP_SIZE, dtype=np.uint8)
        b = np.zeros(MAP_SIZE, dtype=np.uint8)
        _cov_numba.accumulate(a, tr)
        _cov_numpy.accumulate(b, tr)
        assert np.array_equal(a, b), "accumulate mismatch"
    va = np.zeros(MAP_SIZE, dtype=np.uint8)
    vb = np.zeros(MAP_SIZE, dtype=np.uint8)
    for cov in maps[:32]:
        ra = _cov_numba.classify_update(va, cov)
        rb = _cov_numpy.classify_update(vb, cov)
        assert ra == rb, "classify mismatch"
        assert _cov_numba.digest(cov) == _cov_numpy.digest(cov), "digest mismatch"
    assert np.array_equal(va, vb), "virgin map divergence"
    print("backends agree on shared workload")


def bench(label, fn, args_iter, reps):
    t0 = time.perf_counter()
    for i in range(reps):
        fn(*args_iter[i % len(args_iter)])
    dt = time.perf_counter() - t0
    per = dt / reps * 1e6
    print(f"  {label:<10} {per:9.2f} us/call   ({reps} calls, {dt:.3f}s)")
    return per


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    traces, maps = make_workload(rng, args.reps)
    for impl in BACKENDS:
        impl.warmup()
    check_agreement(traces, maps)

    results = {}
    for impl in BACKENDS:
        print(f"backend: {impl.NAME}")
        acc_args = [(m.copy(), t) for m, t in zip(maps, traces)]
        results[impl.NAME, "accumulate"] = bench(
            "accumulate", impl.accumulate, acc_args, args.reps)
        virgin = np.zeros(MAP_SIZE, dtype=np.uint8)
        cls_args = [(virgin, m) for m in maps]
        results[impl.NAME, "classify"] = bench(
            "classify", impl.classify_update, cls_args, args.reps)
        dig_args = [(m,) for m in maps]
        results[impl.NAME, "digest"] = bench(
            "digest", impl.digest, dig_args, args.reps)

    if len(BACKENDS) == 2:
        print("speedup (numpy time / numba time):")
        for op in ("accumulate", "classify", "digest"):
            ratio = results["numpy", op] / results["numba", op]
            print(f"  {op:<10} {ratio:5.1f}x")


if __name__ == "__main__":
    main()
