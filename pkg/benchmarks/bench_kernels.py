"""Benchmark the compiled kernel lane against the numpy fallback.

Times the nearest-reference scan (the hot path: every test vector against
every reference vector) and frame-feature averaging on both lanes, checks
the outputs are bit-identical, and prints the speedup.

    python benchmarks/bench_kernels.py            # moderate sizes
    python benchmarks/bench_kernels.py --full     # dataset-scale scan
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from vidprobe import kernels

SCAN_SIZES = [
    # (tests, refs, dim)
    (1000, 200, 16),
    (500, 500, 128),
    (500, 2000, 256),
]
FULL_SCAN_SIZES = [(1000, 4500, 768)]


def _time(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_scan(t, r, d, threads, repeats):
    rng = np.random.default_rng(12345)
    tests = rng.normal(size=(t, d)).astype(np.float32)
    refs = rng.normal(size=(r, d)).astype(np.float32)
    labels = (rng.random(r) < 0.5).astype(np.uint8)

    results = {}
    timings = {}
    for lane in kernels.available_backends():
        with kernels.use_backend(lane):
            results[lane] = kernels.nearest_scan(tests, refs, labels, threads=threads)
            timings[lane] = _time(
                lambda: kernels.nearest_scan(tests, refs, labels, threads=threads), repeats
            )
    _check_identical(results)
    return timings


def bench_mean(n, d, repeats):
    rng = np.random.default_rng(999)
    rows = rng.normal(size=(n, d)).astype(np.float32)
    results = {}
    timings = {}
    for lane in kernels.available_backends():
        with kernels.use_backend(lane):
            results[lane] = (kernels.average_rows(rows),)
            timings[lane] = _time(lambda: kernels.average_rows(rows), repeats)
    _check_identical(results)
    return timings


def _check_identical(results: dict) -> None:
    lanes = list(results)
    if len(lanes) < 2:
        return
    for a, b in zip(results[lanes[0]], results[lanes[1]]):
        if not np.array_equal(a, b):
            raise AssertionError(f"lanes disagree: {lanes}")


def _report(label: str, timings: dict) -> None:
    parts = [f"{lane}: {seconds * 1e3:9.2f} ms" for lane, seconds in sorted(timings.items())]
    line = f"{label:<34} " + "   ".join(parts)
    if "native" in timings and "numpy" in timings:
        line += f"   speedup: {timings['numpy'] / timings['native']:.1f}x"
    print(line)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--full", action="store_true", help="add a dataset-scale scan")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args(argv)

    print(f"available lanes: {', '.join(kernels.available_backends())} "
          f"(default: {kernels.get_backend()}), threads={args.threads}")
    if len(kernels.available_backends()) < 2:
        print("note: compiled lane not built; timing the fallback only")

    sizes = SCAN_SIZES + (FULL_SCAN_SIZES if args.full else [])
    for t, r, d in sizes:
        timings = bench_scan(t, r, d, args.threads, args.repeats)
        _report(f"nearest_scan {t}x{r} d={d}", timings)
    for n, d in [(16, 768), (64, 768)]:
        timings = bench_mean(n, d, max(args.repeats, 20))
        _report(f"average_rows {n}x{d}", timings)
    print("all lane outputs bit-identical")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
