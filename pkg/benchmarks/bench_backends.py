#!/usr/bin/env python3
"""Compare the compiled kernel core against the pure-numpy fallback.

Times the pairwise kernel evaluations (the hot loops of assembly) at patch-
typical sizes, plus one end-to-end least-squares assembly, for both backends.

Run:  python3 benchmarks/bench_backends.py
"""

import time

import numpy as np

from pum import backend
from pum._kernels_np import GAUSSIAN


def timeit(fn, repeats=7):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(name, sizes=((42, 28), (160, 55), (600, 91))):
    rows = []
    for m, n in sizes:
        rng = np.random.default_rng(0)
        A = rng.random((m, 2))
        B = rng.random((n, 2))
        reps = 400
        t_val = timeit(lambda: [backend.kernel_values(GAUSSIAN, 2.0, A, B)
                                for _ in range(reps)]) / reps
        t_grad = timeit(lambda: [backend.kernel_gradient(GAUSSIAN, 2.0, A, B)
                                 for _ in range(reps)]) / reps
        t_lap = timeit(lambda: [backend.kernel_laplacian(GAUSSIAN, 2.0, A, B,
                                                         2)
                                for _ in range(reps)]) / reps
        t_bun = timeit(lambda: [backend.kernel_bundle(GAUSSIAN, 2.0, A, B, 2)
                                for _ in range(reps)]) / reps
        r = np.linspace(0, 1.2, m * n)
        t_wend = timeit(lambda: [backend.wendland_parts(r)
                                 for _ in range(reps)]) / reps
        rows.append((f"{m}x{n}", t_val, t_grad, t_lap, t_bun, t_wend))
    return rows


def bench_assembly():
    from pum import (Kernel, assemble, build_cover, ls_layout, manufactured,
                     standard_domain)
    dom = standard_domain("box")
    prob = manufactured("u2")
    k = Kernel("gaussian", 2.0)

    def run():
        cov = build_cover(dom, 0.4, 0.2)
        lay = ls_layout(dom, cov, k, 28, 1.5)
        assemble(prob, cov, k, lay, dom)

    return timeit(run, repeats=3)


def main():
    results = {}
    for name in backend.available_backends():
        backend.set_backend(name)
        results[name] = (bench_kernels(name), bench_assembly())
    backend.set_backend("auto")

    if "native" not in results:
        print("compiled backend not available; timing python only")

    print(f"{'size':>8} {'op':>10}", *(f"{n:>12}" for n in results),
          f"{'speedup':>9}" if len(results) == 2 else "")
    ops = ("values", "gradient", "laplacian", "bundle", "wendland")
    any_rows = next(iter(results.values()))[0]
    for i, row in enumerate(any_rows):
        size = row[0]
        for j, op in enumerate(ops):
            cells = []
            for nm in results:
                t = results[nm][0][i][j + 1]
                cells.append(f"{t * 1e6:10.1f} us")
            line = f"{size:>8} {op:>10} " + " ".join(f"{c:>12}"
                                                     for c in cells)
            if len(results) == 2:
                tp = results["python"][0][i][j + 1]
                tn = results["native"][0][i][j + 1]
                line += f" {tp / tn:8.2f}x"
            print(line)
    print()
    for nm in results:
        print(f"assembly (box, H=0.4, n=28, LS) [{nm}]: "
              f"{results[nm][1]:.3f} s")
    if len(results) == 2:
        print(f"assembly speedup: "
              f"{results['python'][1] / results['native'][1]:.2f}x")


if __name__ == "__main__":
    main()
