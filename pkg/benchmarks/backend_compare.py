#!/usr/bin/env python3
"""Compare the numba kernels against the pure-numpy fallback.

Runs each kernel on both backends across a few shapes and prints a
throughput table. The numpy rows route through BLAS, so NT and TNN
collapse to the same code path there; the point of the table is (a) to
check both backends agree numerically and (b) to show why label
collection needs the numba backend (the NT/TNN asymmetry only exists
there).

Usage: python benchmarks/backend_compare.py [--reps 5] [--warmup 2]
"""

import argparse
import time

import numpy as np

from mtnn.bench import make_operands, time_callables_interleaved
from mtnn.kernels import ProblemShape, _numba_impl, _numpy_impl

SHAPES = [
    ProblemShape(64, 64, 64),
    ProblemShape(256, 256, 256),
    ProblemShape(512, 512, 512),
    ProblemShape(1024, 1024, 1024),
    ProblemShape(128, 1024, 512),
]

BLOCK, TILE = 128, 32


def kernel_table(shape, reps, warmup):
    a, b, b_kn = make_operands(shape, seed=0)
    fns = {
        ("numba", "nn"): lambda: _numba_impl.gemm_nn(a, b_kn, BLOCK),
        ("numba", "nt"): lambda: _numba_impl.gemm_nt(a, b),
        ("numba", "tnn"): lambda: _numba_impl.gemm_tnn(a, b, BLOCK, TILE),
        ("numpy", "nn"): lambda: _numpy_impl.gemm_nn(a, b_kn, BLOCK),
        ("numpy", "nt"): lambda: _numpy_impl.gemm_nt(a, b),
        ("numpy", "tnn"): lambda: _numpy_impl.gemm_tnn(a, b, BLOCK, TILE),
    }
    times = time_callables_interleaved(fns, reps, warmup)
    ref = _numpy_impl.gemm_nt(a, b).astype(np.float64)
    err = np.linalg.norm(_numba_impl.gemm_nt(a, b) - ref) / np.linalg.norm(ref)
    return times, err


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--reps", type=int, default=5)
    parser.add_argument("--warmup", type=int, default=2)
    args = parser.parse_args()

    print("compiling numba kernels...")
    start = time.perf_counter()
    kernel_table(ProblemShape(8, 8, 8), 1, 1)
    print(f"  done in {time.perf_counter() - start:.1f}s\n")

    header = f"{'m':>5} {'n':>5} {'k':>5} |"
    for backend in ("numba", "numpy"):
        for kernel in ("nn", "nt", "tnn"):
            header += f" {backend[:2]}-{kernel:>3}"
    print(header + "   (GFLOPS; cross-backend rel err)")
    for shape in SHAPES:
        times, err = kernel_table(shape, args.reps, args.warmup)
        row = f"{shape.m:>5} {shape.n:>5} {shape.k:>5} |"
        for backend in ("numba", "numpy"):
            for kernel in ("nn", "nt", "tnn"):
                gf = shape.flops / times[(backend, kernel)] / 1e9
                row += f" {gf:6.1f}"
        print(row + f"   {err:.1e}")
    print(
        "\nnumba nt vs tnn diverge with size (the selection problem);"
        "\nnumpy nt and tnn are the same BLAS call and stay equal."
    )


if __name__ == "__main__":
    main()
