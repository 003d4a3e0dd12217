"""Dense float32 matrix kernels: NN, direct NT, and transpose-then-NN.

A "matrix" throughout this package is a 2-D C-contiguous float32
ndarray. Three routines compute C = A x B^T for A (m x k) and
B (n x k):

- ``gemm_nt``   reads B in place, no scratch memory (direct competitor)
- ``gemm_tnn``  materializes B^T out-of-place, then runs the blocked
                NN kernel; allocation, transpose and release all happen
                inside the call
- ``gemm_nn``   the blocked NN product itself, C = A x B for B (k x n)

Kernels never mutate their inputs and are safe to call concurrently.
``threads > 1`` opts in to row/panel parallelism; the benchmark harness
keeps the default of 1 so timings stay single-threaded.
"""

from typing import NamedTuple

import numpy as np

from .._backend import BACKEND, active_backend

if BACKEND == "numba":
    from . import _numba_impl as _impl
else:
    from . import _numpy_impl as _impl

__all__ = [
    "ProblemShape",
    "active_backend",
    "as_matrix",
    "gemm_nn",
    "gemm_nt",
    "gemm_tnn",
    "transpose_oop",
]

# 128 beats 64 for the packed panel on the machines this was tuned on
# (fits L2 comfortably and halves loop overhead); both are overridable.
DEFAULT_BLOCK = 128
DEFAULT_TILE = 32


class ProblemShape(NamedTuple):
    """Dimensions of one C = A x B^T problem: A is m x k, B is n x k."""

    m: int
    n: int
    k: int

    def validate(self):
        if self.m < 1 or self.n < 1 or self.k < 1:
            raise ValueError(f"shape dimensions must be >= 1, got {self!r}")
        return self

    @property
    def flops(self) -> int:
        return 2 * self.m * self.n * self.k


def as_matrix(x) -> np.ndarray:
    """Coerce array-like input to a C-contiguous float32 matrix."""
    arr = np.ascontiguousarray(x, dtype=np.float32)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={arr.ndim}")
    return arr


def _check_matrix(name, x):
    if not isinstance(x, np.ndarray) or x.ndim != 2:
        raise TypeError(f"{name} must be a 2-D ndarray")
    if x.dtype != np.float32:
        raise TypeError(f"{name} must be float32, got {x.dtype} (see as_matrix)")
    if not x.flags.c_contiguous:
        raise ValueError(f"{name} must be C-contiguous (see as_matrix)")


def _resolve_threads(threads):
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    if threads > 1 and BACKEND == "numba":
        import numba

        numba.set_num_threads(min(threads, numba.config.NUMBA_NUM_THREADS))
    return threads


def gemm_nn(a, b, *, block: int = DEFAULT_BLOCK, threads: int = 1) -> np.ndarray:
    """C = A x B for A (m x k), B (k x n); blocked and packed."""
    _check_matrix("a", a)
    _check_matrix("b", b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(
            f"inner dimensions disagree: a is {a.shape[0]}x{a.shape[1]}, "
            f"b is {b.shape[0]}x{b.shape[1]}"
        )
    if block < 4:
        raise ValueError(f"block must be >= 4, got {block}")
    if _resolve_threads(threads) > 1:
        return _impl.gemm_nn_parallel(a, b, block)
    return _impl.gemm_nn(a, b, block)


def gemm_nt(a, b, *, threads: int = 1) -> np.ndarray:
    """C = A x B^T for A (m x k), B (n x k), without materializing B^T."""
    _check_matrix("a", a)
    _check_matrix("b", b)
    if a.shape[1] != b.shape[1]:
        raise ValueError(
            f"widths disagree: a is {a.shape[0]}x{a.shape[1]}, "
            f"b is {b.shape[0]}x{b.shape[1]} (both must share k)"
        )
    if _resolve_threads(threads) > 1:
        return _impl.gemm_nt_parallel(a, b)
    return _impl.gemm_nt(a, b)


def transpose_oop(b, *, tile: int = DEFAULT_TILE) -> np.ndarray:
    """Out-of-place transpose into a freshly allocated k x n matrix."""
    _check_matrix("b", b)
    if tile < 1:
        raise ValueError(f"tile must be >= 1, got {tile}")
    return _impl.transpose_oop(b, tile)


def gemm_tnn(
    a,
    b,
    *,
    block: int = DEFAULT_BLOCK,
    tile: int = DEFAULT_TILE,
    threads: int = 1,
    mem_budget: int | None = None,
) -> np.ndarray:
    """C = A x B^T via an explicit B^T buffer plus the NN kernel.

    The B^T buffer (4*n*k bytes) lives only for the duration of the
    call. ``mem_budget`` optionally caps the buffer size in bytes;
    exceeding it raises MemoryError before any allocation, which is
    what callers with a fallback path (the selector) catch.
    """
    _check_matrix("a", a)
    _check_matrix("b", b)
    if a.shape[1] != b.shape[1]:
        raise ValueError(
            f"widths disagree: a is {a.shape[0]}x{a.shape[1]}, "
            f"b is {b.shape[0]}x{b.shape[1]} (both must share k)"
        )
    if mem_budget is not None:
        needed = 4 * b.shape[0] * b.shape[1]
        if needed > mem_budget:
            raise MemoryError(
                f"transpose buffer needs {needed} bytes, budget is {mem_budget}"
            )
    if _resolve_threads(threads) > 1:
        return _impl.gemm_tnn_parallel(a, b, block, tile)
    return _impl.gemm_tnn(a, b, block, tile)
