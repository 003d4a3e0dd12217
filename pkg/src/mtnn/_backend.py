"""Kernel backend selection.

The hot kernels (GEMM variants, transpose, tree walking) have two
implementations: numba-compiled loops and a pure-numpy fallback. The
numba path is the default because the benchmark harness depends on its
access patterns; the numpy path exists for portability and for checking
results. Selection happens once at import time via the MTNN_BACKEND
environment variable:

    MTNN_BACKEND=numba   require numba (ImportError if missing)
    MTNN_BACKEND=numpy   force the pure-numpy fallback
    unset / "auto"       numba if importable, else numpy
"""

import os

_requested = os.environ.get("MTNN_BACKEND", "auto").strip().lower() or "auto"

if _requested not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"MTNN_BACKEND must be 'numba', 'numpy' or 'auto', got {_requested!r}"
    )

if _requested == "numpy":
    HAS_NUMBA = False
else:
    try:
        import numba  # noqa: F401

        HAS_NUMBA = True
    except ImportError:
        if _requested == "numba":
            raise
        HAS_NUMBA = False

BACKEND = "numba" if HAS_NUMBA else "numpy"


def active_backend() -> str:
    """Name of the kernel backend picked at import: 'numba' or 'numpy'."""
    return BACKEND
