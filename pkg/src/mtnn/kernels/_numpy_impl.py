"""Pure-numpy fallback kernels.

Results match the numba backend within floating-point reassociation,
but the performance asymmetry between gemm_nt and gemm_tnn does NOT
survive here: numpy delegates both to the same BLAS sgemm. Use this
backend for portability and result checking, not for collecting
benchmark labels (the harness warns when it is active).

Signatures mirror the numba module; block/tile arguments are accepted
and ignored where BLAS makes them meaningless.
"""

import numpy as np

F32 = np.float32


def gemm_nn(a, b, block):
    return a @ b


def gemm_nn_parallel(a, b, block):
    return a @ b


def gemm_nt(a, b):
    # BLAS consumes the transposed view directly; b is not materialized.
    return a @ b.T


def gemm_nt_parallel(a, b):
    return a @ b.T


def transpose_oop(b, tile):
    return np.ascontiguousarray(b.T)


def gemm_tnn(a, b, block, tile):
    bt = np.ascontiguousarray(b.T)
    return a @ bt


def gemm_tnn_parallel(a, b, block, tile):
    return gemm_tnn(a, b, block, tile)


def walk_trees(feat, thresh, left, right, leaf, x, base_score, eta):
    raw = base_score
    for t in range(feat.shape[0]):
        node = 0
        while feat[t, node] >= 0:
            if x[feat[t, node]] < thresh[t, node]:
                node = left[t, node]
            else:
                node = right[t, node]
        raw += eta * leaf[t, node]
    return raw


def walk_trees_mnk(feat, thresh, left, right, leaf, prefix, m, n, k, base_score, eta):
    x = np.empty(8, dtype=np.float64)
    x[:5] = prefix[:5]
    x[5] = m
    x[6] = n
    x[7] = k
    return walk_trees(feat, thresh, left, right, leaf, x, base_score, eta)
