"""Numba-compiled matrix kernels.

The access patterns here are deliberate and are part of the contract,
not an implementation detail: the two competitors for C = A x B^T must
have different performance envelopes for the selection problem to be
non-trivial.

- gemm_nn blocks all three loops and packs panels of B into a
  contiguous scratch tile, so it stays cache-resident and vectorizes at
  any size. This is the optimized "library NN" path.
- gemm_nt is a single-pass row-dot kernel: contiguous reads of one A
  row and one B row per output element, but no blocking and no packing.
  In-cache it matches gemm_nn per FLOP (and wins overall because it
  skips the transpose); once B outgrows the cache it re-streams all of
  B for every row of A and falls behind.
- gemm_tnn allocates the transpose buffer, fills it with a tiled
  out-of-place transpose and runs gemm_nn, all inside one compiled
  call so that a wall-clock timing of the call includes allocation,
  transpose and buffer release.

All kernels take and return C-contiguous float32 arrays and accumulate
in float32.
"""

import numpy as np
from numba import njit, prange

F32 = np.float32


@njit(cache=True, fastmath=True, inline="always")
def _nn_panel(a, b, c, j0, j1, p0, p1, i_lo, i_hi, pack_b, row0, row1):
    # One (j, p) panel of the blocked product over rows [i_lo, i_hi):
    # pack the B panel k-major, then emit two C rows per pass so each
    # packed load feeds two FMA chains.
    nj = j1 - j0
    npp = p1 - p0
    for pp in range(npp):
        for jj in range(nj):
            pack_b[pp, jj] = b[p0 + pp, j0 + jj]
    i = i_lo
    while i + 2 <= i_hi:
        for jj in range(nj):
            row0[jj] = F32(0.0)
            row1[jj] = F32(0.0)
        pp = 0
        while pp + 4 <= npp:
            a00 = a[i, p0 + pp]
            a01 = a[i, p0 + pp + 1]
            a02 = a[i, p0 + pp + 2]
            a03 = a[i, p0 + pp + 3]
            a10 = a[i + 1, p0 + pp]
            a11 = a[i + 1, p0 + pp + 1]
            a12 = a[i + 1, p0 + pp + 2]
            a13 = a[i + 1, p0 + pp + 3]
            for jj in range(nj):
                b0 = pack_b[pp, jj]
                b1 = pack_b[pp + 1, jj]
                b2 = pack_b[pp + 2, jj]
                b3 = pack_b[pp + 3, jj]
                row0[jj] += a00 * b0 + a01 * b1 + a02 * b2 + a03 * b3
                row1[jj] += a10 * b0 + a11 * b1 + a12 * b2 + a13 * b3
            pp += 4
        while pp < npp:
            a0 = a[i, p0 + pp]
            a1 = a[i + 1, p0 + pp]
            for jj in range(nj):
                b0 = pack_b[pp, jj]
                row0[jj] += a0 * b0
                row1[jj] += a1 * b0
            pp += 1
        for jj in range(nj):
            c[i, j0 + jj] += row0[jj]
            c[i + 1, j0 + jj] += row1[jj]
        i += 2
    while i < i_hi:
        for jj in range(nj):
            row0[jj] = F32(0.0)
        pp = 0
        while pp + 4 <= npp:
            a00 = a[i, p0 + pp]
            a01 = a[i, p0 + pp + 1]
            a02 = a[i, p0 + pp + 2]
            a03 = a[i, p0 + pp + 3]
            for jj in range(nj):
                row0[jj] += (
                    a00 * pack_b[pp, jj]
                    + a01 * pack_b[pp + 1, jj]
                    + a02 * pack_b[pp + 2, jj]
                    + a03 * pack_b[pp + 3, jj]
                )
            pp += 4
        while pp < npp:
            a0 = a[i, p0 + pp]
            for jj in range(nj):
                row0[jj] += a0 * pack_b[pp, jj]
            pp += 1
        for jj in range(nj):
            c[i, j0 + jj] += row0[jj]
        i += 1


@njit(cache=True, fastmath=True)
def gemm_nn(a, b, block):
    # a: m x k, b: k x n, both row-major.
    m, k = a.shape
    n = b.shape[1]
    c = np.zeros((m, n), dtype=F32)
    pack_b = np.empty((block, block), dtype=F32)
    row0 = np.empty(block, dtype=F32)
    row1 = np.empty(block, dtype=F32)
    for j0 in range(0, n, block):
        j1 = min(j0 + block, n)
        for p0 in range(0, k, block):
            p1 = min(p0 + block, k)
            _nn_panel(a, b, c, j0, j1, p0, p1, 0, m, pack_b, row0, row1)
    return c


@njit(cache=True, fastmath=True, parallel=True)
def gemm_nn_parallel(a, b, block):
    # Column panels are disjoint in c, so they parallelize cleanly.
    m, k = a.shape
    n = b.shape[1]
    c = np.zeros((m, n), dtype=F32)
    n_panels = (n + block - 1) // block
    for panel in prange(n_panels):
        j0 = panel * block
        j1 = min(j0 + block, n)
        pack_b = np.empty((block, block), dtype=F32)
        row0 = np.empty(block, dtype=F32)
        row1 = np.empty(block, dtype=F32)
        for p0 in range(0, k, block):
            p1 = min(p0 + block, k)
            _nn_panel(a, b, c, j0, j1, p0, p1, 0, m, pack_b, row0, row1)
    return c


@njit(cache=True, fastmath=True)
def gemm_nt(a, b):
    # a: m x k, b: n x k. One dot product per output element over the
    # contiguous rows of a and b; no packing, no blocking.
    m, k = a.shape
    n = b.shape[0]
    c = np.empty((m, n), dtype=F32)
    for i in range(m):
        for j in range(n):
            acc = F32(0.0)
            for p in range(k):
                acc += a[i, p] * b[j, p]
            c[i, j] = acc
    return c


@njit(cache=True, fastmath=True, parallel=True)
def gemm_nt_parallel(a, b):
    m, k = a.shape
    n = b.shape[0]
    c = np.empty((m, n), dtype=F32)
    for i in prange(m):
        for j in range(n):
            acc = F32(0.0)
            for p in range(k):
                acc += a[i, p] * b[j, p]
            c[i, j] = acc
    return c


@njit(cache=True)
def transpose_oop(b, tile):
    # Square tiles; the inner i loop writes a contiguous run of the
    # output row, the strided reads stay within one tile.
    n, k = b.shape
    out = np.empty((k, n), dtype=F32)
    for j0 in range(0, k, tile):
        j1 = min(j0 + tile, k)
        for i0 in range(0, n, tile):
            i1 = min(i0 + tile, n)
            for j in range(j0, j1):
                for i in range(i0, i1):
                    out[j, i] = b[i, j]
    return out


@njit(cache=True, fastmath=True)
def gemm_tnn(a, b, block, tile):
    bt = transpose_oop(b, tile)
    return gemm_nn(a, bt, block)


@njit(cache=True, fastmath=True)
def gemm_tnn_parallel(a, b, block, tile):
    bt = transpose_oop(b, tile)
    return gemm_nn_parallel(a, bt, block)


@njit(cache=True)
def walk_trees(feat, thresh, left, right, leaf, x, base_score, eta):
    """Raw ensemble score for one packed model; feat < 0 marks a leaf."""
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


@njit(cache=True)
def walk_trees_mnk(feat, thresh, left, right, leaf, prefix, m, n, k, base_score, eta):
    """walk_trees with the feature vector assembled in compiled code:
    slots 0..4 come from the platform prefix, 5..7 are (m, n, k)."""
    x = np.empty(8, dtype=np.float64)
    for i in range(5):
        x[i] = prefix[i]
    x[5] = m
    x[6] = n
    x[7] = k
    return walk_trees(feat, thresh, left, right, leaf, x, base_score, eta)
