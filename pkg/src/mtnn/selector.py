"""Runtime dispatch for C = A x B^T: consult the model, run NT or TNN.

Feature assembly is O(1) (five cached platform numbers plus m, n, k)
and prediction walks at most n_estimators * max_depth tree nodes, so
the per-call overhead is independent of the matrix sizes. A Dispatcher
packs the trees into flat arrays once at construction; the per-call
walk then runs through the kernel backend (compiled under numba).

Memory guard: if the B^T buffer (4*n*k bytes) does not fit in free
memory the dispatcher never asks the model and falls back to direct
NT. A TNN attempt that still hits MemoryError is retried as NT and
logged.
"""

import enum
import logging
from dataclasses import dataclass

import numpy as np

from . import gbdt, kernels
from .kernels import ProblemShape
from .platform import PlatformFeatures

if kernels.BACKEND == "numba":
    from .kernels import _numba_impl as _impl
else:
    from .kernels import _numpy_impl as _impl

log = logging.getLogger(__name__)

__all__ = [
    "Choice",
    "Reason",
    "SelectionDecision",
    "Dispatcher",
    "build_features",
    "select",
    "mtnn_gemm",
]


class Choice(enum.Enum):
    USE_NT = "nt"
    USE_TNN = "tnn"


class Reason(enum.Enum):
    PREDICTED = "predicted"
    MEMORY_FALLBACK = "memory_fallback"


@dataclass(frozen=True)
class SelectionDecision:
    choice: Choice
    reason: Reason
    raw_score: float

    def __post_init__(self):
        if self.reason is Reason.MEMORY_FALLBACK and self.choice is not Choice.USE_NT:
            raise ValueError("memory fallback always selects NT")


def build_features(platform: PlatformFeatures, shape: ProblemShape) -> np.ndarray:
    """8-vector (gm, sm, cc, mbw, l2c, m, n, k), in that order."""
    return np.array(
        platform.as_tuple() + (float(shape.m), float(shape.n), float(shape.k)),
        dtype=np.float64,
    )


def transpose_buffer_bytes(shape: ProblemShape) -> int:
    return 4 * shape.n * shape.k


def _free_memory_bytes() -> int:
    import psutil

    return psutil.virtual_memory().available


def _pack_trees(model: gbdt.GbdtModel):
    """Flatten the ensemble into arrays for the compiled walker.

    Node layout per tree: feat[i] >= 0 marks an internal node with
    children at left[i]/right[i]; feat[i] == -1 marks a leaf whose
    weight is leaf[i].
    """
    n_trees = max(len(model.trees), 1)
    counts = [max(_node_count(t), 1) for t in model.trees] or [1]
    width = max(counts)
    feat = np.full((n_trees, width), -1, dtype=np.int64)
    thresh = np.zeros((n_trees, width), dtype=np.float64)
    left = np.zeros((n_trees, width), dtype=np.int64)
    right = np.zeros((n_trees, width), dtype=np.int64)
    leaf = np.zeros((n_trees, width), dtype=np.float64)
    for t, tree in enumerate(model.trees):
        _fill_packed(tree, t, feat, thresh, left, right, leaf)
    return feat, thresh, left, right, leaf


def _node_count(node):
    if node.is_leaf:
        return 1
    return 1 + _node_count(node.left) + _node_count(node.right)


def _fill_packed(tree, t, feat, thresh, left, right, leaf):
    slots = {"next": 0}

    def place(node):
        idx = slots["next"]
        slots["next"] += 1
        if node.is_leaf:
            leaf[t, idx] = node.weight
            return idx
        feat[t, idx] = node.feature
        thresh[t, idx] = node.threshold
        left[t, idx] = place(node.left)
        right[t, idx] = place(node.right)
        return idx

    place(tree)


class Dispatcher:
    """Model plus platform, packed once; the per-call hot path.

    Immutable after construction, safe to share across threads.
    """

    def __init__(
        self,
        model: gbdt.GbdtModel,
        platform: PlatformFeatures,
        *,
        block: int = kernels.DEFAULT_BLOCK,
        tile: int = kernels.DEFAULT_TILE,
        threads: int = 1,
    ):
        if model.n_features != 8:
            raise ValueError(
                f"dispatch model must take 8 features, got {model.n_features}"
            )
        self.model = model
        self.platform = platform
        self.block = block
        self.tile = tile
        self.threads = kernels._resolve_threads(threads)
        self._prefix = np.array(platform.as_tuple(), dtype=np.float64)
        self._packed = _pack_trees(model)
        self._base = float(model.base_score)
        self._eta = float(model.params.eta)
        self._free_cache = (0.0, 0)
        # one warm call so compilation happens at load, not first dispatch
        self.raw_score(ProblemShape(1, 1, 1))

    def _cached_free_memory(self) -> int:
        # querying the OS costs tens of microseconds, which would rival
        # small-matrix kernel times; a 1 s cache keeps select() O(1) and
        # the gemm() MemoryError retry covers any staleness
        import time

        stamp, value = self._free_cache
        now = time.monotonic()
        if now - stamp > 1.0:
            value = _free_memory_bytes()
            self._free_cache = (now, value)
        return value

    def raw_score(self, shape: ProblemShape) -> float:
        return self._raw(float(shape.m), float(shape.n), float(shape.k))

    def _raw(self, m: float, n: float, k: float) -> float:
        feat, thresh, left, right, leaf = self._packed
        return _impl.walk_trees_mnk(
            feat, thresh, left, right, leaf, self._prefix, m, n, k,
            self._base, self._eta,
        )

    def select(
        self, shape: ProblemShape, free_memory: int | None = None
    ) -> SelectionDecision:
        if free_memory is None:
            free_memory = self._cached_free_memory()
        if transpose_buffer_bytes(shape) > free_memory:
            return SelectionDecision(Choice.USE_NT, Reason.MEMORY_FALLBACK, float("nan"))
        raw = self.raw_score(shape)
        choice = Choice.USE_NT if raw >= 0.0 else Choice.USE_TNN
        return SelectionDecision(choice, Reason.PREDICTED, raw)

    def gemm(self, a, b, free_memory: int | None = None) -> np.ndarray:
        """Dispatched C = A x B^T; result is branch-independent.

        Inlines select() so the per-call overhead stays a few
        microseconds; the decision is identical to select() on the
        same shape and free memory.
        """
        kernels._check_matrix("a", a)
        kernels._check_matrix("b", b)
        m, k = a.shape
        n = b.shape[0]
        if k != b.shape[1]:
            raise ValueError(
                f"widths disagree: a is {m}x{k}, b is {n}x{b.shape[1]} "
                "(both must share k)"
            )
        if free_memory is None:
            free_memory = self._cached_free_memory()
        use_tnn = 4 * n * k <= free_memory and self._raw(m, n, k) < 0.0
        if use_tnn:
            try:
                return _impl.gemm_tnn(a, b, self.block, self.tile) \
                    if self.threads == 1 \
                    else _impl.gemm_tnn_parallel(a, b, self.block, self.tile)
            except MemoryError:
                log.warning("TNN allocation failed for (%d, %d, %d); retrying as NT",
                            m, n, k)
        if self.threads == 1:
            return _impl.gemm_nt(a, b)
        return _impl.gemm_nt_parallel(a, b)


def select(
    model: gbdt.GbdtModel,
    platform: PlatformFeatures,
    shape: ProblemShape,
    free_memory: int | None = None,
) -> SelectionDecision:
    """One-shot selection without a packed dispatcher."""
    if free_memory is None:
        free_memory = _free_memory_bytes()
    if transpose_buffer_bytes(shape) > free_memory:
        return SelectionDecision(Choice.USE_NT, Reason.MEMORY_FALLBACK, float("nan"))
    raw = gbdt.predict_raw(model, build_features(platform, shape))
    choice = Choice.USE_NT if raw >= 0.0 else Choice.USE_TNN
    return SelectionDecision(choice, Reason.PREDICTED, raw)


def mtnn_gemm(
    model: gbdt.GbdtModel,
    platform: PlatformFeatures,
    a,
    b,
    free_memory: int | None = None,
) -> np.ndarray:
    """Convenience wrapper: build a Dispatcher per call and run it.

    Hot paths should construct one Dispatcher and reuse it.
    """
    return Dispatcher(model, platform).gemm(a, b, free_memory)
