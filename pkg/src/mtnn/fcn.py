"""Fully-connected-network GEMM workload for end-to-end timing.

Emulates one training iteration of an FCN purely as its GEMM call
sequence; operands are seeded random matrices and nothing is learned.
Per layer with ``din`` inputs, ``dout`` outputs and mini-batch ``b``:

- forward: one NT-shaped product, activations (b x din) times
  weights (dout x din) transposed. This is the call the dispatcher
  intercepts.
- backward: one NN-shaped product (b x dout times dout x din, the
  input-gradient GEMM) and one NT-shaped product of shape
  (dout, din, b) standing in for the weight-gradient GEMM. Backward
  products always run their fixed kernels regardless of dispatcher,
  mirroring an integration that only hooks forward-pass NT calls; the
  backward phase is therefore dispatcher-independent up to noise.

Operands are generated up front; the timed windows cover kernels only.
``compare_dispatchers`` times several dispatchers on the same operands
in interleaved rounds, so drifting machine throughput cannot skew the
comparison.
"""

import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .selector import Dispatcher

__all__ = [
    "GemmCall",
    "FcnResult",
    "FcnInfeasibleError",
    "PRESETS",
    "preset_widths",
    "scaled_widths",
    "fcn_scenario",
    "compare_dispatchers",
]

# preset -> (input_dim, output_dim, {hidden_layer_count: widths})
PRESETS = {
    "mnist-like": (784, 10, {
        2: (2048, 1024),
        3: (2048, 2048, 1024),
        4: (2048, 2048, 2048, 1024),
    }),
    "synthetic-like": (26752, 26752, {
        2: (4096, 4096),
        3: (4096, 4096, 4096),
        4: (4096, 4096, 4096, 4096),
    }),
}

# default mini-batches at the default scale divisor of 8: the original
# mini-batch ranges shrink with the rest of the problem
DEFAULT_BATCHES = {
    "mnist-like": (8, 16),
    "synthetic-like": (32, 64, 128),
}


class FcnInfeasibleError(ValueError):
    """A layer's operands do not fit the memory budget."""


@dataclass(frozen=True)
class GemmCall:
    phase: str  # "forward" or "backward"
    op: str  # "nt" (dispatchable), "nn" or "nt-fixed"
    m: int
    n: int
    k: int
    seconds: float


@dataclass(frozen=True)
class FcnResult:
    forward_seconds: float
    backward_seconds: float
    calls: tuple

    @property
    def total_seconds(self) -> float:
        return self.forward_seconds + self.backward_seconds


def preset_widths(preset: str, hidden_layers: int):
    """(input_dim, output_dim, hidden widths) for a named preset."""
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    input_dim, output_dim, by_depth = PRESETS[preset]
    if hidden_layers not in by_depth:
        raise ValueError(
            f"preset {preset!r} supports {sorted(by_depth)} hidden layers, "
            f"got {hidden_layers}"
        )
    return input_dim, output_dim, by_depth[hidden_layers]


def scaled_widths(widths: Sequence[int], divisor: int) -> tuple:
    """Shrink layer widths by an integer divisor (floor, minimum 1)."""
    if divisor < 1:
        raise ValueError(f"scale divisor must be >= 1, got {divisor}")
    return tuple(max(1, w // divisor) for w in widths)


def _check_layer(index, batch, din, dout, budget):
    # operands for both phases of this layer, float32, plus slack for
    # the transpose buffer a TNN branch may allocate
    need = 4 * (batch * din + 2 * dout * din + 2 * batch * dout + dout * din)
    if need > budget:
        raise FcnInfeasibleError(
            f"layer {index} ({din} -> {dout}, batch {batch}) needs "
            f"{need / 2**20:.0f} MiB, budget is {budget / 2**20:.0f} MiB; "
            "try a larger scale divisor"
        )


def _build_layers(hidden, batch, input_dim, output_dim, seed, mem_fraction):
    import psutil

    if batch < 1:
        raise ValueError(f"batch must be >= 1, got {batch}")
    widths = [int(input_dim)] + [int(w) for w in hidden] + [int(output_dim)]
    if any(w < 1 for w in widths):
        raise ValueError(f"layer widths must be positive, got {widths}")
    budget = psutil.virtual_memory().available * mem_fraction
    rng = np.random.default_rng(seed)
    layers = []
    for index, (din, dout) in enumerate(zip(widths[:-1], widths[1:])):
        _check_layer(index, batch, din, dout, budget)
        layers.append({
            "din": din,
            "dout": dout,
            # forward: activations x weights^T
            "x": rng.uniform(-1, 1, (batch, din)).astype(np.float32),
            "w": rng.uniform(-1, 1, (dout, din)).astype(np.float32),
            # backward NN: output gradient x weights
            "dz": rng.uniform(-1, 1, (batch, dout)).astype(np.float32),
            # backward NT stand-in, shape (dout, din, batch)
            "ga": rng.uniform(-1, 1, (dout, batch)).astype(np.float32),
            "gb": rng.uniform(-1, 1, (din, batch)).astype(np.float32),
        })
    return layers


def _forward_call(dispatch, a, w, block, tile, threads):
    if isinstance(dispatch, Dispatcher):
        return dispatch.gemm(a, w)
    if dispatch == "nt":
        return kernels.gemm_nt(a, w, threads=threads)
    return kernels.gemm_tnn(a, w, block=block, tile=tile, threads=threads)


def _touch(arrays):
    # read every operand once so each timed phase starts from the same
    # input-cache state; a TNN forward otherwise evicts the weights and
    # taxes whatever phase runs next, skewing dispatcher comparisons
    for arr in arrays:
        float(arr[:, ::16].sum())  # one element per cache line


def _run_iteration(layers, batch, dispatch, block, tile, threads, calls=None):
    """One forward+backward pass; returns (fwd_seconds, bwd_seconds)."""
    fwd = 0.0
    for layer in layers:
        _touch((layer["x"], layer["w"]))
        start = time.perf_counter()
        _forward_call(dispatch, layer["x"], layer["w"], block, tile, threads)
        elapsed = time.perf_counter() - start
        fwd += elapsed
        if calls is not None:
            calls.append(GemmCall(
                "forward", "nt", batch, layer["dout"], layer["din"], elapsed
            ))
    bwd = 0.0
    for layer in reversed(layers):
        _touch((layer["dz"], layer["w"], layer["ga"], layer["gb"]))
        start = time.perf_counter()
        kernels.gemm_nn(layer["dz"], layer["w"], block=block, threads=threads)
        elapsed = time.perf_counter() - start
        bwd += elapsed
        if calls is not None:
            calls.append(GemmCall(
                "backward", "nn", batch, layer["din"], layer["dout"], elapsed
            ))
        start = time.perf_counter()
        kernels.gemm_nt(layer["ga"], layer["gb"], threads=threads)
        elapsed = time.perf_counter() - start
        bwd += elapsed
        if calls is not None:
            calls.append(GemmCall(
                "backward", "nt-fixed", layer["dout"], layer["din"], batch, elapsed
            ))
    return fwd, bwd


def _check_dispatch(dispatch):
    if isinstance(dispatch, str) and dispatch not in ("nt", "tnn"):
        raise ValueError(
            f"dispatch must be 'nt', 'tnn' or a Dispatcher, got {dispatch!r}"
        )


def fcn_scenario(
    hidden: Sequence[int],
    batch: int,
    input_dim: int,
    output_dim: int,
    dispatch,
    *,
    iters: int = 1,
    warmup: int = 1,
    seed: int = 0,
    block: int = kernels.DEFAULT_BLOCK,
    tile: int = kernels.DEFAULT_TILE,
    threads: int = 1,
    mem_fraction: float = 0.8,
) -> FcnResult:
    """Run the GEMM sequence of one training iteration and time it.

    ``dispatch`` is "nt", "tnn", or a loaded Dispatcher (model-guided).
    Times are averaged over ``iters`` iterations after ``warmup``
    discarded ones. Per-call seconds in the log come from the last
    timed iteration.
    """
    _check_dispatch(dispatch)
    if iters < 1:
        raise ValueError(f"iters must be >= 1, got {iters}")
    layers = _build_layers(hidden, batch, input_dim, output_dim, seed, mem_fraction)
    for _ in range(warmup):
        _run_iteration(layers, batch, dispatch, block, tile, threads)
    fwd_total = bwd_total = 0.0
    calls = []
    for _ in range(iters):
        calls = []
        fwd, bwd = _run_iteration(layers, batch, dispatch, block, tile, threads, calls)
        fwd_total += fwd
        bwd_total += bwd
    return FcnResult(
        forward_seconds=fwd_total / iters,
        backward_seconds=bwd_total / iters,
        calls=tuple(calls),
    )


def compare_dispatchers(
    dispatchers: dict,
    hidden: Sequence[int],
    batches: Sequence[int],
    input_dim: int,
    output_dim: int,
    *,
    iters: int = 3,
    warmup: int = 1,
    seed: int = 0,
    block: int = kernels.DEFAULT_BLOCK,
    tile: int = kernels.DEFAULT_TILE,
    threads: int = 1,
    mem_fraction: float = 0.8,
) -> dict:
    """Phase times per dispatcher name, averaged over batch sizes.

    All dispatchers run on identical operands and are timed in
    interleaved rounds (one iteration each per round) so machine drift
    affects them equally. Returns {name: (forward, backward) seconds}.
    """
    for dispatch in dispatchers.values():
        _check_dispatch(dispatch)
    if iters < 1:
        raise ValueError(f"iters must be >= 1, got {iters}")
    sums = {name: [0.0, 0.0] for name in dispatchers}
    for batch in batches:
        layers = _build_layers(hidden, batch, input_dim, output_dim, seed, mem_fraction)
        rounds = {name: ([], []) for name in dispatchers}
        for _ in range(warmup):
            for dispatch in dispatchers.values():
                _run_iteration(layers, batch, dispatch, block, tile, threads)
        order = list(dispatchers)
        for r in range(iters):
            # rotate execution order per round so slow periods do not
            # systematically land on the same dispatcher's slot
            for name in order[r % len(order):] + order[: r % len(order)]:
                fwd, bwd = _run_iteration(
                    layers, batch, dispatchers[name], block, tile, threads
                )
                rounds[name][0].append(fwd)
                rounds[name][1].append(bwd)
        # best-of-rounds: scheduler noise is one-sided, so min is the
        # stable estimator when comparing identical work across
        # dispatchers (backward phases must come out equal)
        for name in dispatchers:
            sums[name][0] += min(rounds[name][0])
            sums[name][1] += min(rounds[name][1])
    scale = 1.0 / len(list(batches))
    return {name: (fwd * scale, bwd * scale) for name, (fwd, bwd) in sums.items()}
