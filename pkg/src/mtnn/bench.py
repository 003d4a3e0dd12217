"""Timing harness, size-grid sweep, and labeling of measured records.

The sweep measures three routines per (m, n, k) case -- NN as the
reference product, then the two C = A x B^T competitors NT and TNN --
and turns each case into a training sample: the five platform features
plus (m, n, k), labeled +1 when NT achieved at least the throughput of
TNN and -1 otherwise.

Timings can also be injected from a CSV file instead of measured
("fixture mode"), which keeps the labeling and training pipeline
exercisable on machines whose kernel timings do not separate the two
classes.
"""

import csv
import itertools
import logging
import statistics
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .kernels import ProblemShape
from .platform import PlatformFeatures

log = logging.getLogger(__name__)

KERNEL_NAMES = ("nn", "nt", "tnn")

# Feature vector layout; order is a wire contract shared with the
# samples CSV, the learner and the selector.
SAMPLE_HEADER = ("gm", "sm", "cc", "mbw", "l2c", "m", "n", "k", "label")
RECORD_HEADER = ("m", "n", "k", "p_nn", "p_nt", "p_tnn", "t_nt", "t_tnn")
TIMING_HEADER = ("m", "n", "k", "t_nn", "t_nt", "t_tnn")


@dataclass(frozen=True)
class TimingConfig:
    """Knobs for one measurement run."""

    reps: int = 5
    warmup: int = 2
    seed: int = 0
    block: int = kernels.DEFAULT_BLOCK
    tile: int = kernels.DEFAULT_TILE
    threads: int = 1
    # fraction of available memory the operand working set may use
    mem_fraction: float = 0.8

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError(f"reps must be >= 1, got {self.reps}")
        if self.warmup < 0:
            raise ValueError(f"warmup must be >= 0, got {self.warmup}")


@dataclass(frozen=True)
class BenchRecord:
    """Measured performance of all three kernels on one case."""

    shape: ProblemShape
    p_nn: float
    p_nt: float
    p_tnn: float
    t_nt: float
    t_tnn: float

    def __post_init__(self):
        for name in ("p_nn", "p_nt", "p_tnn", "t_nt", "t_tnn"):
            value = getattr(self, name)
            if not (value > 0 and np.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value}")


@dataclass(frozen=True)
class Sample:
    """One training sample: 8 features and a +/-1 label."""

    features: np.ndarray  # (gm, sm, cc, mbw, l2c, m, n, k) as float64
    label: int

    def __post_init__(self):
        if self.label not in (-1, 1):
            raise ValueError(f"label must be -1 or +1, got {self.label}")
        if np.asarray(self.features).shape != (8,):
            raise ValueError("features must be an 8-vector")


def gflops(shape: ProblemShape, seconds: float) -> float:
    """Throughput of one product: 2*m*n*k floating ops over ``seconds``."""
    if not seconds > 0:
        raise ValueError(f"duration must be positive, got {seconds}")
    return shape.flops / (seconds * 1e9)


def _median(values: Sequence[float]) -> float:
    return statistics.median(values)


def make_operands(shape: ProblemShape, seed: int):
    """Seeded uniform [-1, 1] operands: A (m x k), B (n x k), B_kn (k x n).

    B_kn is the independently laid-out k x n operand for the NN timing;
    it equals B^T so all three kernels compute the same product.
    """
    rng = np.random.default_rng(seed)
    a = rng.uniform(-1.0, 1.0, (shape.m, shape.k)).astype(np.float32)
    b = rng.uniform(-1.0, 1.0, (shape.n, shape.k)).astype(np.float32)
    b_kn = np.ascontiguousarray(b.T)
    return a, b, b_kn


def time_callable(fn, reps: int, warmup: int) -> float:
    """Median wall-clock seconds of ``fn()`` over ``reps`` timed runs."""
    for _ in range(warmup):
        fn()
    times = []
    for _ in range(reps):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return _median(times)


def time_callables_interleaved(fns: dict, reps: int, warmup: int) -> dict:
    """Per-name median seconds, measured in round-robin order.

    Competing kernels on one case are timed within the same rounds so
    that drifting machine throughput (frequency scaling, noisy
    neighbors) hits all of them alike; sequential per-kernel timing can
    otherwise skew a comparison by tens of percent.
    """
    for _ in range(warmup):
        for fn in fns.values():
            fn()
    times = {name: [] for name in fns}
    for _ in range(reps):
        for name, fn in fns.items():
            start = time.perf_counter()
            fn()
            times[name].append(time.perf_counter() - start)
    return {name: _median(ts) for name, ts in times.items()}


def time_kernel(
    kernel: str,
    shape: ProblemShape,
    reps: int | None = None,
    warmup: int | None = None,
    *,
    config: TimingConfig | None = None,
) -> float:
    """Median seconds for one kernel on seeded operands of ``shape``.

    For "tnn" the timed window spans the whole call, so transpose
    buffer allocation and release are included. ``reps``/``warmup``
    override the config when given.
    """
    if kernel not in KERNEL_NAMES:
        raise ValueError(f"kernel must be one of {KERNEL_NAMES}, got {kernel!r}")
    cfg = config or TimingConfig()
    if reps is not None or warmup is not None:
        cfg = replace(
            cfg,
            reps=cfg.reps if reps is None else reps,
            warmup=cfg.warmup if warmup is None else warmup,
        )
    shape.validate()
    a, b, b_kn = make_operands(shape, cfg.seed)
    if kernel == "nn":
        fn = lambda: kernels.gemm_nn(a, b_kn, block=cfg.block, threads=cfg.threads)
    elif kernel == "nt":
        fn = lambda: kernels.gemm_nt(a, b, threads=cfg.threads)
    else:
        fn = lambda: kernels.gemm_tnn(
            a, b, block=cfg.block, tile=cfg.tile, threads=cfg.threads
        )
    return time_callable(fn, cfg.reps, cfg.warmup)


def working_set_bytes(shape: ProblemShape) -> int:
    # A + B + B_kn + C + the transient B^T buffer, all float32.
    m, n, k = shape
    return 4 * (m * k + 2 * n * k + m * n + n * k)


def shape_is_feasible(shape: ProblemShape, mem_fraction: float = 0.8) -> bool:
    import psutil

    budget = psutil.virtual_memory().available * mem_fraction
    return working_set_bytes(shape) <= budget


def grid_shapes(exponents: Iterable[int]) -> list[ProblemShape]:
    """All (m, n, k) with each dimension in {2^i}, lexicographic order."""
    sizes = [2**e for e in exponents]
    if not sizes:
        raise ValueError("exponent range is empty")
    if any(s < 1 for s in sizes):
        raise ValueError("exponents must be >= 0")
    return [ProblemShape(m, n, k) for m, n, k in itertools.product(sizes, sizes, sizes)]


def measure_case(shape: ProblemShape, cfg: TimingConfig) -> BenchRecord:
    """Time all three kernels on one case and assemble the record."""
    a, b, b_kn = make_operands(shape, cfg.seed)
    timings = time_callables_interleaved(
        {
            "nn": lambda: kernels.gemm_nn(a, b_kn, block=cfg.block, threads=cfg.threads),
            "nt": lambda: kernels.gemm_nt(a, b, threads=cfg.threads),
            "tnn": lambda: kernels.gemm_tnn(
                a, b, block=cfg.block, tile=cfg.tile, threads=cfg.threads
            ),
        },
        cfg.reps,
        cfg.warmup,
    )
    return BenchRecord(
        shape=shape,
        p_nn=gflops(shape, timings["nn"]),
        p_nt=gflops(shape, timings["nt"]),
        p_tnn=gflops(shape, timings["tnn"]),
        t_nt=timings["nt"],
        t_tnn=timings["tnn"],
    )


def record_from_timings(shape: ProblemShape, t_nn, t_nt, t_tnn) -> BenchRecord:
    return BenchRecord(
        shape=shape,
        p_nn=gflops(shape, t_nn),
        p_nt=gflops(shape, t_nt),
        p_tnn=gflops(shape, t_tnn),
        t_nt=t_nt,
        t_tnn=t_tnn,
    )


def sweep_grid(
    exponents: Iterable[int],
    platform: PlatformFeatures,
    config: TimingConfig | None = None,
    *,
    injected: dict | None = None,
) -> list[BenchRecord]:
    """One BenchRecord per feasible grid case, in deterministic order.

    ``injected`` maps (m, n, k) to (t_nn, t_nt, t_tnn) seconds and
    bypasses measurement entirely; every grid case must be covered.
    Infeasible or failing cases are logged and skipped; they produce no
    record.
    """
    cfg = config or TimingConfig()
    shapes = grid_shapes(exponents)
    if kernels.active_backend() != "numba" and injected is None:
        log.warning(
            "measuring with the %s backend: NT and TNN share one BLAS path, "
            "so labels will not reflect the kernel tradeoff",
            kernels.active_backend(),
        )
    records = []
    for shape in shapes:
        if injected is not None:
            key = tuple(shape)
            if key not in injected:
                raise KeyError(f"injected timings missing case {key}")
            records.append(record_from_timings(shape, *injected[key]))
            continue
        if not shape_is_feasible(shape, cfg.mem_fraction):
            log.info("skipping infeasible case %s", tuple(shape))
            continue
        try:
            record = measure_case(shape, cfg)
        except MemoryError:
            log.info("skipping case %s: memory exhausted", tuple(shape))
            continue
        spread = max(record.p_nn, record.p_nt, record.p_tnn) / min(
            record.p_nn, record.p_nt, record.p_tnn
        )
        log.info(
            "case %s: p_nn=%.2f p_nt=%.2f p_tnn=%.2f (spread %.2fx)",
            tuple(shape),
            record.p_nn,
            record.p_nt,
            record.p_tnn,
            spread,
        )
        records.append(record)
    return records


def label_record(record: BenchRecord, platform: PlatformFeatures) -> Sample:
    """Features (gm, sm, cc, mbw, l2c, m, n, k); +1 iff p_nt - p_tnn >= 0."""
    diff = record.p_nt - record.p_tnn
    label = 1 if diff >= 0 else -1
    features = np.array(
        platform.as_tuple() + tuple(float(d) for d in record.shape), dtype=np.float64
    )
    return Sample(features=features, label=label)


def label_records(
    records: Iterable[BenchRecord], platform: PlatformFeatures
) -> list[Sample]:
    return [label_record(r, platform) for r in records]


# ---------------------------------------------------------------------------
# Synthetic timing fixture
# ---------------------------------------------------------------------------

# Cost model for fixture mode, loosely shaped like the measured kernel
# behavior: NN runs at a flat throughput; NT matches it in cache and
# degrades once B outgrows a nominal cache; TNN pays a per-call setup
# cost plus a transpose term on top of NN. Constants are arbitrary but
# fixed: they guarantee that small cases label +1 (NT) and large cases
# label -1 (TNN) on any machine.
_SYN_NN_FLOPS = 30e9
_SYN_NT_FLOPS = 24e9
_SYN_CACHE_ELEMS = 512 * 512
_SYN_NT_PENALTY = 3.0
_SYN_TNN_SETUP = 20e-6
_SYN_TRANSPOSE_BW = 2e9  # elements/second


def synthetic_timings(shape: ProblemShape) -> tuple[float, float, float]:
    """Deterministic (t_nn, t_nt, t_tnn) for fixture mode."""
    m, n, k = shape
    flops = shape.flops
    t_nn = flops / _SYN_NN_FLOPS
    overflow = min(1.0, (n * k) / _SYN_CACHE_ELEMS)
    t_nt = flops / _SYN_NT_FLOPS * (1.0 + _SYN_NT_PENALTY * overflow)
    t_tnn = t_nn + _SYN_TNN_SETUP + (n * k) / _SYN_TRANSPOSE_BW
    return t_nn, t_nt, t_tnn


def write_timings_csv(path, exponents: Iterable[int]) -> int:
    """Write the synthetic fixture for a grid; returns the case count."""
    shapes = grid_shapes(exponents)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TIMING_HEADER)
        for shape in shapes:
            t_nn, t_nt, t_tnn = synthetic_timings(shape)
            writer.writerow([shape.m, shape.n, shape.k, t_nn, t_nt, t_tnn])
    return len(shapes)


def read_timings_csv(path) -> dict:
    """Load injected timings: {(m, n, k): (t_nn, t_nt, t_tnn)}."""
    timings = {}
    for row, line_no in _read_csv_rows(path, TIMING_HEADER):
        key = (int(row["m"]), int(row["n"]), int(row["k"]))
        timings[key] = (
            _parse_float(row["t_nn"], path, line_no, "t_nn"),
            _parse_float(row["t_nt"], path, line_no, "t_nt"),
            _parse_float(row["t_tnn"], path, line_no, "t_tnn"),
        )
    return timings


# ---------------------------------------------------------------------------
# CSV serialization (full round-trip precision: repr of Python floats)
# ---------------------------------------------------------------------------


class CsvFormatError(ValueError):
    """Raised for malformed CSV input, carrying file and line number."""


def _parse_float(text, path, line_no, column):
    try:
        return float(text)
    except (TypeError, ValueError):
        raise CsvFormatError(
            f"{path}:{line_no}: column {column!r} is not a number: {text!r}"
        ) from None


def _read_csv_rows(path, expected_header):
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise CsvFormatError(f"{path}:1: file is empty")
        if tuple(reader.fieldnames) != tuple(expected_header):
            raise CsvFormatError(
                f"{path}:1: expected header {','.join(expected_header)}, "
                f"got {','.join(reader.fieldnames)}"
            )
        for row in reader:
            line_no = reader.line_num
            if None in row or any(v is None for v in row.values()):
                raise CsvFormatError(f"{path}:{line_no}: wrong number of columns")
            yield row, line_no


def write_records_csv(path, records: Iterable[BenchRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORD_HEADER)
        for r in records:
            writer.writerow(
                [r.shape.m, r.shape.n, r.shape.k, r.p_nn, r.p_nt, r.p_tnn, r.t_nt, r.t_tnn]
            )


def read_records_csv(path) -> list[BenchRecord]:
    records = []
    for row, line_no in _read_csv_rows(path, RECORD_HEADER):
        shape = ProblemShape(int(row["m"]), int(row["n"]), int(row["k"]))
        records.append(
            BenchRecord(
                shape=shape,
                p_nn=_parse_float(row["p_nn"], path, line_no, "p_nn"),
                p_nt=_parse_float(row["p_nt"], path, line_no, "p_nt"),
                p_tnn=_parse_float(row["p_tnn"], path, line_no, "p_tnn"),
                t_nt=_parse_float(row["t_nt"], path, line_no, "t_nt"),
                t_tnn=_parse_float(row["t_tnn"], path, line_no, "t_tnn"),
            )
        )
    return records


def write_samples_csv(path, samples: Iterable[Sample]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SAMPLE_HEADER)
        for s in samples:
            writer.writerow([repr(float(v)) for v in s.features] + [s.label])


def read_samples_csv(path) -> list[Sample]:
    samples = []
    for row, line_no in _read_csv_rows(path, SAMPLE_HEADER):
        features = np.array(
            [_parse_float(row[name], path, line_no, name) for name in SAMPLE_HEADER[:-1]],
            dtype=np.float64,
        )
        label_text = row["label"].strip()
        if label_text not in ("-1", "1", "+1"):
            raise CsvFormatError(
                f"{path}:{line_no}: label must be -1 or 1, got {label_text!r}"
            )
        samples.append(Sample(features=features, label=int(label_text)))
    return samples


def samples_to_arrays(samples: Sequence[Sample]):
    """Stack samples into (X, y) arrays for the learner."""
    if not samples:
        raise ValueError("no samples")
    x = np.stack([s.features for s in samples])
    y = np.array([s.label for s in samples], dtype=np.int64)
    return x, y
