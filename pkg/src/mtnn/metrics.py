"""Evaluation metrics for the dispatcher: GOW, LUB, speedups, histogram.

For one case with throughputs p_nt, p_tnn and the dispatched run's
p_mtnn:

    gow = (p_mtnn - min(p_nt, p_tnn)) / min(p_nt, p_tnn)
    lub = (p_mtnn - max(p_nt, p_tnn)) / max(p_nt, p_tnn)

"Gain over worst" is how much the dispatcher beat the slower branch;
"loss under best" is how far it fell short of the faster one. When
p_mtnn is copied from the chosen branch's own measurement, gow >= 0 and
lub <= 0 hold structurally; when p_mtnn is independently re-measured
(the reporting default, dispatch overhead included) noise can push
either side slightly.

Aggregation reports the per-case means in percent, plus a histogram of
p_mtnn/p_nt in 0.1-wide buckets with a terminal ">= 2.0" bucket.
"""

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .kernels import ProblemShape
from .selector import SelectionDecision

__all__ = [
    "EvalCase",
    "MetricsReport",
    "gow",
    "lub",
    "ratio_histogram",
    "aggregate",
    "render_report",
    "report_csv_rows",
    "histogram_csv_rows",
]

HISTOGRAM_EDGES = [round(0.1 * i, 1) for i in range(21)]  # 0.0 .. 2.0
P_MTNN_MODES = ("remeasured", "copied")


@dataclass(frozen=True)
class EvalCase:
    """One evaluated case: standalone branch throughputs plus the
    dispatcher's own measured (or copied) throughput."""

    shape: ProblemShape
    p_nt: float
    p_tnn: float
    p_mtnn: float
    decision: SelectionDecision | None = None


@dataclass(frozen=True)
class MetricsReport:
    mtnn_vs_nt: float  # mean percent improvement over always-NT
    mtnn_vs_tnn: float  # mean percent improvement over always-TNN
    gow_avg: float
    gow_max: float
    lub_avg: float
    lub_min: float
    ratio_histogram: tuple  # 21 counts of p_mtnn/p_nt
    n_cases: int
    p_mtnn_mode: str  # "remeasured" or "copied"
    averaging: str = "per-case"


def _check_positive(**values):
    for name, value in values.items():
        if not (value > 0 and np.isfinite(value)):
            raise ValueError(f"{name} must be positive and finite, got {value}")


def gow(p_mtnn: float, p_nt: float, p_tnn: float) -> float:
    """Gain of the dispatched run over the worse branch."""
    _check_positive(p_mtnn=p_mtnn, p_nt=p_nt, p_tnn=p_tnn)
    worst = min(p_nt, p_tnn)
    return (p_mtnn - worst) / worst


def lub(p_mtnn: float, p_nt: float, p_tnn: float) -> float:
    """Loss of the dispatched run under the better branch (<= 0 when
    p_mtnn equals one of the branch measurements)."""
    _check_positive(p_mtnn=p_mtnn, p_nt=p_nt, p_tnn=p_tnn)
    best = max(p_nt, p_tnn)
    return (p_mtnn - best) / best


def ratio_histogram(ratios: Iterable[float]) -> tuple:
    """Counts in buckets [0, 0.1), ..., [1.9, 2.0), [2.0, inf)."""
    counts = [0] * 21
    for ratio in ratios:
        if not (ratio >= 0 and np.isfinite(ratio)):
            raise ValueError(f"ratio must be non-negative and finite, got {ratio}")
        idx = min(int(ratio / 0.1), 20)
        counts[idx] += 1
    return tuple(counts)


def aggregate(cases: Sequence[EvalCase], p_mtnn_mode: str = "remeasured") -> MetricsReport:
    """Fold evaluated cases into the summary report (percent units)."""
    if not cases:
        raise ValueError("no cases to aggregate")
    if p_mtnn_mode not in P_MTNN_MODES:
        raise ValueError(f"p_mtnn_mode must be one of {P_MTNN_MODES}")
    vs_nt = [(c.p_mtnn - c.p_nt) / c.p_nt for c in cases]
    vs_tnn = [(c.p_mtnn - c.p_tnn) / c.p_tnn for c in cases]
    gows = [gow(c.p_mtnn, c.p_nt, c.p_tnn) for c in cases]
    lubs = [lub(c.p_mtnn, c.p_nt, c.p_tnn) for c in cases]
    return MetricsReport(
        mtnn_vs_nt=100.0 * float(np.mean(vs_nt)),
        mtnn_vs_tnn=100.0 * float(np.mean(vs_tnn)),
        gow_avg=100.0 * float(np.mean(gows)),
        gow_max=100.0 * float(np.max(gows)),
        lub_avg=100.0 * float(np.mean(lubs)),
        lub_min=100.0 * float(np.min(lubs)),
        ratio_histogram=ratio_histogram([c.p_mtnn / c.p_nt for c in cases]),
        n_cases=len(cases),
        p_mtnn_mode=p_mtnn_mode,
    )


_METRIC_ROWS = (
    ("MTNN vs NT", "mtnn_vs_nt"),
    ("MTNN vs TNN", "mtnn_vs_tnn"),
    ("GOW avg", "gow_avg"),
    ("GOW max", "gow_max"),
    ("LUB avg", "lub_avg"),
    ("LUB min", "lub_min"),
)


def render_report(report: MetricsReport) -> str:
    """Human-readable table, percentages to two decimals."""
    lines = [
        f"Evaluated cases: {report.n_cases} "
        f"(p_mtnn {report.p_mtnn_mode}, {report.averaging} averaging)",
        f"{'Metric':<14}{'Percent':>10}",
    ]
    for title, attr in _METRIC_ROWS:
        lines.append(f"{title:<14}{getattr(report, attr):>10.2f}")
    return "\n".join(lines)


def report_csv_rows(report: MetricsReport) -> list:
    """(metric, value) rows, one metric per row, plus metadata rows."""
    rows = [("metric", "percent")]
    for title, attr in _METRIC_ROWS:
        rows.append((title, f"{getattr(report, attr):.2f}"))
    rows.append(("n_cases", str(report.n_cases)))
    rows.append(("p_mtnn_mode", report.p_mtnn_mode))
    rows.append(("averaging", report.averaging))
    return rows


def histogram_csv_rows(report: MetricsReport) -> list:
    """(bucket, count) rows for external plotting."""
    rows = [("bucket", "count")]
    for i, count in enumerate(report.ratio_histogram):
        label = "2.0+" if i == 20 else f"{HISTOGRAM_EDGES[i]:.1f}"
        rows.append((label, str(count)))
    return rows
