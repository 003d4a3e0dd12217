"""mtnn: benchmark-driven selection between two C = A x B^T kernels.

The pipeline: sweep a grid of matrix sizes timing the direct NT kernel
against the transpose-then-multiply TNN kernel, label each case by
which was faster, train a small boosted-tree classifier on platform
features plus (m, n, k), then dispatch each product through the model
at runtime.
"""

from ._backend import active_backend
from .bench import (
    BenchRecord,
    Sample,
    TimingConfig,
    gflops,
    label_record,
    sweep_grid,
    time_kernel,
)
from .fcn import fcn_scenario
from .gbdt import (
    GbdtModel,
    GbdtParams,
    TreeNode,
    cross_validate,
    deserialize_model,
    fit_gbdt,
    fit_tree,
    predict,
    serialize_model,
)
from .kernels import ProblemShape, as_matrix, gemm_nn, gemm_nt, gemm_tnn, transpose_oop
from .metrics import EvalCase, MetricsReport, aggregate, gow, lub
from .platform import PlatformFeatures, probe_platform
from .selector import Dispatcher, SelectionDecision, build_features, mtnn_gemm, select

__version__ = "0.1.0"

__all__ = [
    "BenchRecord",
    "Dispatcher",
    "EvalCase",
    "GbdtModel",
    "GbdtParams",
    "MetricsReport",
    "PlatformFeatures",
    "ProblemShape",
    "Sample",
    "SelectionDecision",
    "TimingConfig",
    "TreeNode",
    "active_backend",
    "aggregate",
    "as_matrix",
    "build_features",
    "cross_validate",
    "deserialize_model",
    "fcn_scenario",
    "fit_gbdt",
    "fit_tree",
    "gemm_nn",
    "gemm_nt",
    "gemm_tnn",
    "gflops",
    "gow",
    "label_record",
    "lub",
    "mtnn_gemm",
    "predict",
    "probe_platform",
    "select",
    "serialize_model",
    "sweep_grid",
    "time_kernel",
    "transpose_oop",
]
