"""Re-measure grid cases under NT, TNN, and dispatched execution."""

import logging
from typing import Sequence

from . import bench
from .kernels import ProblemShape
from .metrics import EvalCase
from .selector import Choice, Dispatcher

log = logging.getLogger(__name__)


def evaluate_case(
    dispatcher: Dispatcher,
    shape: ProblemShape,
    cfg: bench.TimingConfig,
    p_mtnn_mode: str = "remeasured",
) -> EvalCase:
    """Standalone NT and TNN timings plus the dispatched timing.

    "remeasured" times the dispatcher's gemm call itself, so the
    per-call selection overhead lands inside the measurement;
    "copied" reuses the chosen branch's standalone throughput.
    """
    a, b, _ = bench.make_operands(shape, cfg.seed)
    decision = dispatcher.select(shape)
    fns = {
        "nt": lambda: bench.kernels.gemm_nt(a, b, threads=cfg.threads),
        "tnn": lambda: bench.kernels.gemm_tnn(
            a, b, block=cfg.block, tile=cfg.tile, threads=cfg.threads
        ),
    }
    if p_mtnn_mode == "remeasured":
        fns["mtnn"] = lambda: dispatcher.gemm(a, b)
    timings = bench.time_callables_interleaved(fns, cfg.reps, cfg.warmup)
    p_nt = bench.gflops(shape, timings["nt"])
    p_tnn = bench.gflops(shape, timings["tnn"])
    if p_mtnn_mode == "copied":
        p_mtnn = p_nt if decision.choice is Choice.USE_NT else p_tnn
    else:
        p_mtnn = bench.gflops(shape, timings["mtnn"])
    return EvalCase(
        shape=shape, p_nt=p_nt, p_tnn=p_tnn, p_mtnn=p_mtnn, decision=decision
    )


def evaluate_cases(
    dispatcher: Dispatcher,
    shapes: Sequence[ProblemShape],
    cfg: bench.TimingConfig | None = None,
    p_mtnn_mode: str = "remeasured",
    injected: dict | None = None,
) -> list[EvalCase]:
    """Evaluate many cases; infeasible ones are logged and skipped.

    With ``injected`` timings the dispatcher still makes its decision,
    but throughputs come from the file (p_mtnn is the chosen branch's
    injected value, i.e. copied mode).
    """
    cfg = cfg or bench.TimingConfig()
    cases = []
    for shape in shapes:
        if injected is not None:
            key = tuple(shape)
            if key not in injected:
                raise KeyError(f"injected timings missing case {key}")
            _, t_nt, t_tnn = injected[key]
            p_nt = bench.gflops(shape, t_nt)
            p_tnn = bench.gflops(shape, t_tnn)
            decision = dispatcher.select(shape)
            p_mtnn = p_nt if decision.choice is Choice.USE_NT else p_tnn
            cases.append(
                EvalCase(
                    shape=shape, p_nt=p_nt, p_tnn=p_tnn, p_mtnn=p_mtnn, decision=decision
                )
            )
            continue
        if not bench.shape_is_feasible(shape, cfg.mem_fraction):
            log.info("skipping infeasible case %s", tuple(shape))
            continue
        cases.append(evaluate_case(dispatcher, shape, cfg, p_mtnn_mode))
    return cases
