"""Command-line surface: sweep, train, cv, eval, predict, demo-fcn."""

import argparse
import csv
import logging
import sys

import numpy as np

from . import bench, evaluate, fcn, gbdt, kernels, metrics
from .kernels import ProblemShape
from .platform import probe_platform
from .selector import Choice, Dispatcher

log = logging.getLogger(__name__)


def positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def fraction(text):
    value = float(text)
    if not 0.0 <= value < 1.0:
        raise argparse.ArgumentTypeError(f"must be in [0, 1), got {text}")
    return value


def parse_override(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    key, _, raw = text.partition("=")
    try:
        return key.strip(), float(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"override value must be numeric: {text!r}")


def add_common(parser):
    parser.add_argument("--seed", type=int, default=0, help="master RNG seed")
    parser.add_argument("--threads", type=positive_int, default=1,
                        help="kernel-internal threads (1 = serial)")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="log per-case progress")


def add_timing(parser):
    parser.add_argument("--reps", type=positive_int, default=5,
                        help="timed repetitions per measurement")
    parser.add_argument("--warmup", type=int, default=2,
                        help="discarded warmup runs per measurement")
    parser.add_argument("--block", type=positive_int, default=kernels.DEFAULT_BLOCK,
                        help="GEMM macro-tile size")
    parser.add_argument("--tile", type=positive_int, default=kernels.DEFAULT_TILE,
                        help="transpose tile size")


def add_platform(parser):
    parser.add_argument("--platform-override", action="append", default=[],
                        metavar="KEY=VALUE", type=parse_override,
                        help="override a platform feature (gm, sm, cc, mbw, l2c)")


def add_grid(parser):
    parser.add_argument("--exp-min", type=int, default=5,
                        help="smallest size exponent (sizes are 2^i)")
    parser.add_argument("--exp-max", type=int, default=10,
                        help="largest size exponent, inclusive")


def add_params(parser):
    parser.add_argument("--max-depth", type=positive_int, default=8)
    parser.add_argument("--n-estimators", type=positive_int, default=8)
    parser.add_argument("--eta", type=float, default=1.0)
    parser.add_argument("--gamma", type=float, default=0.0)
    parser.add_argument("--reg-lambda", type=float, default=1.0, dest="reg_lambda",
                        metavar="LAMBDA", help="L2 regularization on leaf weights")
    parser.add_argument("--min-child-weight", type=float, default=1.0)
    parser.add_argument("--objective", choices=("logistic", "squared"),
                        default="logistic",
                        help="'squared' with --n-estimators 1 is the plain-CART baseline")


def params_from_args(args):
    return gbdt.GbdtParams(
        max_depth=args.max_depth,
        n_estimators=args.n_estimators,
        eta=args.eta,
        gamma=args.gamma,
        lam=args.reg_lambda,
        min_child_weight=args.min_child_weight,
        objective=args.objective,
    )


def timing_from_args(args):
    return bench.TimingConfig(
        reps=args.reps,
        warmup=args.warmup,
        seed=args.seed,
        block=args.block,
        tile=args.tile,
        threads=args.threads,
    )


def split_holdout(shapes, frac, seed):
    """Deterministic split of grid shapes into (train, held-out)."""
    if frac == 0.0:
        return list(shapes), []
    order = np.random.default_rng(seed).permutation(len(shapes))
    n_held = max(1, int(round(frac * len(shapes))))
    held = {tuple(shapes[i]) for i in order[:n_held]}
    train = [s for s in shapes if tuple(s) not in held]
    return train, [s for s in shapes if tuple(s) in held]


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_sweep(args):
    platform = probe_platform(dict(args.platform_override))
    cfg = timing_from_args(args)
    injected = bench.read_timings_csv(args.inject) if args.inject else None
    records = bench.sweep_grid(
        range(args.exp_min, args.exp_max + 1), platform, cfg, injected=injected
    )
    if not records:
        raise RuntimeError("sweep produced no feasible cases")
    samples = bench.label_records(records, platform)
    bench.write_records_csv(args.records, records)
    bench.write_samples_csv(args.samples, samples)
    n_neg = sum(1 for s in samples if s.label == -1)
    n_pos = len(samples) - n_neg
    print(f"wrote {args.records} and {args.samples}")
    print(f"# of -1 (TNN faster): {n_neg}")
    print(f"# of  1 (NT faster):  {n_pos}")
    print(f"# of samples:         {len(samples)}")
    return 0


def cmd_train(args):
    samples = bench.read_samples_csv(args.samples)
    if args.holdout_frac > 0.0:
        shapes = sorted({tuple(int(v) for v in s.features[5:8]) for s in samples})
        shapes = [ProblemShape(*t) for t in shapes]
        _, held = split_holdout(shapes, args.holdout_frac, args.seed)
        held_keys = {tuple(s) for s in held}
        samples = [
            s for s in samples
            if tuple(int(v) for v in s.features[5:8]) not in held_keys
        ]
        if not samples:
            raise RuntimeError("holdout left no training samples")
    x, y = bench.samples_to_arrays(samples)
    model = gbdt.fit_gbdt(x, y, params_from_args(args))
    gbdt.save_model(model, args.model)
    acc = gbdt.accuracy(model, x, y)
    print(f"trained on {len(samples)} samples, wrote {args.model}")
    print(f"training accuracy: {acc * 100:.2f}%")
    return 0


def cmd_cv(args):
    samples = bench.read_samples_csv(args.samples)
    x, y = bench.samples_to_arrays(samples)
    report = gbdt.cross_validate(
        x, y, folds=args.folds, params=params_from_args(args), seed=args.seed
    )
    print(f"{'Class':<10}{'Minimum':>10}{'Maximum':>10}{'Average':>10}")
    for name, row in (
        ("Negative", report.negative),
        ("Positive", report.positive),
        ("Total", report.total),
    ):
        cells = "".join(f"{v * 100:>9.2f}%" for v in row)
        print(f"{name:<10}{cells}")
    return 0


def cmd_eval(args):
    model = gbdt.load_model(args.model)
    platform = probe_platform(dict(args.platform_override))
    cfg = timing_from_args(args)
    dispatcher = Dispatcher(
        model, platform, block=args.block, tile=args.tile, threads=args.threads
    )
    shapes = bench.grid_shapes(range(args.exp_min, args.exp_max + 1))
    if args.holdout_frac > 0.0:
        _, shapes = split_holdout(shapes, args.holdout_frac, args.seed)
    injected = bench.read_timings_csv(args.inject) if args.inject else None
    mode = "copied" if (args.copied or injected is not None) else "remeasured"
    cases = evaluate.evaluate_cases(
        dispatcher, shapes, cfg, p_mtnn_mode=mode, injected=injected
    )
    if not cases:
        raise RuntimeError("no feasible evaluation cases")
    report = metrics.aggregate(cases, p_mtnn_mode=mode)
    print(metrics.render_report(report))
    with open(args.out, "w", newline="") as fh:
        csv.writer(fh).writerows(metrics.report_csv_rows(report))
    with open(args.hist_out, "w", newline="") as fh:
        csv.writer(fh).writerows(metrics.histogram_csv_rows(report))
    print(f"wrote {args.out} and {args.hist_out}")
    return 0


def cmd_predict(args):
    model = gbdt.load_model(args.model)
    platform = probe_platform(dict(args.platform_override))
    dispatcher = Dispatcher(model, platform)
    shape = ProblemShape(args.m, args.n, args.k)
    decision = dispatcher.select(shape)
    name = "NT" if decision.choice is Choice.USE_NT else "TNN"
    print(f"{name} raw={decision.raw_score:.6f} reason={decision.reason.value}")
    return 0


def cmd_demo_fcn(args):
    input_dim, output_dim, hidden = fcn.preset_widths(args.preset, args.hidden_layers)
    input_dim, output_dim = fcn.scaled_widths((input_dim, output_dim), args.scale_divisor)
    hidden = fcn.scaled_widths(hidden, args.scale_divisor)
    # default mini-batches are desk-scaled like the widths: the small
    # preset pairs with small batches, the large one with larger ones
    batches = args.batch or fcn.DEFAULT_BATCHES[args.preset]
    dispatchers = {"always-NT": "nt", "always-TNN": "tnn"}
    if args.model:
        model = gbdt.load_model(args.model)
        platform = probe_platform(dict(args.platform_override))
        dispatchers["MTNN"] = Dispatcher(
            model, platform, block=args.block, tile=args.tile, threads=args.threads
        )
    print(
        f"preset {args.preset}, hidden {list(hidden)}, input {input_dim}, "
        f"output {output_dim}, batches {batches}, scale divisor {args.scale_divisor}"
    )
    totals = fcn.compare_dispatchers(
        dispatchers, hidden, batches, input_dim, output_dim,
        iters=args.iters, seed=args.seed, block=args.block,
        tile=args.tile, threads=args.threads,
    )
    names = list(dispatchers)
    print(f"{'Phase':<10}" + "".join(f"{t:>14}" for t in names)
          + (f"{'NT/MTNN':>10}" if args.model else ""))
    for phase, idx in (("Forward", 0), ("Backward", 1), ("Total", None)):
        row = f"{phase:<10}"
        values = []
        for title in names:
            fwd, bwd = totals[title]
            value = fwd + bwd if idx is None else (fwd, bwd)[idx]
            values.append(value)
            row += f"{value * 1e3:>12.2f}ms"
        if args.model:
            row += f"{values[0] / values[-1]:>10.2f}"
        print(row)
    return 0


# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mtnn",
        description="Benchmark, train and dispatch the NT-vs-TNN selection pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="measure the size grid and write records/samples")
    add_grid(p)
    add_timing(p)
    add_platform(p)
    add_common(p)
    p.add_argument("--records", default="records.csv", help="records CSV output path")
    p.add_argument("--samples", default="samples.csv", help="samples CSV output path")
    p.add_argument("--inject", default=None, metavar="TIMINGS_CSV",
                   help="read timings from a file instead of measuring")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("train", help="fit the model on a samples CSV")
    p.add_argument("--samples", default="samples.csv")
    p.add_argument("--model", default="model.json", help="model JSON output path")
    p.add_argument("--holdout-frac", type=fraction, default=0.0,
                   help="exclude this seeded fraction of grid cases from training")
    add_params(p)
    add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("cv", help="stratified k-fold cross-validation")
    p.add_argument("--samples", default="samples.csv")
    p.add_argument("--folds", type=positive_int, default=5)
    add_params(p)
    add_common(p)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("eval", help="re-run the grid under NT, TNN and the dispatcher")
    p.add_argument("--model", default="model.json")
    add_grid(p)
    p.add_argument("--holdout-frac", type=fraction, default=0.0,
                   help="evaluate only this seeded fraction of grid cases")
    p.add_argument("--out", default="report.csv", help="metrics CSV output path")
    p.add_argument("--hist-out", default="histogram.csv",
                   help="ratio histogram CSV output path")
    p.add_argument("--inject", default=None, metavar="TIMINGS_CSV",
                   help="read timings from a file instead of measuring")
    p.add_argument("--copied", action="store_true",
                   help="copy p_mtnn from the chosen branch instead of re-measuring")
    add_timing(p)
    add_platform(p)
    add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="print the selected algorithm for one case")
    p.add_argument("--model", default="model.json")
    add_platform(p)
    add_common(p)
    p.add_argument("m", type=positive_int)
    p.add_argument("n", type=positive_int)
    p.add_argument("k", type=positive_int)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("demo-fcn", help="time one FCN training iteration per dispatcher")
    p.add_argument("--preset", choices=sorted(fcn.PRESETS), default="mnist-like")
    p.add_argument("--hidden-layers", type=int, choices=(2, 3, 4), default=2)
    p.add_argument("--batch", type=positive_int, action="append", default=None,
                   help="mini-batch size (repeatable; default 64 and 256)")
    p.add_argument("--scale-divisor", type=positive_int, default=8,
                   help="shrink all layer widths by this factor")
    p.add_argument("--model", default=None,
                   help="model JSON; adds the MTNN dispatcher column")
    p.add_argument("--iters", type=positive_int, default=2)
    add_timing(p)
    add_platform(p)
    add_common(p)
    p.set_defaults(func=cmd_demo_fcn)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
