"""Command-line front end for the train / prune / bound / encode / solve pipeline.

Exit codes: 0 success, 2 invalid arguments, 3 input validation failure,
4 solver time limit reached, 5 internal error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import report
from .bounds import propagate_ia, width_summary
from .data import Dataset, load_csv, make_peaks_dataset, mape, save_csv, split_dataset
from .errors import PruneMipError
from .experiment import parse_experiment_spec, run_experiment
from .milp import encode_bigm, export_lp, export_mps, parse_constraint_spec, parse_objective
from .network import AffineScaling, MaskedNetwork, load_network, save_network
from .prune import PruneConfig, iterative_prune
from .solve import TIME_LIMIT, SolveLimits, branch_and_bound
from .train import TrainConfig, initialize_network, train_to_convergence

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_TIME_LIMIT = 4
EXIT_INTERNAL = 5


class ArgumentValueError(Exception):
    """Invalid flag value detected after parsing (exit code 2)."""


def _positive_int(value: str) -> int:
    n = int(value)
    if n <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return n


def _parse_arch(text: str) -> list[int]:
    try:
        sizes = [int(p) for p in text.replace("x", "-").split("-") if p]
    except ValueError:
        raise ArgumentValueError(f"bad architecture '{text}', expected e.g. 2-16-16-1")
    if len(sizes) < 2:
        raise ArgumentValueError("architecture needs at least input and output sizes")
    return sizes


def _parse_box(values: list[float], dim: int) -> np.ndarray:
    if len(values) == 2:
        return np.array([[values[0], values[1]]] * dim)
    if len(values) == 2 * dim:
        return np.array(values).reshape(dim, 2)
    raise ArgumentValueError(
        f"--box needs 2 values (applied to all {dim} dims) or {2 * dim} values")


def _split_cols(text: str | None) -> list[str] | None:
    if text is None:
        return None
    return [c.strip() for c in text.split(",") if c.strip()]


def _load_dataset(args, need_target=True) -> Dataset:
    input_cols = _split_cols(getattr(args, "input_cols", None))
    target_cols = _split_cols(getattr(args, "target_cols", None))
    if input_cols is None or target_cols is None:
        import csv as _csv
        with open(args.data, newline="", encoding="utf-8") as fh:
            header = next(_csv.reader(fh))
        header = [h.strip() for h in header]
        if input_cols is None and target_cols is None:
            input_cols, target_cols = header[:-1], header[-1:]
        elif input_cols is None:
            input_cols = [h for h in header if h not in target_cols]
        else:
            target_cols = [h for h in header if h not in input_cols]
    return load_csv(args.data, input_cols, target_cols)


def _training_config(args, seed=None) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs, learning_rate=args.learning_rate,
        batch_size=args.batch_size, l2_lambda=args.l2,
        early_stop_tolerance=args.tolerance, patience=args.patience,
        seed=args.seed if seed is None else seed)


def _add_training_flags(parser, epochs_default=300):
    parser.add_argument("--epochs", type=int, default=epochs_default)
    parser.add_argument("--learning-rate", type=float, default=1e-3)
    parser.add_argument("--batch-size", type=_positive_int, default=256)
    parser.add_argument("--l2", type=float, default=5e-7)
    parser.add_argument("--tolerance", type=float, default=0.001,
                        help="early-stopping MAPE tolerance (percentage points)")
    parser.add_argument("--patience", type=_positive_int, default=15)
    parser.add_argument("--val-frac", type=float, default=0.2)
    parser.add_argument("--seed", type=int, default=0)


def _problem_from_args(args):
    objective = parse_objective(args.objective) if args.objective else None
    extras = []
    if getattr(args, "spec", None):
        with open(args.spec, "r", encoding="utf-8") as fh:
            file_obj, extras = parse_constraint_spec(fh.read())
        if file_obj is not None:
            objective = file_obj
    if objective is None:
        raise ArgumentValueError("provide --objective or a --spec file with one")
    return objective, extras


def cmd_gen_data(args) -> int:
    if args.function != "peaks":
        raise ArgumentValueError(f"unknown function '{args.function}'")
    if args.n <= 0 or args.test_n < 0:
        raise ArgumentValueError("--n must be positive and --test-n non-negative")
    box = _parse_box(args.box, 2)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train = make_peaks_dataset(args.n, args.seed, box)
    save_csv(train, out_dir / f"{args.prefix}_train.csv")
    print(f"wrote {out_dir / (args.prefix + '_train.csv')} ({train.n} rows)")
    if args.test_n:
        test_seed = args.test_seed if args.test_seed is not None else args.seed + 1_000_003
        test = make_peaks_dataset(args.test_n, test_seed, box)
        save_csv(test, out_dir / f"{args.prefix}_test.csv")
        print(f"wrote {out_dir / (args.prefix + '_test.csv')} ({test.n} rows)")
    return EXIT_OK


def cmd_train(args) -> int:
    ds = _load_dataset(args)
    sizes = _parse_arch(args.arch)
    if sizes[0] != ds.input_dim or sizes[-1] != ds.target_dim:
        raise ArgumentValueError(
            f"architecture {sizes} does not match data dims "
            f"({ds.input_dim} inputs, {ds.target_dim} targets)")
    input_scaling = target_scaling = None
    if args.scale:
        input_scaling = AffineScaling(ds.box[:, 0], ds.box[:, 1])
        t_lo, t_hi = ds.targets.min(axis=0), ds.targets.max(axis=0)
        t_hi = np.where(t_hi > t_lo, t_hi, t_lo + 1.0)
        target_scaling = AffineScaling(t_lo, t_hi)
        ds = Dataset(input_scaling.encode(ds.inputs), target_scaling.encode(ds.targets),
                     np.array([[0.0, 1.0]] * ds.input_dim))
    train_ds, val_ds = split_dataset(ds, 1.0 - args.val_frac, args.seed)
    net = initialize_network(sizes, args.seed)
    net, history = train_to_convergence(net, train_ds, val_ds, _training_config(args))
    if input_scaling is not None:
        net = MaskedNetwork(net.layers, net.input_dim, net.output_dim,
                            input_scaling=input_scaling, target_scaling=target_scaling)
    save_network(net, args.out)
    if args.history:
        report.write_csv(args.history, ["epoch", "train_loss", "val_mape"],
                         [[h.epoch, repr(h.train_loss), repr(h.val_mape)] for h in history])
    final = history[-1].val_mape if history else float("nan")
    print(f"trained {args.arch}: {len(history)} epochs, val MAPE {final:.4f}% -> {args.out}")
    return EXIT_OK


def cmd_prune(args) -> int:
    net = load_network(args.net)
    ds = _load_dataset(args)
    train_ds, val_ds = split_dataset(ds, 1.0 - args.val_frac, args.seed)
    cfg = PruneConfig(method=args.method, final_sparsity=args.sparsity,
                      relative_rate=args.rate, fine_tune=args.fine_tune,
                      clean_per_iteration=args.clean_per_iteration)
    net, metrics = iterative_prune(net, train_ds, val_ds, cfg, _training_config(args))
    save_network(net, args.out)
    if args.metrics:
        report.write_csv(
            args.metrics, ["iteration", "sparsity", "val_mape", "dead_neurons_cleaned"],
            [[m.iteration, repr(m.sparsity), repr(m.val_mape), m.dead_neurons_cleaned]
             for m in metrics])
    last = metrics[-1]
    print(f"pruned ({args.method}) to sparsity {last.sparsity:.4f}, "
          f"val MAPE {last.val_mape:.4f}% -> {args.out}")
    return EXIT_OK


def cmd_bounds(args) -> int:
    net = load_network(args.net)
    box = _parse_box(args.box, net.input_dim)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = propagate_ia(net, box)
    summary = width_summary(table)
    report.write_bounds_report(table, out_dir / "bounds.csv")
    report.write_width_summary(summary, out_dir / "bounds_summary.csv")
    report.figure_layer_widths({Path(args.net).stem: summary},
                               out_dir / "bounds_by_layer.png")
    print(f"bounds over {len(summary.per_layer)} layers: mean width {summary.mean:.6g}, "
          f"median {summary.median:.6g}, max {summary.max:.6g} -> {out_dir}")
    return EXIT_OK


def cmd_encode(args) -> int:
    net = load_network(args.net)
    box = _parse_box(args.box, net.input_dim)
    objective, extras = _problem_from_args(args)
    table = propagate_ia(net, box)
    model, stats = encode_bigm(net, table, box, objective, extras)
    if args.mps:
        export_mps(model, args.mps)
        print(f"wrote {args.mps}")
    if args.lp:
        export_lp(model, args.lp)
        print(f"wrote {args.lp}")
    if args.presolve_stats:
        report.write_csv(
            args.presolve_stats,
            ["vars_before", "vars_after", "cons_before", "cons_after",
             "ints_before", "ints_after", "stably_off", "stably_on"],
            [[stats.vars_before, stats.vars_after, stats.cons_before, stats.cons_after,
              stats.ints_before, stats.ints_after, stats.stably_off_count,
              stats.stably_on_count]])
    print(f"model: {model.num_variables} vars ({model.num_binaries} binary), "
          f"{model.num_constraints} constraints; presolve fixed "
          f"{stats.stably_off_count} off / {stats.stably_on_count} on neurons")
    return EXIT_OK


def cmd_solve(args) -> int:
    net = load_network(args.net)
    box = _parse_box(args.box, net.input_dim)
    objective, extras = _problem_from_args(args)
    table = propagate_ia(net, box)
    model, _ = encode_bigm(net, table, box, objective, extras)
    limits = SolveLimits(time_limit=args.time_limit, gap=args.gap)
    log_stream = open(args.log, "w", encoding="utf-8") if args.log else None
    try:
        solution, stats = branch_and_bound(model, limits, log_stream=log_stream)
    finally:
        if log_stream:
            log_stream.close()
    print(f"status: {stats.status}")
    print(f"bb_nodes: {stats.bb_nodes}  simplex_iterations: {stats.simplex_iterations}  "
          f"root_gap: {stats.root_gap}  wall_time: {stats.wall_time:.3f}s")
    if solution.objective is not None:
        print(f"objective: {solution.objective:.10g}")
        names = [f"x{i}" for i in range(len(solution.inputs))]
        print("inputs: " + "  ".join(f"{n}={v:.10g}" for n, v in zip(names, solution.inputs)))
        names = [f"y{i}" for i in range(len(solution.outputs))]
        print("outputs: " + "  ".join(f"{n}={v:.10g}" for n, v in zip(names, solution.outputs)))
    if args.stats:
        report.write_csv(
            args.stats,
            ["status", "objective", "bb_nodes", "simplex_iterations", "root_gap",
             "wall_time"],
            [[stats.status,
              repr(solution.objective) if solution.objective is not None else "",
              stats.bb_nodes, stats.simplex_iterations,
              repr(stats.root_gap) if stats.root_gap is not None else "",
              repr(stats.wall_time)]])
    if args.solution and solution.values is not None:
        report.write_csv(args.solution, ["variable", "value"],
                         [[v.name, repr(float(val))]
                          for v, val in zip(model.variables, solution.values)])
    return EXIT_TIME_LIMIT if stats.status == TIME_LIMIT else EXIT_OK


def cmd_experiment(args) -> int:
    spec = parse_experiment_spec(args.spec_file)
    cells = run_experiment(spec, args.out_dir)
    errors = [c for c in cells if c["status"] != "ok"]
    print(f"experiment finished: {len(cells)} cells, {len(errors)} errors -> {args.out_dir}")
    for cell in errors:
        print(f"  error in seed={cell['seed']} {cell['method']}@{cell['sparsity']}"
              f" [{cell['mode']}]: {cell['message']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prunemip",
        description="Train, prune, bound, encode, and globally optimize ReLU surrogates.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="sample a test function into CSV files")
    p.add_argument("--function", default="peaks")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--test-n", type=int, default=0)
    p.add_argument("--box", type=float, nargs="+", default=[-3.0, 3.0])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-seed", type=int, default=None)
    p.add_argument("--prefix", default="peaks")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a masked ReLU network on a CSV dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--input-cols")
    p.add_argument("--target-cols")
    p.add_argument("--arch", required=True, help="e.g. 2-16-16-1")
    p.add_argument("--scale", action="store_true",
                   help="min-max scale inputs/targets to [0,1]; scaling is stored "
                        "in the network file")
    p.add_argument("--out", required=True)
    p.add_argument("--history")
    _add_training_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("prune", help="iterative magnitude pruning with retraining")
    p.add_argument("--net", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--input-cols")
    p.add_argument("--target-cols")
    p.add_argument("--method", choices=("weight", "node"), default="weight")
    p.add_argument("--sparsity", type=float, required=True)
    p.add_argument("--rate", type=float, default=0.25)
    p.add_argument("--fine-tune", action="store_true")
    p.add_argument("--clean-per-iteration", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--metrics")
    _add_training_flags(p, epochs_default=150)
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("bounds", help="interval-arithmetic bound report")
    p.add_argument("--net", required=True)
    p.add_argument("--box", type=float, nargs="+", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("encode", help="write the big-M MILP as MPS/LP files")
    p.add_argument("--net", required=True)
    p.add_argument("--box", type=float, nargs="+", required=True)
    p.add_argument("--objective", help="e.g. 'min y0'")
    p.add_argument("--spec", help="constraint spec file (see README)")
    p.add_argument("--mps")
    p.add_argument("--lp")
    p.add_argument("--presolve-stats")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("solve", help="solve the encoded MILP to global optimality")
    p.add_argument("--net", required=True)
    p.add_argument("--box", type=float, nargs="+", required=True)
    p.add_argument("--objective", help="e.g. 'min y0'")
    p.add_argument("--spec", help="constraint spec file (see README)")
    p.add_argument("--time-limit", type=float, default=300.0)
    p.add_argument("--gap", type=float, default=1e-6)
    p.add_argument("--log")
    p.add_argument("--stats")
    p.add_argument("--solution")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("experiment", help="run a seeds x sparsities x methods grid")
    p.add_argument("spec_file")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except ArgumentValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PruneMipError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
