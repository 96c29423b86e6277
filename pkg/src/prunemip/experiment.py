"""Experiment harness: seeds x sparsities x methods grid over the full pipeline.

Each cell trains (or reuses) a network, prunes it, propagates bounds,
encodes the MILP, and solves it, recording accuracy, width, presolve, and
solver statistics. Pure-prune cells apply masks to the trained baseline
without retraining, which is the regime where monotone bound tightening is
guaranteed. Results land in one row per cell plus per-topic CSVs and
figures.
"""

from __future__ import annotations

import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import report
from .bounds import propagate_ia, width_summary
from .data import Dataset, load_csv, make_peaks_dataset, mape, split_dataset
from .errors import InvalidInputError, ParseError
from .milp import ObjectiveSpec, encode_bigm, parse_constraint_spec, parse_objective
from .network import MaskedNetwork, save_network
from .prune import (PruneConfig, clean_dead_neurons, iterative_prune,
                    prune_to_sparsity)
from .solve import SolveLimits, branch_and_bound, root_gap
from .train import TrainConfig, initialize_network, train_to_convergence

TEST_SEED_OFFSET = 1_000_003
WORKERS_ENV = "PRUNEMIP_WORKERS"

CELL_FIELDS = [
    "seed", "method", "sparsity", "mode", "status", "message",
    "val_mape", "test_mape", "train_time",
    "mean_width", "median_width", "max_width",
    "vars_before", "vars_after", "cons_before", "cons_after",
    "ints_before", "ints_after", "vars_reduction", "cons_reduction", "ints_reduction",
    "solve_status", "objective", "bb_nodes", "simplex_iterations",
    "simplex_per_sec", "root_gap", "solve_time",
]


@dataclass
class ExperimentSpec:
    architecture: list[int]
    dataset: str = "peaks"
    input_cols: list[str] | None = None
    target_cols: list[str] | None = None
    box: list[list[float]] | None = None  # None: peaks default / data min-max
    train_n: int = 5000
    test_n: int = 500
    val_frac: float = 0.2
    methods: list[str] = field(default_factory=lambda: ["weight"])
    sparsities: list[float] = field(default_factory=lambda: [0.8, 0.9])
    seeds: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5])
    relative_rate: float = 0.25
    epochs: int = 300
    learning_rate: float = 1e-3
    batch_size: int = 256
    l2_lambda: float = 5e-7
    early_stop_tolerance: float = 0.001
    patience: int = 15
    fine_tune: bool = True
    pure_prune: bool = True
    solve_pure: bool = False
    time_limit: float = 300.0
    gap: float = 1e-6
    objective: str = "min y0"
    constraints: str = ""  # path to a constraint spec file, optional

    def __post_init__(self):
        if not self.seeds:
            raise InvalidInputError("seeds must be non-empty")
        for s in self.sparsities:
            if not 0.0 < s < 1.0:
                raise InvalidInputError("sparsity grid values must lie in (0, 1)")
        for m in self.methods:
            if m not in ("weight", "node"):
                raise InvalidInputError(f"unknown pruning method '{m}'")

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs, learning_rate=self.learning_rate,
            batch_size=self.batch_size, l2_lambda=self.l2_lambda,
            early_stop_tolerance=self.early_stop_tolerance,
            patience=self.patience, seed=seed)


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    if key == "architecture":
        return [int(p) for p in raw.replace("-", " ").split()]
    if key in ("input_cols", "target_cols"):
        return [p.strip() for p in raw.split(",") if p.strip()] or None
    if key == "box":
        vals = [float(p) for p in raw.split()]
        if len(vals) % 2:
            raise ParseError("box needs an even number of values (lo hi pairs)")
        return [vals[i:i + 2] for i in range(0, len(vals), 2)]
    if key == "methods":
        return raw.split()
    if key == "sparsities":
        return [float(p) for p in raw.split()]
    if key == "seeds":
        return [int(p) for p in raw.split()]
    if key in ("train_n", "test_n", "epochs", "batch_size", "patience"):
        return int(raw)
    if key in ("val_frac", "relative_rate", "learning_rate", "l2_lambda",
               "early_stop_tolerance", "time_limit", "gap"):
        return float(raw)
    if key in ("fine_tune", "pure_prune", "solve_pure"):
        return raw.lower() in ("1", "true", "yes", "on")
    if key in ("dataset", "objective", "constraints"):
        return raw
    raise ParseError(f"unknown experiment spec key '{key}'")


def parse_experiment_spec(path) -> ExperimentSpec:
    """Read a key=value experiment spec file ('#' comments allowed)."""
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"{path}:{line_no}: expected key = value")
            key, _, value = line.partition("=")
            values[key.strip()] = _parse_value(key.strip(), value)
    if "architecture" not in values:
        raise ParseError(f"{path}: 'architecture' is required")
    return ExperimentSpec(**values)


def _empty_cell(seed, method, sparsity, mode) -> dict:
    cell = {k: None for k in CELL_FIELDS}
    cell.update(seed=seed, method=method, sparsity=sparsity, mode=mode, status="ok",
                message="")
    return cell


def _load_problem(spec: ExperimentSpec, seed: int):
    if spec.dataset == "peaks":
        box = np.asarray(spec.box if spec.box else [[-3.0, 3.0], [-3.0, 3.0]])
        full = make_peaks_dataset(spec.train_n, seed, box)
        test = make_peaks_dataset(spec.test_n, seed + TEST_SEED_OFFSET, box)
    else:
        if not spec.input_cols or not spec.target_cols:
            raise InvalidInputError("csv datasets need input_cols and target_cols")
        box = np.asarray(spec.box) if spec.box else None
        full = load_csv(spec.dataset, spec.input_cols, spec.target_cols, box=box)
        full, test = split_dataset(full, 0.9, seed + TEST_SEED_OFFSET)
    train, val = split_dataset(full, 1.0 - spec.val_frac, seed)
    return train, val, test


def _problem_spec(spec: ExperimentSpec) -> tuple[ObjectiveSpec, list]:
    extras = []
    objective = parse_objective(spec.objective)
    if spec.constraints:
        with open(spec.constraints, "r", encoding="utf-8") as fh:
            file_obj, extras = parse_constraint_spec(fh.read())
        if file_obj is not None:
            objective = file_obj
    return objective, extras


def _measure(cell: dict, net: MaskedNetwork, test: Dataset, box,
             objective, extras, limits: SolveLimits, do_solve: bool,
             cell_dir: Path) -> None:
    """Bounds, presolve, and (optionally) solve metrics for one network."""
    cell_dir.mkdir(parents=True, exist_ok=True)
    save_network(net, cell_dir / "net.json")
    cell["test_mape"] = mape(test.targets, net.forward(test.inputs))
    table = propagate_ia(net, box)
    summary = width_summary(table)
    cell["mean_width"] = summary.mean
    cell["median_width"] = summary.median
    cell["max_width"] = summary.max
    report.write_width_summary(summary, cell_dir / "width_summary.csv")
    model, stats = encode_bigm(net, table, box, objective, extras)
    cell.update(
        vars_before=stats.vars_before, vars_after=stats.vars_after,
        cons_before=stats.cons_before, cons_after=stats.cons_after,
        ints_before=stats.ints_before, ints_after=stats.ints_after,
        vars_reduction=100.0 * (1 - stats.vars_after / max(stats.vars_before, 1)),
        cons_reduction=100.0 * (1 - stats.cons_after / max(stats.cons_before, 1)),
        ints_reduction=100.0 * (1 - stats.ints_after / max(stats.ints_before, 1)),
    )
    if not do_solve:
        return
    t0 = time.perf_counter()
    solution, solve_stats = branch_and_bound(model, limits)
    cell["solve_time"] = time.perf_counter() - t0
    cell["solve_status"] = solve_stats.status
    cell["objective"] = solution.objective
    cell["bb_nodes"] = solve_stats.bb_nodes
    cell["simplex_iterations"] = solve_stats.simplex_iterations
    cell["simplex_per_sec"] = (solve_stats.simplex_iterations / cell["solve_time"]
                               if cell["solve_time"] > 0 else None)
    cell["root_gap"] = solve_stats.root_gap


def run_seed(spec: ExperimentSpec, seed: int, out_dir: str) -> list[dict]:
    """All cells for one seed: baseline, full-pipeline, and pure-prune runs."""
    out_root = Path(out_dir)
    rows: list[dict] = []
    objective, extras = _problem_spec(spec)
    limits = SolveLimits(time_limit=spec.time_limit, gap=spec.gap)

    train, val, test = _load_problem(spec, seed)
    box = train.box

    cell = _empty_cell(seed, "none", 0.0, "baseline")
    try:
        t0 = time.perf_counter()
        baseline = initialize_network(spec.architecture, seed)
        baseline, _ = train_to_convergence(baseline, train, val, spec.train_config(seed))
        cell["train_time"] = time.perf_counter() - t0
        cell["val_mape"] = mape(val.targets, baseline.forward(val.inputs))
        _measure(cell, baseline, test, box, objective, extras, limits, True,
                 out_root / "cells" / f"seed{seed}_baseline")
    except Exception as exc:  # noqa: BLE001 - harness records and continues
        cell["status"] = "error"
        cell["message"] = f"{type(exc).__name__}: {exc}"
        rows.append(cell)
        return rows
    rows.append(cell)

    for method in spec.methods:
        for sparsity in sorted(spec.sparsities):
            cell = _empty_cell(seed, method, sparsity, "full")
            try:
                cfg = PruneConfig(method=method, final_sparsity=sparsity,
                                  relative_rate=spec.relative_rate,
                                  fine_tune=spec.fine_tune)
                t0 = time.perf_counter()
                pruned, metrics = iterative_prune(
                    baseline.copy(), train, val, cfg, spec.train_config(seed))
                cell["train_time"] = time.perf_counter() - t0
                cell["val_mape"] = metrics[-1].val_mape
                _measure(cell, pruned, test, box, objective, extras, limits, True,
                         out_root / "cells" / f"seed{seed}_{method}{sparsity:g}")
            except Exception as exc:  # noqa: BLE001
                cell["status"] = "error"
                cell["message"] = f"{type(exc).__name__}: {exc}"
            rows.append(cell)

        if not spec.pure_prune:
            continue
        chained = baseline.copy()
        for sparsity in sorted(spec.sparsities):
            cell = _empty_cell(seed, method, sparsity, "pure")
            try:
                chained = prune_to_sparsity(chained, method, sparsity)
                measured, _ = clean_dead_neurons(chained)
                cell["val_mape"] = mape(val.targets, measured.forward(val.inputs))
                _measure(cell, measured, test, box, objective, extras, limits,
                         spec.solve_pure,
                         out_root / "cells" / f"seed{seed}_{method}{sparsity:g}_pure")
            except Exception as exc:  # noqa: BLE001
                cell["status"] = "error"
                cell["message"] = f"{type(exc).__name__}: {exc}"
                traceback.print_exc()
            rows.append(cell)
    return rows


def _run_seed_star(args):
    return run_seed(*args)


def run_experiment(spec: ExperimentSpec, out_dir) -> list[dict]:
    """Run the full grid and write the report CSVs and figures."""
    out_root = Path(out_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    workers = int(os.environ.get(WORKERS_ENV, "1"))
    tasks = [(spec, seed, str(out_root)) for seed in spec.seeds]
    cells: list[dict] = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for rows in pool.map(_run_seed_star, tasks):
                cells.extend(rows)
    else:
        for task in tasks:
            cells.extend(_run_seed_star(task))

    write_reports(cells, out_root)
    return cells


def write_reports(cells: list[dict], out_root: Path) -> None:
    report.write_csv(out_root / "cells.csv", CELL_FIELDS, cells)
    report.write_csv(
        out_root / "mape_vs_sparsity.csv",
        ["seed", "method", "sparsity", "mode", "val_mape", "test_mape"],
        [c for c in cells if c.get("test_mape") is not None])
    report.write_csv(
        out_root / "solve_vs_sparsity.csv",
        ["seed", "method", "sparsity", "mode", "solve_status", "objective",
         "solve_time", "bb_nodes", "simplex_iterations", "simplex_per_sec", "root_gap"],
        [c for c in cells if c.get("solve_status") is not None])
    report.write_csv(
        out_root / "bounds_vs_sparsity.csv",
        ["seed", "method", "sparsity", "mode", "mean_width", "median_width", "max_width"],
        [c for c in cells if c.get("mean_width") is not None])
    report.write_csv(
        out_root / "presolve_vs_sparsity.csv",
        ["seed", "method", "sparsity", "mode", "vars_before", "vars_after",
         "cons_before", "cons_after", "ints_before", "ints_after",
         "vars_reduction", "cons_reduction", "ints_reduction"],
        [c for c in cells if c.get("vars_after") is not None])
    report.write_csv(
        out_root / "time_decomposition.csv",
        ["seed", "method", "sparsity", "mode", "train_time", "solve_time"],
        [c for c in cells if c.get("mode") in ("baseline", "full")])

    report.figure_mape_vs_sparsity(cells, out_root / "mape_vs_sparsity.png")
    report.figure_solve_vs_sparsity(cells, out_root / "solve_vs_sparsity.png")
    report.figure_simplex_and_gap(cells, out_root / "simplex_and_gap.png")
    report.figure_bound_width(cells, out_root / "bound_width_vs_sparsity.png")
    report.figure_per_seed_widths(cells, out_root / "per_seed_widths.png")
    report.figure_presolve(cells, out_root / "presolve_reduction.png")
    report.figure_time_decomposition(cells, out_root / "time_decomposition.png")
