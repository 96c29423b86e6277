"""CSV reports and the matplotlib figures rendered alongside them."""

from __future__ import annotations

import csv
import math
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

FIGSIZE = (6.0, 4.0)
DPI = 150


def write_csv(path, header, rows) -> None:
    """Write rows (sequences or dicts keyed by header) as a CSV file."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            if isinstance(row, dict):
                row = [row.get(col, "") for col in header]
            writer.writerow(["" if v is None else v for v in row])


def save_figure(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)


def _finite(values):
    return [v for v in values if v is not None and isinstance(v, (int, float))
            and math.isfinite(v)]


def _median(values):
    values = sorted(_finite(values))
    if not values:
        return None
    mid = len(values) // 2
    if len(values) % 2:
        return values[mid]
    return 0.5 * (values[mid - 1] + values[mid])


def _group(cells, key_fields, value_field):
    grouped = defaultdict(list)
    for cell in cells:
        value = cell.get(value_field)
        if value is None:
            continue
        grouped[tuple(cell.get(k) for k in key_fields)].append(value)
    return grouped


def _per_method_series(cells, value_field, modes=("baseline", "full")):
    """{method: ([sparsity...], [median value...])} including the baseline at 0."""
    rows = [c for c in cells if c.get("mode") in modes and c.get(value_field) is not None]
    methods = sorted({c["method"] for c in rows if c["mode"] != "baseline"})
    series = {}
    baseline = _median([c[value_field] for c in rows if c["mode"] == "baseline"])
    for method in methods or ["baseline"]:
        grouped = _group(
            [c for c in rows if c["mode"] != "baseline" and c["method"] == method],
            ("sparsity",), value_field)
        xs = sorted(key[0] for key in grouped)
        ys = [_median(grouped[(x,)]) for x in xs]
        if baseline is not None:
            xs = [0.0] + xs
            ys = [baseline] + ys
        series[method] = (xs, ys)
    return series


def _line_plot(ax, series, ylabel, logy=False):
    for method, (xs, ys) in sorted(series.items()):
        ax.plot(xs, ys, marker="o", label=method)
    ax.set_xlabel("sparsity")
    ax.set_ylabel(ylabel)
    if logy:
        ax.set_yscale("log")
    if series:
        ax.legend()
    ax.grid(True, alpha=0.3)


def figure_mape_vs_sparsity(cells, path) -> None:
    fig, ax = plt.subplots(figsize=FIGSIZE)
    _line_plot(ax, _per_method_series(cells, "test_mape"), "test MAPE [%] (median)")
    ax.set_title("Accuracy vs sparsity")
    save_figure(fig, path)


def figure_solve_vs_sparsity(cells, path) -> None:
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    _line_plot(axes[0], _per_method_series(cells, "solve_time"), "solve time [s]", logy=True)
    _line_plot(axes[1], _per_method_series(cells, "bb_nodes"), "B&B nodes", logy=True)
    fig.suptitle("Solver effort vs sparsity")
    save_figure(fig, path)


def figure_simplex_and_gap(cells, path) -> None:
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    _line_plot(axes[0], _per_method_series(cells, "simplex_per_sec"),
               "simplex iterations / s", logy=True)
    _line_plot(axes[1], _per_method_series(cells, "root_gap"), "root gap", logy=True)
    fig.suptitle("Relaxation quality vs sparsity")
    save_figure(fig, path)


def figure_bound_width(cells, path) -> None:
    fig, ax = plt.subplots(figsize=FIGSIZE)
    _line_plot(ax, _per_method_series(cells, "mean_width"),
               "mean big-M width (median over seeds)", logy=True)
    ax.set_title("Interval width vs sparsity")
    save_figure(fig, path)


def figure_per_seed_widths(cells, path, mode="full") -> None:
    fig, ax = plt.subplots(figsize=FIGSIZE)
    rows = [c for c in cells if c.get("mean_width") is not None
            and c.get("mode") in ("baseline", mode)]
    seeds = sorted({c["seed"] for c in rows})
    methods = sorted({c["method"] for c in rows if c["mode"] != "baseline"})
    for seed in seeds:
        base = [c["mean_width"] for c in rows if c["seed"] == seed and c["mode"] == "baseline"]
        for method in methods or [None]:
            pts = sorted(
                (c["sparsity"], c["mean_width"]) for c in rows
                if c["seed"] == seed and c["mode"] != "baseline" and c["method"] == method)
            xs = [0.0] + [p[0] for p in pts] if base else [p[0] for p in pts]
            ys = base + [p[1] for p in pts]
            label = f"seed {seed}" + (f" ({method})" if method and len(methods) > 1 else "")
            ax.plot(xs, ys, marker=".", alpha=0.7, label=label)
    ax.set_xlabel("sparsity")
    ax.set_ylabel("mean big-M width")
    ax.set_yscale("log")
    ax.grid(True, alpha=0.3)
    if seeds:
        ax.legend(fontsize=7)
    ax.set_title("Per-seed interval widths")
    save_figure(fig, path)


def figure_presolve(cells, path) -> None:
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for field, label in (("vars_reduction", "variables"),
                         ("cons_reduction", "constraints"),
                         ("ints_reduction", "integer vars")):
        series = _per_method_series(cells, field)
        for method, (xs, ys) in sorted(series.items()):
            ax.plot(xs, ys, marker="o", label=f"{label} ({method})")
    ax.set_xlabel("sparsity")
    ax.set_ylabel("presolve reduction [%]")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    ax.set_title("Problem size reduction after presolve")
    save_figure(fig, path)


def figure_time_decomposition(cells, path) -> None:
    rows = [c for c in cells if c.get("mode") in ("baseline", "full")]
    keys = sorted({(c["method"], c["sparsity"]) for c in rows},
                  key=lambda k: (k[1], k[0]))
    labels, train_med, solve_med = [], [], []
    for method, sparsity in keys:
        sub = [c for c in rows if c["method"] == method and c["sparsity"] == sparsity]
        labels.append(f"{method}\n{sparsity:g}")
        train_med.append(_median([c.get("train_time") for c in sub]) or 0.0)
        solve_med.append(_median([c.get("solve_time") for c in sub]) or 0.0)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    x = range(len(labels))
    ax.bar(x, train_med, label="training")
    ax.bar(x, solve_med, bottom=train_med, label="optimization")
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylabel("median time [s]")
    ax.legend()
    ax.set_title("Total time decomposition")
    save_figure(fig, path)


def figure_layer_widths(summaries, path) -> None:
    """Per-layer width profile(s); summaries = {label: WidthSummary}."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for label, summary in summaries.items():
        xs = [s.layer for s in summary.per_layer]
        ax.plot(xs, [s.mean for s in summary.per_layer], marker="o", label=f"{label} mean")
        ax.plot(xs, [s.max for s in summary.per_layer], marker="x", linestyle="--",
                alpha=0.6, label=f"{label} max")
    ax.set_xlabel("layer")
    ax.set_ylabel("big-M width")
    ax.set_yscale("log")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    ax.set_title("Layer-wise interval widths")
    save_figure(fig, path)


def write_bounds_report(table, out_csv) -> None:
    """Per-neuron bounds CSV: layer, neuron, L, U, zL, zU, width."""
    rows = []
    for j in range(table.num_layers):
        for i in range(len(table.pre_lower[j])):
            rows.append([
                j + 1, i,
                repr(float(table.pre_lower[j][i])), repr(float(table.pre_upper[j][i])),
                repr(float(table.act_lower[j][i])), repr(float(table.act_upper[j][i])),
                repr(float(table.pre_width(j)[i])),
            ])
    write_csv(out_csv, ["layer", "neuron", "L", "U", "zL", "zU", "width"], rows)


def write_width_summary(summary, out_csv) -> None:
    rows = [[s.layer, s.kind, s.count, repr(s.mean), repr(s.median), repr(s.max)]
            for s in summary.per_layer]
    rows.append(["all", "", sum(s.count for s in summary.per_layer),
                 repr(summary.mean), repr(summary.median), repr(summary.max)])
    write_csv(out_csv, ["layer", "kind", "count", "mean_width", "median_width",
                        "max_width"], rows)
