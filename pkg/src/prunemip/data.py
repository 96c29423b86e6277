"""Datasets: the peaks benchmark, Latin hypercube sampling, CSV I/O, metrics."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, ParseError, SchemaError

DEFAULT_MAPE_EPSILON = 1e-8


def peaks(x1, x2):
    """The two-dimensional peaks test function (multiple local minima).

    Its global minimum over [-3, 3]^2 is about -6.551 at (0.228, -1.626).
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    return (
        3.0 * (1.0 - x1) ** 2 * np.exp(-x1**2 - (x2 + 1.0) ** 2)
        - 10.0 * (x1 / 5.0 - x1**3 - x2**5) * np.exp(-x1**2 - x2**2)
        - (1.0 / 3.0) * np.exp(-((x1 + 1.0) ** 2) - x2**2)
    )


def _as_box(box) -> np.ndarray:
    box = np.asarray(box, dtype=float)
    if box.ndim != 2 or box.shape[1] != 2:
        raise InvalidInputError("box must be a (d, 2) array of [lo, hi] rows")
    return box


@dataclass
class Dataset:
    """Immutable (inputs, targets) pair plus the per-dimension input box."""

    inputs: np.ndarray
    targets: np.ndarray
    box: np.ndarray

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=float)
        self.targets = np.asarray(self.targets, dtype=float)
        self.box = _as_box(self.box)
        if self.inputs.ndim != 2 or self.targets.ndim != 2:
            raise InvalidInputError("inputs and targets must be 2-D matrices")
        if len(self.inputs) != len(self.targets):
            raise InvalidInputError("inputs and targets must have the same row count")
        if len(self.inputs) < 1 or self.inputs.shape[1] < 1 or self.targets.shape[1] < 1:
            raise InvalidInputError("dataset must be non-empty with d, m >= 1")
        if not (np.isfinite(self.inputs).all() and np.isfinite(self.targets).all()):
            raise InvalidInputError("dataset contains NaN or Inf entries")
        if self.box.shape[0] != self.inputs.shape[1]:
            raise InvalidInputError("box dimension does not match input dimension")
        lo, hi = self.box[:, 0], self.box[:, 1]
        if np.any(self.inputs < lo - 1e-12) or np.any(self.inputs > hi + 1e-12):
            raise InvalidInputError("some input rows lie outside the declared box")

    @property
    def n(self) -> int:
        return len(self.inputs)

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    @property
    def target_dim(self) -> int:
        return self.targets.shape[1]


def latin_hypercube(n: int, box, seed: int) -> np.ndarray:
    """Latin hypercube sample: one point per stratum in every dimension."""
    if n < 1:
        raise InvalidInputError("latin_hypercube needs n >= 1")
    box = _as_box(box)
    lo, hi = box[:, 0], box[:, 1]
    if np.any(hi <= lo):
        raise InvalidInputError("invalid domain: every dimension needs lo < hi")
    rng = np.random.default_rng(seed)
    d = box.shape[0]
    out = np.empty((n, d))
    for k in range(d):
        strata = rng.permutation(n)
        jitter = rng.random(n)
        out[:, k] = lo[k] + (strata + jitter) * (hi[k] - lo[k]) / n
    return out


def make_peaks_dataset(n: int, seed: int, box=((-3.0, 3.0), (-3.0, 3.0))) -> Dataset:
    """Sample the peaks function with LHS over the given box."""
    x = latin_hypercube(n, box, seed)
    y = peaks(x[:, 0], x[:, 1])[:, None]
    return Dataset(x, y, box)


def mape(targets, predictions, epsilon: float = DEFAULT_MAPE_EPSILON) -> float:
    """Mean absolute percentage error with the denominator clamped at epsilon."""
    targets = np.asarray(targets, dtype=float)
    predictions = np.asarray(predictions, dtype=float)
    if epsilon <= 0:
        raise InvalidInputError("mape epsilon must be positive")
    if targets.shape != predictions.shape:
        raise InvalidInputError(
            f"shape mismatch: targets {targets.shape} vs predictions {predictions.shape}"
        )
    denom = np.maximum(np.abs(targets), epsilon)
    return float(100.0 * np.mean(np.abs(targets - predictions) / denom))


def split_dataset(ds: Dataset, train_frac: float, seed: int) -> tuple[Dataset, Dataset]:
    """Deterministic shuffle split into train (floor share) and validation."""
    if not 0.0 < train_frac < 1.0:
        raise InvalidInputError("train_frac must lie strictly between 0 and 1")
    if ds.n < 2:
        raise InvalidInputError("need at least 2 rows to split")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(ds.n)
    n_train = int(np.floor(ds.n * train_frac))
    n_train = min(max(n_train, 1), ds.n - 1)
    tr, va = perm[:n_train], perm[n_train:]
    return (
        Dataset(ds.inputs[tr], ds.targets[tr], ds.box),
        Dataset(ds.inputs[va], ds.targets[va], ds.box),
    )


def save_csv(ds: Dataset, path, input_names=None, target_names=None) -> None:
    """Write a dataset as a comma-separated file with a header row."""
    input_names = input_names or [f"x{i}" for i in range(ds.input_dim)]
    target_names = target_names or [f"y{i}" for i in range(ds.target_dim)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(input_names) + list(target_names))
        for xi, yi in zip(ds.inputs, ds.targets):
            writer.writerow([repr(float(v)) for v in xi] + [repr(float(v)) for v in yi])


def load_csv(path, input_cols, target_cols, box=None) -> Dataset:
    """Read a headed CSV into a Dataset.

    The box defaults to the per-column [min, max] of the input data unless
    overridden.
    """
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file, header row required") from None
        header = [h.strip() for h in header]
        col_index = {}
        for name in list(input_cols) + list(target_cols):
            if name not in header:
                raise SchemaError(f"{path}: missing column '{name}'")
            col_index[name] = header.index(name)
        inputs, targets = [], []
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            def cell(name):
                raw = row[col_index[name]].strip()
                try:
                    return float(raw)
                except ValueError:
                    raise ParseError(
                        f"{path}: row {row_no}, column '{name}': "
                        f"cannot parse '{raw}' as a number"
                    ) from None
            inputs.append([cell(name) for name in input_cols])
            targets.append([cell(name) for name in target_cols])
    if not inputs:
        raise InvalidInputError(f"{path}: no data rows")
    inputs = np.asarray(inputs)
    targets = np.asarray(targets)
    if box is None:
        box = np.stack([inputs.min(axis=0), inputs.max(axis=0)], axis=1)
    return Dataset(inputs, targets, box)
