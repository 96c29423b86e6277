"""Big-M MILP encoding of masked ReLU networks, presolve, and MPS/LP export.

Each unstable hidden neuron contributes one continuous activation variable,
one binary on/off indicator, and the four big-M inequalities built from its
interval bounds. Neurons that are provably off (U <= 0), provably on
(L >= 0), or constant (L = U) are presolved away: off and constant neurons
become constants folded into downstream rows, on neurons keep their
activation variable tied by a single equality and need no binary.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

import numpy as np

from .bounds import BoundsTable
from .errors import EncodingError, InvalidInputError, ParseError, SchemaError
from .network import MaskedNetwork

CONTINUOUS = "continuous"
BINARY = "binary"


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str
    lower: float
    upper: float


@dataclass(frozen=True)
class LinearConstraint:
    name: str
    coeffs: tuple  # ((var_index, coefficient), ...) with no zero coefficients
    sense: str  # "<=", "=", ">="
    rhs: float


@dataclass(frozen=True)
class Objective:
    sense: str  # "min" or "max"
    coeffs: tuple  # ((var_index, coefficient), ...)


@dataclass
class MilpModel:
    variables: list[Variable]
    constraints: list[LinearConstraint]
    objective: Objective
    input_vars: list[int]
    output_vars: list[int]
    activation_vars: dict = field(default_factory=dict)  # (layer, neuron) -> var index
    binary_vars: dict = field(default_factory=dict)  # (layer, neuron) -> var index
    name: str = "prunemip"

    @property
    def num_variables(self) -> int:
        return len(self.variables)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    def binary_indices(self) -> list[int]:
        return [i for i, v in enumerate(self.variables) if v.kind == BINARY]

    @property
    def num_binaries(self) -> int:
        return len(self.binary_indices())

    def lower_bounds(self) -> np.ndarray:
        return np.array([v.lower for v in self.variables])

    def upper_bounds(self) -> np.ndarray:
        return np.array([v.upper for v in self.variables])

    def var_index(self, name: str) -> int:
        for i, v in enumerate(self.variables):
            if v.name == name:
                return i
        raise SchemaError(f"unknown variable '{name}'")

    def copy(self) -> "MilpModel":
        return MilpModel(
            list(self.variables), list(self.constraints), self.objective,
            list(self.input_vars), list(self.output_vars),
            dict(self.activation_vars), dict(self.binary_vars), self.name,
        )

    def with_input_bounds(self, values) -> "MilpModel":
        """Copy with input variables fixed to the given point."""
        values = np.asarray(values, dtype=float)
        if values.shape != (len(self.input_vars),):
            raise InvalidInputError("input point dimension mismatch")
        model = self.copy()
        for idx, val in zip(model.input_vars, values):
            model.variables[idx] = replace(model.variables[idx],
                                           lower=float(val), upper=float(val))
        return model


@dataclass
class PresolveStats:
    vars_before: int
    vars_after: int
    cons_before: int
    cons_after: int
    ints_before: int
    ints_after: int
    stably_off_count: int
    stably_on_count: int


@dataclass
class ObjectiveSpec:
    sense: str  # "min" or "max"
    terms: list  # [(variable name, coefficient), ...]


_TERM_RE = re.compile(
    r"\s*([+-]?)\s*"
    r"(?:(\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)\s*\*?\s*)?"
    r"([A-Za-z_][A-Za-z0-9_]*)\s*"
)


def parse_linear_expression(text: str) -> list[tuple[str, float]]:
    """Parse e.g. '2.5 x0 - y1 + 3e-2*x1' into [(name, coefficient), ...]."""
    pos = 0
    combined: dict[str, float] = {}
    first = True
    while pos < len(text):
        match = _TERM_RE.match(text, pos)
        if not match:
            raise ParseError(f"cannot parse linear expression at: '{text[pos:]}'")
        sign, coef, name = match.groups()
        if not first and sign == "":
            raise ParseError(f"missing '+'/'-' before term '{name}' in '{text}'")
        value = float(coef) if coef else 1.0
        if sign == "-":
            value = -value
        combined[name] = combined.get(name, 0.0) + value
        pos = match.end()
        first = False
    if first:
        raise ParseError("empty linear expression")
    return [(name, c) for name, c in combined.items() if c != 0.0]


def parse_objective(text: str) -> ObjectiveSpec:
    """Parse 'min <expr>' / 'maximize <expr>' into an ObjectiveSpec."""
    stripped = text.strip()
    match = re.match(r"(min(?:imize)?|max(?:imize)?)\s+(.*)", stripped, re.IGNORECASE)
    if not match:
        raise ParseError(f"objective must start with min/max: '{text}'")
    sense = "min" if match.group(1).lower().startswith("min") else "max"
    return ObjectiveSpec(sense, parse_linear_expression(match.group(2)))


def parse_constraint_line(text: str) -> tuple[list, str, float]:
    """Parse '<expr> <= number' (or >=, =) into (terms, sense, rhs)."""
    for sense in ("<=", ">=", "="):
        if sense in text:
            left, _, right = text.partition(sense)
            try:
                rhs = float(right.strip())
            except ValueError:
                raise ParseError(f"right-hand side is not a number: '{right.strip()}'")
            return parse_linear_expression(left), sense, rhs
    raise ParseError(f"constraint needs one of <=, >=, =: '{text}'")


def parse_constraint_spec(text: str) -> tuple[ObjectiveSpec | None, list]:
    """Parse a problem spec document: an objective line plus constraint lines.

    Grammar (one statement per line, '#' starts a comment):
        minimize <expr>          -- or maximize; at most one objective line
        subject to               -- optional separator, ignored
        <expr> <= <number>       -- or >=, =
    where <expr> is a signed sum of [coefficient [*]] variable terms over
    the encoder's input/output names (x0, x1, ..., y0, ...).
    """
    objective = None
    constraints = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        lowered = line.lower().rstrip(":")
        if lowered in ("subject to", "s.t.", "st"):
            continue
        if re.match(r"(min(?:imize)?|max(?:imize)?)\s", line, re.IGNORECASE):
            if objective is not None:
                raise ParseError("multiple objective lines")
            objective = parse_objective(line)
        else:
            constraints.append(parse_constraint_line(line))
    return objective, constraints


# neuron presolve classification
_OFF = "off"
_ON = "on"
_CONST = "const"
_UNSTABLE = "unstable"


def _classify(l: float, u: float) -> tuple[str, float | None]:
    if u <= 0.0:
        return _OFF, 0.0
    if l == u:
        return _CONST, max(0.0, l)
    if l >= 0.0:
        return _ON, None
    return _UNSTABLE, None


def encode_bigm(net: MaskedNetwork, table: BoundsTable, box,
                objective_spec: ObjectiveSpec | None = None,
                extra_constraints=()) -> tuple[MilpModel, PresolveStats]:
    """Encode the network over the box as a big-M MILP with stable presolve.

    Variable order is deterministic: inputs x{i}, hidden activations
    z{layer}_{i} (layer-major), binaries d{layer}_{i}, outputs y{i}.
    Masked weights contribute no coefficients. Returns the model and the
    presolve statistics relative to the naive all-unstable encoding.
    """
    net = net.fold_scaling()
    box = np.asarray(box, dtype=float)
    if box.shape != (net.input_dim, 2):
        raise EncodingError(f"box must be ({net.input_dim}, 2)")
    if table.num_layers != len(net.layers):
        raise EncodingError("bounds table does not match the network depth")
    for j, layer in enumerate(net.layers):
        if table.pre_lower[j].shape != (layer.out_width,):
            raise EncodingError(f"bounds table layer {j} width mismatch")
        if not (np.isfinite(table.pre_lower[j]).all() and np.isfinite(table.pre_upper[j]).all()):
            raise EncodingError(f"bounds table layer {j} has non-finite entries")
        if np.any(table.pre_lower[j] > table.pre_upper[j]):
            raise EncodingError(f"bounds table layer {j} has L > U")

    n_hidden_layers = len(net.layers) - 1
    hidden_total = sum(layer.out_width for layer in net.layers[:-1])

    status: list[list[tuple[str, float | None]]] = []
    for j in range(n_hidden_layers):
        status.append([_classify(float(table.pre_lower[j][i]), float(table.pre_upper[j][i]))
                       for i in range(net.layers[j].out_width)])

    variables: list[Variable] = []
    input_vars, output_vars = [], []
    activation_vars: dict = {}
    binary_vars: dict = {}
    for i in range(net.input_dim):
        input_vars.append(len(variables))
        variables.append(Variable(f"x{i}", CONTINUOUS, float(box[i, 0]), float(box[i, 1])))
    for j in range(n_hidden_layers):
        for i, (kind, _) in enumerate(status[j]):
            if kind in (_ON, _UNSTABLE):
                lo = float(max(0.0, table.pre_lower[j][i]))
                hi = float(max(0.0, table.pre_upper[j][i]))
                activation_vars[(j, i)] = len(variables)
                variables.append(Variable(f"z{j + 1}_{i}", CONTINUOUS, lo, hi))
    for j in range(n_hidden_layers):
        for i, (kind, _) in enumerate(status[j]):
            if kind == _UNSTABLE:
                binary_vars[(j, i)] = len(variables)
                variables.append(Variable(f"d{j + 1}_{i}", BINARY, 0.0, 1.0))
    last = len(net.layers) - 1
    for i in range(net.output_dim):
        output_vars.append(len(variables))
        variables.append(Variable(f"y{i}", CONTINUOUS,
                                  float(table.pre_lower[last][i]),
                                  float(table.pre_upper[last][i])))

    def upstream_ref(j: int, k: int):
        """(variable index or None, constant) for activation k feeding layer j."""
        if j == 0:
            return input_vars[k], 0.0
        kind, const = status[j - 1][k]
        if kind in (_OFF, _CONST):
            return None, const
        return activation_vars[(j - 1, k)], 0.0

    def affine_terms(j: int, i: int):
        """Row of layer j, neuron i as (variable terms, constant incl. bias)."""
        layer = net.layers[j]
        terms: list[tuple[int, float]] = []
        const = float(layer.bias[i])
        for k in np.nonzero(layer.weight_mask[i])[0]:
            w = float(layer.weights[i, k])
            if w == 0.0:
                continue
            var, c = upstream_ref(j, int(k))
            if var is None:
                const += w * c
            else:
                terms.append((var, w))
        return terms, const

    constraints: list[LinearConstraint] = []
    stably_off = stably_on = 0
    for j in range(n_hidden_layers):
        for i in range(net.layers[j].out_width):
            kind, _ = status[j][i]
            if kind == _OFF:
                stably_off += 1
                continue
            if kind == _CONST:
                stably_on += 1
                continue
            z = activation_vars[(j, i)]
            terms, const = affine_terms(j, i)
            if kind == _ON:
                stably_on += 1
                coeffs = tuple([(z, 1.0)] + [(v, -c) for v, c in terms])
                constraints.append(LinearConstraint(f"eq{j + 1}_{i}", coeffs, "=", const))
                continue
            d = binary_vars[(j, i)]
            l = float(table.pre_lower[j][i])
            u = float(table.pre_upper[j][i])
            neg = [(v, -c) for v, c in terms]
            constraints.append(LinearConstraint(
                f"pos{j + 1}_{i}", ((z, 1.0),), ">=", 0.0))
            constraints.append(LinearConstraint(
                f"lin{j + 1}_{i}", tuple([(z, 1.0)] + neg), ">=", const))
            constraints.append(LinearConstraint(
                f"offcap{j + 1}_{i}", tuple([(z, 1.0)] + neg + [(d, -l)]), "<=", const - l))
            constraints.append(LinearConstraint(
                f"oncap{j + 1}_{i}", ((z, 1.0), (d, -u)), "<=", 0.0))

    for i in range(net.output_dim):
        terms, const = affine_terms(last, i)
        coeffs = tuple([(output_vars[i], 1.0)] + [(v, -c) for v, c in terms])
        constraints.append(LinearConstraint(f"out{i}", coeffs, "=", const))

    name_to_index = {variables[idx].name: idx
                     for idx in list(input_vars) + list(output_vars)}

    def resolve(terms):
        out = []
        for vname, coef in terms:
            if vname not in name_to_index:
                raise SchemaError(
                    f"unknown variable '{vname}' (objective/constraints may reference "
                    f"inputs x0..x{net.input_dim - 1} and outputs y0..y{net.output_dim - 1})")
            if coef != 0.0:
                out.append((name_to_index[vname], float(coef)))
        return tuple(out)

    for idx, (terms, sense, rhs) in enumerate(extra_constraints):
        constraints.append(LinearConstraint(f"user{idx}", resolve(terms), sense, float(rhs)))

    if objective_spec is None:
        objective = Objective("min", ())
    else:
        if objective_spec.sense not in ("min", "max"):
            raise SchemaError("objective sense must be min or max")
        objective = Objective(objective_spec.sense, resolve(objective_spec.terms))

    model = MilpModel(variables, constraints, objective, input_vars, output_vars,
                      activation_vars, binary_vars)
    stats = PresolveStats(
        vars_before=net.input_dim + 2 * hidden_total + net.output_dim,
        vars_after=model.num_variables,
        cons_before=4 * hidden_total + net.output_dim + len(list(extra_constraints)),
        cons_after=model.num_constraints,
        ints_before=hidden_total,
        ints_after=model.num_binaries,
        stably_off_count=stably_off,
        stably_on_count=stably_on,
    )
    return model, stats


def lp_relaxation(model: MilpModel) -> MilpModel:
    """The same model with every binary relaxed to a continuous [0, 1] variable."""
    relaxed = model.copy()
    relaxed.variables = [
        replace(v, kind=CONTINUOUS) if v.kind == BINARY else v
        for v in relaxed.variables
    ]
    relaxed.binary_vars = {}
    return relaxed


def _fmt(value: float) -> str:
    if value == 0:
        return "0"
    return f"{value:.17g}"


def mps_string(model: MilpModel) -> str:
    """Free-format MPS text with INTORG/INTEND markers; deterministic."""
    lines = [f"NAME          {model.name}"]
    if model.objective.sense == "max":
        lines.append("OBJSENSE")
        lines.append("    MAX")
    lines.append("ROWS")
    lines.append(" N  OBJ")
    sense_code = {"<=": "L", ">=": "G", "=": "E"}
    for con in model.constraints:
        lines.append(f" {sense_code[con.sense]}  {con.name}")

    obj_coefs = dict(model.objective.coeffs)
    entries: dict[int, list[tuple[str, float]]] = {i: [] for i in range(len(model.variables))}
    for idx, coef in model.objective.coeffs:
        entries[idx].append(("OBJ", coef))
    for con in model.constraints:
        for idx, coef in con.coeffs:
            entries[idx].append((con.name, coef))

    lines.append("COLUMNS")
    in_integer = False
    marker_count = 0
    for idx, var in enumerate(model.variables):
        if var.kind == BINARY and not in_integer:
            lines.append(f"    MARKER{marker_count}  'MARKER'  'INTORG'")
            in_integer = True
            marker_count += 1
        elif var.kind != BINARY and in_integer:
            lines.append(f"    MARKER{marker_count}  'MARKER'  'INTEND'")
            in_integer = False
            marker_count += 1
        rows = entries[idx]
        if not rows and idx not in obj_coefs:
            rows = [("OBJ", 0.0)]  # declare otherwise-unreferenced columns
        for row_name, coef in rows:
            lines.append(f"    {var.name}  {row_name}  {_fmt(coef)}")
    if in_integer:
        lines.append(f"    MARKER{marker_count}  'MARKER'  'INTEND'")

    lines.append("RHS")
    for con in model.constraints:
        if con.rhs != 0.0:
            lines.append(f"    RHS  {con.name}  {_fmt(con.rhs)}")

    lines.append("BOUNDS")
    for var in model.variables:
        if var.kind == BINARY:
            lines.append(f" BV BND  {var.name}")
        elif var.lower == var.upper:
            lines.append(f" FX BND  {var.name}  {_fmt(var.lower)}")
        else:
            if np.isfinite(var.lower):
                lines.append(f" LO BND  {var.name}  {_fmt(var.lower)}")
            else:
                lines.append(f" MI BND  {var.name}")
            if np.isfinite(var.upper):
                lines.append(f" UP BND  {var.name}  {_fmt(var.upper)}")
            else:
                lines.append(f" PL BND  {var.name}")
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"


def _lp_terms(coeffs, variables) -> str:
    if not coeffs:
        return "0 " + variables[0].name if variables else "0"
    parts = []
    for pos, (idx, coef) in enumerate(coeffs):
        sign = "-" if coef < 0 else ("+" if pos else "")
        mag = abs(coef)
        lead = f"{sign} " if sign else ""
        parts.append(f"{lead}{_fmt(mag)} {variables[idx].name}")
    return " ".join(parts)


def lp_string(model: MilpModel) -> str:
    """CPLEX-style LP text; deterministic."""
    lines = [f"\\ Problem: {model.name}"]
    lines.append("Minimize" if model.objective.sense == "min" else "Maximize")
    lines.append(f" obj: {_lp_terms(model.objective.coeffs, model.variables)}")
    lines.append("Subject To")
    for con in model.constraints:
        op = {"<=": "<=", ">=": ">=", "=": "="}[con.sense]
        lines.append(f" {con.name}: {_lp_terms(con.coeffs, model.variables)} "
                     f"{op} {_fmt(con.rhs)}")
    lines.append("Bounds")
    for var in model.variables:
        if var.kind == BINARY:
            continue
        if var.lower == var.upper:
            lines.append(f" {var.name} = {_fmt(var.lower)}")
        else:
            lo = _fmt(var.lower) if np.isfinite(var.lower) else "-inf"
            hi = _fmt(var.upper) if np.isfinite(var.upper) else "+inf"
            lines.append(f" {lo} <= {var.name} <= {hi}")
    binaries = [model.variables[i].name for i in model.binary_indices()]
    if binaries:
        lines.append("Binaries")
        lines.append(" " + " ".join(binaries))
    lines.append("End")
    return "\n".join(lines) + "\n"


def export_mps(model: MilpModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(mps_string(model))


def export_lp(model: MilpModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(lp_string(model))
