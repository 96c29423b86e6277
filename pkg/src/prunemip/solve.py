"""Branch-and-bound MILP engine over the internal simplex, with solve stats.

Node selection is best-bound, branching picks the most fractional binary,
and upper bounds come from an LP rounding heuristic (fix every binary to
its rounded value and re-solve). Children are warm started from the parent
basis. Runs are deterministic for a fixed model and limits.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass

import numpy as np

from . import simplex
from .errors import EncodingError, InvalidInputError
from .milp import BINARY, MilpModel, lp_relaxation
from .simplex import StandardFormLp, primal_simplex

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
TIME_LIMIT = "time_limit"
UNBOUNDED = "unbounded"

INT_TOL = 1e-6


@dataclass
class SolveLimits:
    time_limit: float = 300.0
    gap: float = 1e-6  # absolute incumbent/bound gap


@dataclass
class SolveStats:
    bb_nodes: int
    simplex_iterations: int
    root_gap: float | None
    wall_time: float
    status: str


@dataclass
class LpResult:
    status: str
    objective: float | None
    x: np.ndarray | None  # structural variable values
    iterations: int
    basis: np.ndarray | None
    vstat: np.ndarray | None


@dataclass
class MilpSolution:
    status: str
    objective: float | None
    values: np.ndarray | None  # one entry per model variable
    inputs: np.ndarray | None
    outputs: np.ndarray | None


def _external(sf: StandardFormLp, internal_obj: float) -> float:
    return -internal_obj if sf.negate_objective else internal_obj


def simplex_solve(model: MilpModel, basis_hint=None) -> LpResult:
    """Solve a binary-free model as an LP with the internal simplex."""
    if any(v.kind == BINARY for v in model.variables):
        raise InvalidInputError("simplex_solve needs a model without binaries")
    sf = StandardFormLp.from_model(model)
    basis, vstat = basis_hint if basis_hint is not None else (None, None)
    res = primal_simplex(sf, basis=basis, vstat=vstat)
    if res.status != simplex.OPTIMAL:
        return LpResult(res.status, None, None, res.iterations, res.basis, res.vstat)
    n = sf.n_structural
    return LpResult(OPTIMAL, _external(sf, res.objective), res.x[:n],
                    res.iterations, res.basis, res.vstat)


def _solve_with_bounds(sf: StandardFormLp, lower, upper, basis, vstat):
    trial = StandardFormLp(sf.a, sf.b, sf.c, lower, upper,
                           sf.n_structural, sf.negate_objective)
    return primal_simplex(trial, basis=basis, vstat=vstat)


def branch_and_bound(model: MilpModel, limits: SolveLimits | None = None,
                     log_stream=None) -> tuple[MilpSolution, SolveStats]:
    """Solve the MILP to proven global optimality (within the absolute gap)."""
    limits = limits or SolveLimits()
    start = time.perf_counter()
    relaxed = lp_relaxation(model)
    sf = StandardFormLp.from_model(relaxed)
    base_lower = sf.lower.copy()
    base_upper = sf.upper.copy()
    int_columns = np.array(model.binary_indices(), dtype=int)

    total_iterations = 0
    bb_nodes = 0
    incumbent_obj = np.inf  # internal minimization space
    incumbent_x = None
    root_obj_internal = None

    def elapsed():
        return time.perf_counter() - start

    def log(node_id, depth, lp_obj, best_bound):
        if log_stream is None:
            return
        inc = _external(sf, incumbent_obj) if incumbent_x is not None else None
        log_stream.write(
            f"node {node_id} depth {depth} lp {lp_obj} bound {best_bound} "
            f"incumbent {inc}\n")

    def fractional(x):
        if int_columns.size == 0:
            return np.empty(0, dtype=int)
        vals = x[int_columns]
        frac = np.abs(vals - np.round(vals))
        return int_columns[frac > INT_TOL]

    def try_rounding(x, lower, upper, basis, vstat):
        nonlocal total_iterations, incumbent_obj, incumbent_x
        lo, up = lower.copy(), upper.copy()
        rounded = np.clip(np.round(x[int_columns]), lo[int_columns], up[int_columns])
        lo[int_columns] = rounded
        up[int_columns] = rounded
        res = _solve_with_bounds(sf, lo, up, basis, vstat)
        total_iterations += res.iterations
        if res.status == simplex.OPTIMAL and res.objective < incumbent_obj - 1e-12:
            incumbent_obj = res.objective
            incumbent_x = res.x.copy()

    def finish(status):
        wall = elapsed()
        if incumbent_x is None:
            sol = MilpSolution(status, None, None, None, None)
            gap = None
        else:
            values = incumbent_x[:sf.n_structural]
            sol = MilpSolution(
                status, _external(sf, incumbent_obj), values,
                values[model.input_vars], values[model.output_vars])
            gap = (abs(incumbent_obj - root_obj_internal)
                   if root_obj_internal is not None else None)
        return sol, SolveStats(max(bb_nodes, 1), total_iterations, gap, wall, status)

    # root node
    bb_nodes = 1
    root = primal_simplex(sf)
    total_iterations += root.iterations
    if root.status == simplex.INFEASIBLE:
        return finish(INFEASIBLE)
    if root.status != simplex.OPTIMAL:
        raise EncodingError(
            f"root relaxation came back '{root.status}'; all variables should be boxed")
    root_obj_internal = root.objective
    log(0, 0, _external(sf, root.objective), _external(sf, root.objective))

    frac = fractional(root.x)
    if frac.size == 0:
        incumbent_obj = root.objective
        incumbent_x = root.x.copy()
        return finish(OPTIMAL)
    try_rounding(root.x, base_lower, base_upper, root.basis, root.vstat)

    # heap entries: (parent bound, tiebreak, bound overrides, basis, vstat, depth)
    counter = 0
    heap = []

    def push(bound, overrides, basis, vstat, depth):
        nonlocal counter
        counter += 1
        heapq.heappush(heap, (bound, counter, overrides, basis, vstat, depth))

    def branch(x, overrides, basis, vstat, obj, depth):
        cand = fractional(x)
        vals = x[cand]
        scores = np.minimum(vals - np.floor(vals), np.ceil(vals) - vals)
        j = int(cand[int(np.argmax(scores))])
        push(obj, {**overrides, j: (0.0, 0.0)}, basis.copy(), vstat.copy(), depth + 1)
        push(obj, {**overrides, j: (1.0, 1.0)}, basis.copy(), vstat.copy(), depth + 1)

    branch(root.x, {}, root.basis, root.vstat, root.objective, 0)

    status = OPTIMAL
    while heap:
        bound = heap[0][0]
        if incumbent_x is not None and incumbent_obj - bound <= limits.gap:
            break
        if elapsed() > limits.time_limit:
            status = TIME_LIMIT
            break
        bound, _, overrides, basis, vstat, depth = heapq.heappop(heap)
        if incumbent_x is not None and bound >= incumbent_obj - limits.gap:
            continue
        lower = base_lower.copy()
        upper = base_upper.copy()
        for idx, (lo, up) in overrides.items():
            lower[idx], upper[idx] = lo, up
        bb_nodes += 1
        res = _solve_with_bounds(sf, lower, upper, basis, vstat)
        total_iterations += res.iterations
        if res.status == simplex.INFEASIBLE:
            continue
        if res.status != simplex.OPTIMAL:
            raise EncodingError(f"node relaxation came back '{res.status}'")
        log(bb_nodes - 1, depth, _external(sf, res.objective),
            _external(sf, min(bound, res.objective)))
        if incumbent_x is not None and res.objective >= incumbent_obj - limits.gap:
            continue
        frac = fractional(res.x)
        if frac.size == 0:
            if res.objective < incumbent_obj:
                incumbent_obj = res.objective
                incumbent_x = res.x.copy()
            continue
        try_rounding(res.x, lower, upper, res.basis, res.vstat)
        branch(res.x, overrides, res.basis, res.vstat, res.objective, depth)

    if incumbent_x is None:
        return finish(INFEASIBLE if status == OPTIMAL else status)
    return finish(status)


def root_gap(model: MilpModel, incumbent) -> float:
    """|incumbent objective - LP relaxation optimum| for the model."""
    if isinstance(incumbent, MilpSolution):
        if incumbent.objective is None:
            raise InvalidInputError("incumbent solution carries no objective")
        incumbent_obj = float(incumbent.objective)
    else:
        incumbent_obj = float(incumbent)
    res = simplex_solve(lp_relaxation(model))
    if res.status != OPTIMAL:
        raise EncodingError(f"LP relaxation came back '{res.status}'")
    return abs(incumbent_obj - res.objective)
