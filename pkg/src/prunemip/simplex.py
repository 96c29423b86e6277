"""Bounded-variable primal simplex on dense numpy arrays.

Solves min c'x subject to Ax + s = b with lower/upper bounds on every
column (structural variables and row slacks). Infeasible starts are
handled by a built-in phase 1 that minimizes the total bound violation of
the basic variables, so the method can warm start from any basis, including
one whose bounds just changed. Dantzig pricing with a Bland's-rule fallback
after a degenerate streak guarantees termination.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

AT_LOWER = 0
AT_UPPER = 1
BASIC = 2

FEAS_TOL = 1e-7
DUAL_TOL = 1e-7
PIVOT_TOL = 1e-9
DEGEN_EPS = 1e-10
BLAND_AFTER = 40
REFACTOR_EVERY = 100

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"


@dataclass
class StandardFormLp:
    """Equality-form LP with slack columns appended to the structural ones."""

    a: np.ndarray  # m x (n_structural + m)
    b: np.ndarray
    c: np.ndarray  # internal minimization costs (slacks cost 0)
    lower: np.ndarray
    upper: np.ndarray
    n_structural: int
    negate_objective: bool  # original sense was max

    @classmethod
    def from_model(cls, model) -> "StandardFormLp":
        n = len(model.variables)
        m = len(model.constraints)
        a = np.zeros((m, n + m))
        b = np.zeros(m)
        s_lower = np.zeros(m)
        s_upper = np.zeros(m)
        for i, con in enumerate(model.constraints):
            for idx, coef in con.coeffs:
                a[i, idx] += coef
            a[i, n + i] = 1.0
            b[i] = con.rhs
            if con.sense == "<=":
                s_lower[i], s_upper[i] = 0.0, np.inf
            elif con.sense == ">=":
                s_lower[i], s_upper[i] = -np.inf, 0.0
            elif con.sense == "=":
                s_lower[i], s_upper[i] = 0.0, 0.0
            else:
                raise InvalidInputError(f"unknown constraint sense '{con.sense}'")
        c = np.zeros(n + m)
        for idx, coef in model.objective.coeffs:
            c[idx] += coef
        negate = model.objective.sense == "max"
        if negate:
            c = -c
        lower = np.concatenate([model.lower_bounds(), s_lower])
        upper = np.concatenate([model.upper_bounds(), s_upper])
        return cls(a, b, c, lower, upper, n, negate)


@dataclass
class SimplexResult:
    status: str
    objective: float | None  # internal (minimization) value
    x: np.ndarray | None  # full column vector incl. slacks
    iterations: int
    basis: np.ndarray | None
    vstat: np.ndarray | None


def _nonbasic_values(lower, upper, vstat) -> np.ndarray:
    vals = np.where(vstat == AT_UPPER, upper, lower)
    return np.where(np.isfinite(vals), vals, 0.0)


def primal_simplex(lp: StandardFormLp, basis=None, vstat=None,
                   max_iter: int | None = None) -> SimplexResult:
    """Two-phase bounded-variable simplex; optionally warm started."""
    a, b, c = lp.a, lp.b, lp.c
    m, nt = a.shape
    lower, upper = lp.lower, lp.upper
    if max_iter is None:
        max_iter = 2000 + 60 * (m + nt)

    if m == 0:
        x = np.where(c > 0, lower, np.where(c < 0, upper, lower))
        x = np.where(np.isfinite(x), x, 0.0)
        if not np.isfinite(x @ c):
            return SimplexResult(UNBOUNDED, None, None, 0,
                                 np.empty(0, dtype=int), np.zeros(nt, dtype=np.int8))
        return SimplexResult(OPTIMAL, float(c @ x), x, 0,
                             np.empty(0, dtype=int), np.zeros(nt, dtype=np.int8))

    warm = basis is not None and vstat is not None
    if warm:
        basis = np.asarray(basis, dtype=int).copy()
        vstat = np.asarray(vstat, dtype=np.int8).copy()
        try:
            b_inv = np.linalg.inv(a[:, basis])
        except np.linalg.LinAlgError:
            warm = False
    if not warm:
        basis = np.arange(nt - m, nt)
        vstat = np.where(np.isfinite(lower), AT_LOWER, AT_UPPER).astype(np.int8)
        vstat[basis] = BASIC
        b_inv = np.eye(m)

    x = _nonbasic_values(lower, upper, vstat)
    x[basis] = 0.0
    x[basis] = b_inv @ (b - a @ x)

    iterations = 0
    degen_streak = 0
    bland = False
    pivots_since_refactor = 0
    fixed = ~((upper - lower) > 0)  # fixed columns may never enter

    while iterations < max_iter:
        iterations += 1
        xb = x[basis]
        lb, ub = lower[basis], upper[basis]
        below = xb < lb - FEAS_TOL
        above = xb > ub + FEAS_TOL
        phase_one = bool(below.any() or above.any())

        if phase_one:
            cb = above.astype(float) - below.astype(float)
            d = -(a.T @ (b_inv.T @ cb))
        else:
            cb = c[basis]
            d = c - a.T @ (b_inv.T @ cb)

        at_lo = vstat == AT_LOWER
        at_up = vstat == AT_UPPER
        eligible = (~fixed) & ((at_lo & (d < -DUAL_TOL)) | (at_up & (d > DUAL_TOL)))
        if not eligible.any():
            if phase_one:
                return SimplexResult(INFEASIBLE, None, None, iterations, basis, vstat)
            obj = float(c @ x)
            return SimplexResult(OPTIMAL, obj, x.copy(), iterations, basis, vstat)

        idx_eligible = np.nonzero(eligible)[0]
        if bland:
            q = int(idx_eligible[0])
        else:
            q = int(idx_eligible[np.argmax(np.abs(d[idx_eligible]))])
        s = 1.0 if vstat[q] == AT_LOWER else -1.0

        w = b_inv @ a[:, q]
        dxb = -s * w

        # ratio test: how far can the entering variable move
        t = np.full(m, np.inf)
        target_val = np.empty(m)
        target_stat = np.empty(m, dtype=np.int8)
        if phase_one:
            feas = ~(below | above)
            up_hit = feas & (dxb > PIVOT_TOL)
            lo_hit = feas & (dxb < -PIVOT_TOL)
            heal_lo = below & (dxb > PIVOT_TOL)  # infeasible below, moving up to lower
            heal_up = above & (dxb < -PIVOT_TOL)
        else:
            up_hit = dxb > PIVOT_TOL
            lo_hit = dxb < -PIVOT_TOL
            heal_lo = np.zeros(m, dtype=bool)
            heal_up = np.zeros(m, dtype=bool)
        t[up_hit] = (ub[up_hit] - xb[up_hit]) / dxb[up_hit]
        target_val[up_hit] = ub[up_hit]
        target_stat[up_hit] = AT_UPPER
        t[lo_hit] = (lb[lo_hit] - xb[lo_hit]) / dxb[lo_hit]
        target_val[lo_hit] = lb[lo_hit]
        target_stat[lo_hit] = AT_LOWER
        t[heal_lo] = (lb[heal_lo] - xb[heal_lo]) / dxb[heal_lo]
        target_val[heal_lo] = lb[heal_lo]
        target_stat[heal_lo] = AT_LOWER
        t[heal_up] = (ub[heal_up] - xb[heal_up]) / dxb[heal_up]
        target_val[heal_up] = ub[heal_up]
        target_stat[heal_up] = AT_UPPER
        t = np.maximum(t, 0.0)

        span_q = upper[q] - lower[q]
        t_flip = span_q if np.isfinite(span_q) else np.inf
        t_basic = float(t.min()) if m else np.inf

        if t_flip <= t_basic:
            if not np.isfinite(t_flip):
                if phase_one:
                    # cannot happen for a consistent system; give up as infeasible
                    return SimplexResult(INFEASIBLE, None, None, iterations, basis, vstat)
                return SimplexResult(UNBOUNDED, None, None, iterations, basis, vstat)
            x[basis] = xb + t_flip * dxb
            x[q] = upper[q] if vstat[q] == AT_LOWER else lower[q]
            vstat[q] = AT_UPPER if vstat[q] == AT_LOWER else AT_LOWER
            if t_flip <= DEGEN_EPS:
                degen_streak += 1
            else:
                degen_streak = 0
                bland = False
            if degen_streak > BLAND_AFTER:
                bland = True
            continue

        # leaving choice among (near-)minimal ratios: largest |pivot| for stability,
        # smallest basic variable index under Bland's rule
        near = np.nonzero(t <= t_basic + 1e-12)[0]
        if bland:
            r = int(near[np.argmin(basis[near])])
        else:
            r = int(near[np.argmax(np.abs(dxb[near]))])
        t_star = float(t[r])

        x[basis] = xb + t_star * dxb
        x[q] = (lower[q] if vstat[q] == AT_LOWER else upper[q]) + s * t_star
        leaving = int(basis[r])
        x[leaving] = target_val[r]
        vstat[leaving] = target_stat[r]
        vstat[q] = BASIC
        basis[r] = q

        piv = w[r]
        if abs(piv) < PIVOT_TOL:
            b_inv = np.linalg.inv(a[:, basis])
        else:
            b_inv[r, :] /= piv
            others = np.arange(m) != r
            b_inv[others, :] -= np.outer(w[others], b_inv[r, :])
        pivots_since_refactor += 1
        if pivots_since_refactor >= REFACTOR_EVERY:
            pivots_since_refactor = 0
            try:
                b_inv = np.linalg.inv(a[:, basis])
            except np.linalg.LinAlgError:
                pass
            nb = vstat != BASIC
            x[nb] = _nonbasic_values(lower, upper, vstat)[nb]
            x[basis] = 0.0
            x[basis] = b_inv @ (b - a @ x)

        if t_star <= DEGEN_EPS:
            degen_streak += 1
        else:
            degen_streak = 0
            bland = False
        if degen_streak > BLAND_AFTER:
            bland = True

    return SimplexResult(ITERATION_LIMIT, None, None, iterations, basis, vstat)
