"""Exact small-scale LP oracle.

Solves the equality form ``min <C, X> s.t. X1 + p = r, X^T 1 + q = c,
1^T X 1 = s`` with a dense two-phase tableau simplex.  Pricing is most
negative reduced cost, switching permanently to Bland's rule after a run
of non-improving pivots, so the method is deterministic and cannot cycle.
Intended as ground truth at small n; the guard is a default, not a hard
wall, so callers with patience can raise it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PotProblem, PrimalPoint, pot_objective
from .errors import SizeLimitExceeded

__all__ = ["ExactSolution", "solve_exact", "simplex_solve", "dense_constraint_matrix"]

_PIVOT_TOL = 1e-9
_STALL_LIMIT = 1000


@dataclass
class ExactSolution:
    plan: PrimalPoint
    value: float
    status: str  # optimal | infeasible | numerical_failure
    duals: np.ndarray | None = None
    pivots: int = 0


def dense_constraint_matrix(n: int) -> np.ndarray:
    """The (2n+1) x (n^2+2n) equality matrix, materialized for the LP only."""
    N = n * n + 2 * n
    A = np.zeros((2 * n + 1, N))
    for i in range(n):
        A[i, i * n : (i + 1) * n] = 1.0  # row sum of X
        A[i, n * n + i] = 1.0  # plus p_i
        A[n + i, i : n * n : n] = 1.0  # column sum of X
        A[n + i, n * n + n + i] = 1.0  # plus q_i
    A[2 * n, : n * n] = 1.0  # total mass
    return A


def _pivot(T: np.ndarray, red: np.ndarray, basis: np.ndarray, row: int, col: int):
    T[row] /= T[row, col]
    colvals = T[:, col].copy()
    colvals[row] = 0.0
    T -= np.outer(colvals, T[row])
    T[:, col] = 0.0
    T[row, col] = 1.0
    red -= red[col] * T[row]
    red[col] = 0.0
    basis[row] = col


def _choose_entering(red: np.ndarray, allowed: np.ndarray, bland: bool, tol: float):
    candidates = np.where(allowed & (red < -tol))[0]
    if candidates.size == 0:
        return -1
    if bland:
        return int(candidates[0])
    return int(candidates[np.argmin(red[candidates])])


def _choose_leaving(T: np.ndarray, basis: np.ndarray, col: int):
    m = T.shape[0]
    rhs = T[:, -1]
    pos = T[:, col] > _PIVOT_TOL
    if not pos.any():
        return -1  # unbounded direction
    ratios = np.full(m, np.inf)
    ratios[pos] = rhs[pos] / T[pos, col]
    best = ratios.min()
    ties = np.where(ratios <= best * (1 + 1e-12) + 1e-15)[0]
    # smallest basic-variable index among ties (Bland-compatible, deterministic)
    return int(ties[np.argmin(basis[ties])])


def _run_phase(T, red, basis, allowed, max_pivots):
    """Pivot until optimal; returns (pivots, ok)."""
    tol = 1e-9 * max(1.0, float(np.abs(red).max()))
    bland = False
    stall = 0
    last_obj = red[-1]
    pivots = 0
    while pivots < max_pivots:
        col = _choose_entering(red[:-1], allowed, bland, tol)
        if col < 0:
            return pivots, True
        row = _choose_leaving(T, basis, col)
        if row < 0:
            return pivots, False  # unbounded (cannot happen for bounded LPs)
        _pivot(T, red, basis, row, col)
        pivots += 1
        if red[-1] > last_obj - 1e-12:
            stall += 1
            if stall >= _STALL_LIMIT:
                bland = True
        else:
            stall = 0
            last_obj = red[-1]
    return pivots, False


def simplex_solve(c: np.ndarray, A: np.ndarray, b: np.ndarray,
                  max_pivots: int = 200_000):
    """min c.x s.t. A x = b, x >= 0 (b >= 0 required); two-phase dense simplex.

    Returns (x, duals, value, status, pivots).
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    m, N = A.shape
    if np.any(b < 0):
        raise ValueError("simplex_solve requires b >= 0")

    # Tableau [A | I_m | b]; artificial basis is the identity block.
    T = np.empty((m, N + m + 1))
    T[:, :N] = A
    T[:, N : N + m] = np.eye(m)
    T[:, -1] = b
    basis = np.arange(N, N + m)

    structural = np.zeros(N + m, dtype=bool)
    structural[:N] = True

    # Phase 1: minimize the artificial mass.  red = cost - y.A with the
    # artificials basic, folded into one row updated by the pivots.
    red = np.zeros(N + m + 1)
    red[:N] = -A.sum(axis=0)
    red[-1] = -b.sum()
    pivots1, ok = _run_phase(T, red, basis, structural, max_pivots)
    if not ok:
        return None, None, np.nan, "numerical_failure", pivots1
    if -red[-1] > 1e-7 * max(1.0, float(b.sum())):
        return None, None, np.nan, "infeasible", pivots1

    # Drive surviving artificials out of the basis where possible; a row
    # with no structural pivot is redundant and stays inert at zero.
    for r in range(m):
        if basis[r] >= N:
            cols = np.where(np.abs(T[r, :N]) > _PIVOT_TOL)[0]
            free = [j for j in cols if j not in set(basis)]
            if free:
                _pivot(T, red, basis, r, int(free[0]))

    # Phase 2 reduced costs from the current basis.
    c_full = np.zeros(N + m)
    c_full[:N] = c
    red = np.empty(N + m + 1)
    red[: N + m] = c_full - c_full[basis] @ T[:, : N + m]
    red[-1] = -float(c_full[basis] @ T[:, -1])
    pivots2, ok = _run_phase(T, red, basis, structural, max_pivots)
    if not ok:
        return None, None, np.nan, "numerical_failure", pivots1 + pivots2

    x = np.zeros(N)
    for r in range(m):
        if basis[r] < N:
            x[basis[r]] = T[r, -1]
    np.maximum(x, 0.0, out=x)
    # B^{-1} sits in the artificial block, so duals read off in one product.
    duals = c_full[basis] @ T[:, N : N + m]
    value = float(c @ x)
    return x, duals, value, "optimal", pivots1 + pivots2


def solve_exact(problem: PotProblem, max_n: int = 64) -> ExactSolution:
    """Optimal plan and value for the instance; exact up to simplex tolerances.

    Raises SizeLimitExceeded for n beyond ``max_n`` (the dense tableau grows
    as n^2 columns; raise the guard deliberately for heavyweight runs).
    """
    n = problem.n
    if n > max_n:
        raise SizeLimitExceeded(f"n={n} exceeds oracle guard {max_n}")

    if problem.s == 0.0:
        plan = PrimalPoint(X=np.zeros((n, n)), p=problem.r.copy(), q=problem.c.copy())
        return ExactSolution(plan=plan, value=0.0, status="optimal", pivots=0)

    A = dense_constraint_matrix(n)
    cost = np.concatenate([problem.C.reshape(-1), np.zeros(2 * n)])
    x, duals, value, status, pivots = simplex_solve(cost, A, problem.b())
    if status != "optimal":
        return ExactSolution(
            plan=PrimalPoint(np.zeros((n, n)), np.zeros(n), np.zeros(n)),
            value=np.nan, status=status, pivots=pivots,
        )
    plan = PrimalPoint.from_vector(x, n)
    return ExactSolution(
        plan=plan,
        value=pot_objective(plan.X, problem.C),
        status="optimal",
        duals=duals,
        pivots=pivots,
    )
