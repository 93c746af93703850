"""Problem model, implicit constraint operator, objective and feasibility metrics.

A partial transport instance asks for a nonnegative plan ``X`` moving a
prescribed mass ``s`` between histograms ``r`` and ``c`` at minimum cost
``<C, X>``.  With slack vectors ``p`` and ``q`` the constraints become the
equalities ``X 1 + p = r``, ``X^T 1 + q = c`` and ``1^T X 1 = s``, written
``A x = b`` for the stacked vector ``x = (vec(X), p, q)``.  The operator
``A`` is never materialized; everything below applies it through row and
column sums in O(n^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, MassOutOfRange, NegativeEntry, NonFinite

__all__ = [
    "PotProblem",
    "PrimalPoint",
    "ConstraintImage",
    "SolveReport",
    "IterationRecord",
    "validate_problem",
    "apply_A",
    "apply_A_vec",
    "apply_At_vec",
    "constraint_violation",
    "pot_objective",
    "feasibility_tol",
    "pack_point",
    "unpack_point",
]


@dataclass
class PotProblem:
    """A validated instance: marginals ``r``, ``c``, mass ``s``, cost ``C``."""

    r: np.ndarray
    c: np.ndarray
    s: float
    C: np.ndarray

    @property
    def n(self) -> int:
        return self.r.shape[0]

    def b(self) -> np.ndarray:
        """Right-hand side (r, c, s) of the equality constraints."""
        return np.concatenate([self.r, self.c, [self.s]])


@dataclass
class PrimalPoint:
    """A plan with slacks; nonnegative entrywise, feasibility not implied."""

    X: np.ndarray
    p: np.ndarray
    q: np.ndarray

    def to_vector(self) -> np.ndarray:
        """Stack as (vec(X), p, q) with row-major vec."""
        return np.concatenate([self.X.reshape(-1), self.p, self.q])

    @classmethod
    def from_vector(cls, x: np.ndarray, n: int) -> "PrimalPoint":
        return cls(
            X=x[: n * n].reshape(n, n).copy(),
            p=x[n * n : n * n + n].copy(),
            q=x[n * n + n :].copy(),
        )


@dataclass
class ConstraintImage:
    """Image A x = (X 1 + p, X^T 1 + q, 1^T X 1)."""

    row: np.ndarray
    col: np.ndarray
    mass: float

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.row, self.col, [self.mass]])


@dataclass
class IterationRecord:
    iter: int
    objective: float
    violation: float
    elapsed: float
    primal_gap: float | None = None


@dataclass
class SolveReport:
    plan: PrimalPoint
    objective: float
    violation: float
    iterations: int
    trace: list[IterationRecord] = field(default_factory=list)
    meta: dict = field(default_factory=dict)


def _as_float_vector(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionMismatch(f"{name} must be a vector, got shape {arr.shape}")
    return arr


def validate_problem(r, c, s, C) -> PotProblem:
    """Check shapes, signs, finiteness and the mass budget; return the instance.

    Raises DimensionMismatch, NegativeEntry, NonFinite or MassOutOfRange.
    """
    r = _as_float_vector(r, "r")
    c = _as_float_vector(c, "c")
    C = np.asarray(C, dtype=np.float64)
    s = float(s)
    n = r.shape[0]
    if n < 1:
        raise DimensionMismatch("marginals must have at least one bin")
    if c.shape[0] != n:
        raise DimensionMismatch(f"r has {n} bins but c has {c.shape[0]}")
    if C.shape != (n, n):
        raise DimensionMismatch(f"cost matrix must be {n}x{n}, got {C.shape}")
    for name, arr in (("r", r), ("c", c), ("C", C)):
        if not np.all(np.isfinite(arr)):
            raise NonFinite(f"{name} contains non-finite entries")
        if np.any(arr < 0):
            raise NegativeEntry(f"{name} contains negative entries")
    if not math.isfinite(s):
        raise NonFinite("s is not finite")
    cap = min(r.sum(), c.sum())
    if s < 0 or s > cap:
        raise MassOutOfRange(f"s={s} outside [0, min(|r|, |c|)] = [0, {cap}]")
    return PotProblem(r=r, c=c, s=s, C=C)


def apply_A(point: PrimalPoint) -> ConstraintImage:
    """Apply the constraint operator without forming it."""
    X, p, q = point.X, point.p, point.q
    if X.shape[0] != X.shape[1] or X.shape[0] != p.shape[0] or p.shape[0] != q.shape[0]:
        raise DimensionMismatch(
            f"inconsistent shapes X={X.shape}, p={p.shape}, q={q.shape}"
        )
    return ConstraintImage(
        row=X.sum(axis=1) + p,
        col=X.sum(axis=0) + q,
        mass=float(X.sum()),
    )


def apply_A_vec(x: np.ndarray, n: int) -> np.ndarray:
    """A @ x for a stacked vector x of length n^2 + 2n, in O(n^2)."""
    X = x[: n * n].reshape(n, n)
    p = x[n * n : n * n + n]
    q = x[n * n + n :]
    out = np.empty(2 * n + 1)
    out[:n] = X.sum(axis=1) + p
    out[n : 2 * n] = X.sum(axis=0) + q
    out[2 * n] = X.sum()
    return out


def apply_At_vec(lam: np.ndarray, n: int) -> np.ndarray:
    """A^T @ lam for lam = (y, z, t), returned in stacked layout."""
    y = lam[:n]
    z = lam[n : 2 * n]
    t = lam[2 * n]
    out = np.empty(n * n + 2 * n)
    out[: n * n] = (y[:, None] + z[None, :] + t).reshape(-1)
    out[n * n : n * n + n] = y
    out[n * n + n :] = z
    return out


def constraint_violation(point: PrimalPoint, problem: PotProblem) -> float:
    """l1 norm of A x - b."""
    image = apply_A(point)
    return float(
        np.abs(image.row - problem.r).sum()
        + np.abs(image.col - problem.c).sum()
        + abs(image.mass - problem.s)
    )


def pot_objective(X: np.ndarray, C: np.ndarray) -> float:
    """Transport cost <C, X>."""
    if X.shape != C.shape:
        raise DimensionMismatch(f"plan shape {X.shape} != cost shape {C.shape}")
    return float(np.sum(C * X))


def feasibility_tol(b: np.ndarray) -> float:
    """Absolute tolerance under which equality constraints count as exact."""
    return 1e-9 * max(1.0, float(np.abs(b).sum()))


def pack_point(point: PrimalPoint) -> np.ndarray:
    return point.to_vector()


def unpack_point(x: np.ndarray, n: int) -> PrimalPoint:
    return PrimalPoint.from_vector(x, n)
