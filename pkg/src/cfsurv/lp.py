"""Linear feasibility: ``A x <= b, x >= 0`` decided by a phase-1 simplex.

The phase-1 problem adds one artificial variable per row whose right-hand
side is negative and minimizes their sum.  Bland's rule keeps the pivoting
finite on degenerate systems.  Rows are scaled to unit max coefficient before
pivoting so that one absolute tolerance fits all rows.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
MARGINAL = "marginal"


@dataclass(frozen=True)
class LinearFeasibilityProblem:
    """Constraints ``A x <= b`` with implicit bounds ``x >= 0``."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).ravel()
        if A.size == 0 and A.shape[1] == 0:
            A = np.zeros((b.shape[0], 0))
        if A.shape[0] != b.shape[0]:
            raise ValueError(f"{A.shape[0]} rows but {b.shape[0]} right-hand sides")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def num_vars(self) -> int:
        return self.A.shape[1]

    @property
    def num_rows(self) -> int:
        return self.A.shape[0]

    def residual(self, x) -> float:
        """Worst violation of the scaled rows and of the bounds at ``x``."""
        x = np.asarray(x, dtype=float)
        worst = float(np.max(-x, initial=0.0))
        if self.num_rows:
            A, b = _scale_rows(self.A, self.b)
            worst = max(worst, float(np.max(A @ x - b, initial=0.0)))
        return worst


@dataclass(frozen=True)
class FeasibilityResult:
    status: str
    x: np.ndarray | None
    residual: float
    pivots: int = 0

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE


def _scale_rows(A, b):
    scale = np.max(np.abs(A), axis=1, initial=0.0)
    scale = np.where(scale > 0, scale, np.maximum(np.abs(b), 1.0))
    return A / scale[:, None], b / scale


def _pivot(T, row, col):
    T[row] /= T[row, col]
    others = np.arange(T.shape[0]) != row
    T[others] -= np.outer(T[others, col], T[row])


def solve_feasibility(
    problem: LinearFeasibilityProblem,
    *,
    tol: float = 1e-9,
    marginal_tol: float = 1e-7,
    max_pivots: int = 50_000,
) -> FeasibilityResult:
    """Find ``x`` with ``A x <= b``, ``x >= 0`` or report infeasibility.

    The status is ``marginal`` when phase 1 ends with a total infeasibility
    between ``tol`` and ``marginal_tol``, or when the recovered point misses
    the tolerance after cleanup.  Callers that need a yes/no answer should
    treat ``marginal`` as infeasible.
    """
    n = problem.num_vars
    if problem.num_rows == 0:
        return FeasibilityResult(FEASIBLE, np.zeros(n), 0.0)
    A, b = _scale_rows(problem.A, problem.b)
    m = A.shape[0]
    if np.all(b >= 0):
        return FeasibilityResult(FEASIBLE, np.zeros(n), 0.0)

    # columns: x (n), slacks (m), artificials (one per negative row), rhs
    neg = np.flatnonzero(b < 0)
    na = neg.size
    T = np.zeros((m + 1, n + m + na + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[neg, :] *= -1.0
    T[neg, n + m + np.arange(na)] = 1.0
    basis = np.arange(n, n + m)
    basis[neg] = n + m + np.arange(na)
    # objective row holds reduced costs of min sum(artificials)
    T[m, :] = -T[neg, :].sum(axis=0)
    T[m, n + m:n + m + na] = 0.0

    pivots = 0
    while True:
        reduced = T[m, :-1]
        entering = np.flatnonzero(reduced < -tol)
        if entering.size == 0:
            break
        col = entering[0]
        column = T[:m, col]
        ok = column > tol
        if not np.any(ok):
            # unbounded direction cannot occur in phase 1 (objective >= 0)
            break
        ratios = np.full(m, np.inf)
        ratios[ok] = T[:m, -1][ok] / column[ok]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + tol * max(1.0, abs(best)))
        row = ties[np.argmin(basis[ties])]
        _pivot(T, row, col)
        basis[row] = col
        pivots += 1
        if pivots >= max_pivots:
            log.warning("phase-1 simplex hit the pivot limit (%d)", max_pivots)
            break

    infeasibility = -T[m, -1]
    x = np.zeros(n + m + na)
    x[basis] = T[:m, -1]
    x = np.maximum(x[:n], 0.0)
    residual = problem.residual(x)
    if infeasibility > marginal_tol:
        return FeasibilityResult(INFEASIBLE, None, float(infeasibility), pivots)
    if infeasibility > tol or residual > tol:
        return FeasibilityResult(MARGINAL, x, max(float(infeasibility), residual), pivots)
    return FeasibilityResult(FEASIBLE, x, residual, pivots)
