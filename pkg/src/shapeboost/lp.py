"""Dense linear programming used by the boosting master and weak learner.

Thin, validated wrapper around HiGHS (via :func:`scipy.optimize.linprog`)
with a fixed dual sign convention: multipliers for ``<=`` rows are
nonnegative, so for an optimal solution

``objective = -b_ub @ ineq_duals + b_eq @ eq_duals + lo @ lower_duals - hi @ upper_duals``

with ``lower_duals >= 0`` and ``upper_duals >= 0`` (infinite bounds
contribute nothing).  Equality rows are handled natively, never as paired
inequalities, because the boosting master needs their multipliers directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog as _scipy_linprog

from .errors import SolverError

__all__ = ["LinearProgram", "LpSolution", "solve_lp"]


@dataclass
class LinearProgram:
    """``min c @ x`` subject to ``A_ub x <= b_ub``, ``A_eq x = b_eq``, bounds.

    Parameters
    ----------
    c : ndarray of shape (n,)
    A_ub, b_ub : optional inequality rows
    A_eq, b_eq : optional equality rows
    bounds : list of (lo, hi) pairs, optional
        Per-variable bounds; ``None`` means unbounded on that side.
        Omitted bounds default to free variables.
    """

    c: np.ndarray
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    bounds: list[tuple[float | None, float | None]] | None = None

    def __post_init__(self) -> None:
        self.c = np.atleast_1d(np.asarray(self.c, dtype=np.float64))
        n = self.c.size
        if not np.all(np.isfinite(self.c)):
            raise ValueError("objective coefficients must be finite")
        for name in ("ub", "eq"):
            A = getattr(self, f"A_{name}")
            b = getattr(self, f"b_{name}")
            if (A is None) != (b is None):
                raise ValueError(f"A_{name} and b_{name} must be given together")
            if A is None:
                continue
            A = np.atleast_2d(np.asarray(A, dtype=np.float64))
            b = np.atleast_1d(np.asarray(b, dtype=np.float64))
            if A.shape != (b.size, n):
                raise ValueError(f"A_{name} shape {A.shape} inconsistent with n={n}")
            if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
                raise ValueError(f"A_{name}/b_{name} must be finite")
            setattr(self, f"A_{name}", A)
            setattr(self, f"b_{name}", b)
        if self.bounds is None:
            self.bounds = [(None, None)] * n
        if len(self.bounds) != n:
            raise ValueError("one (lo, hi) pair per variable is required")

    @property
    def n(self) -> int:
        return self.c.size


@dataclass
class LpSolution:
    """Primal/dual solution of a linear program.

    ``status`` is one of ``optimal``, ``infeasible``, ``unbounded``.  Dual
    fields are ``None`` unless the status is ``optimal``; the sign
    convention is documented at module level.
    """

    status: str
    objective: float | None = None
    x: np.ndarray | None = None
    ineq_duals: np.ndarray | None = None
    eq_duals: np.ndarray | None = None
    lower_duals: np.ndarray | None = None
    upper_duals: np.ndarray | None = None


_STATUS = {0: "optimal", 2: "infeasible", 3: "unbounded"}


def solve_lp(lp: LinearProgram) -> LpSolution:
    """Solve a linear program deterministically.

    Raises
    ------
    SolverError
        If the backend reports a numerical failure on every attempt.
    """
    last_message = ""
    # Presolve is disabled on the first attempt: on the small dense
    # programs built here it dominates solve time, and it occasionally
    # reports "Unknown" on badly scaled inputs (near-denormal kernel
    # values).  Later rungs restore it in case the reduction helps.
    attempts = (
        {"method": "highs", "options": {"presolve": False}},
        {"method": "highs"},
        {"method": "highs-ds", "options": {"presolve": False}},
        {"method": "highs-ds"},
    )
    for attempt in attempts:
        res = _scipy_linprog(
            lp.c,
            A_ub=lp.A_ub,
            b_ub=lp.b_ub,
            A_eq=lp.A_eq,
            b_eq=lp.b_eq,
            bounds=lp.bounds,
            **attempt,
        )
        if res.status in _STATUS:
            break
        last_message = res.message
    else:
        raise SolverError(f"linear program solver failed: {last_message}")
    status = _STATUS[res.status]
    if status != "optimal":
        return LpSolution(status=status)
    ineq = None if lp.A_ub is None else -np.asarray(res.ineqlin.marginals, dtype=np.float64)
    eq = None if lp.A_eq is None else np.asarray(res.eqlin.marginals, dtype=np.float64)
    return LpSolution(
        status="optimal",
        objective=float(res.fun),
        x=np.asarray(res.x, dtype=np.float64),
        ineq_duals=ineq,
        eq_duals=eq,
        lower_duals=np.asarray(res.lower.marginals, dtype=np.float64),
        upper_duals=-np.asarray(res.upper.marginals, dtype=np.float64),
    )
