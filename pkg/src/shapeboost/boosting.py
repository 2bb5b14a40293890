"""Soft-margin boosting by column generation.

The restricted master problem is the dual of a soft-margin weight
optimization: it minimizes ``gamma`` over bag distributions ``d`` confined
to the box ``[0, 1/(nu*m)]`` and the simplex, subject to one constraint
per accepted weak hypothesis.  New columns come from the weak learner;
training stops when no hypothesis beats ``gamma`` by more than
``delta_stop``.  The final hypothesis weights are the Lagrange multipliers
of the column constraints, and the recovered primal objective must agree
with ``gamma`` (zero duality gap) up to solver noise.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .bags import LabeledSample
from .errors import DataError, SolverError
from .kernels import GramMatrix
from .lp import LinearProgram, solve_lp
from .model import BoostModel, ModelTerm
from .weaklearn import (
    WeakLearnConfig,
    WeakLearnResult,
    WeightedSample,
    best_over_lengths,
)

__all__ = [
    "BoostConfig",
    "MasterSolution",
    "PrimalRecovery",
    "BoostDiagnostics",
    "solve_master",
    "recover_primal_and_check",
    "lpboost_train",
]

logger = logging.getLogger(__name__)

# A duality gap beyond this tolerance signals a solver bug.
GAP_ERROR = 1e-4
# Hypothesis weights at or below this threshold are pruned from the model.
WEIGHT_PRUNE = 1e-9


@dataclass(frozen=True)
class BoostConfig:
    """Settings for boosting.

    Parameters
    ----------
    nu : float
        Soft-margin parameter in (0, 1]; the bag-weight box is
        ``[0, 1/(nu*m)]`` and ``nu*m >= 1`` is required at training time.
    lengths : tuple of int
        Pool lengths offered to the weak learner.
    weak : WeakLearnConfig
    delta_stop : float, default 1e-6
        Slack added to the stopping test ``edge <= gamma``.
    max_columns : int, default 200
        Hard cap on accepted columns (reaching it warns).
    """

    nu: float
    lengths: tuple[int, ...]
    weak: WeakLearnConfig = field(default_factory=WeakLearnConfig)
    delta_stop: float = 1e-6
    max_columns: int = 200

    def __post_init__(self) -> None:
        if not 0 < self.nu <= 1:
            raise ValueError("nu must lie in (0, 1]")
        if not self.lengths:
            raise ValueError("at least one length is required")
        if self.delta_stop < 0 or self.max_columns < 1:
            raise ValueError("delta_stop must be >= 0 and max_columns >= 1")


@dataclass(frozen=True)
class MasterSolution:
    """Optimal restricted master solution.

    ``column_duals`` holds one nonnegative multiplier per column
    constraint (the unnormalized hypothesis weights); ``rho`` is the
    multiplier of the simplex constraint, i.e. the soft margin.
    """

    gamma: float
    d: np.ndarray
    column_duals: np.ndarray
    rho: float


@dataclass(frozen=True)
class PrimalRecovery:
    """Primal weights recovered from master duals, with the gap audit."""

    w: np.ndarray
    rho: float
    xi: np.ndarray
    objective: float
    gap: float


@dataclass
class BoostDiagnostics:
    """Per-run training record used by audits and the CLI summary."""

    gammas: list[float] = field(default_factory=list)
    edges: list[float] = field(default_factory=list)
    weights_history: list[np.ndarray] = field(default_factory=list)
    raw_weight_sum: float = float("nan")
    recovery: PrimalRecovery | None = None
    n_columns: int = 0
    final_rejected: bool = False
    hit_column_cap: bool = False


def _project_box_simplex(d: np.ndarray, cap: float) -> np.ndarray:
    """Exact Euclidean projection onto ``{0 <= d <= cap, sum d = 1}``.

    LP solvers honor bounds only up to a feasibility tolerance (about
    1e-7), but downstream consumers validate the box strictly; the
    projection removes that noise.  Bisection on the shift threshold is
    exact to float precision.
    """
    if np.all(d >= 0.0) and np.all(d <= cap) and abs(d.sum() - 1.0) < 1e-12:
        return d
    lo = float(np.min(d)) - cap - 1.0
    hi = float(np.max(d))
    for _ in range(200):
        theta = 0.5 * (lo + hi)
        if np.clip(d - theta, 0.0, cap).sum() > 1.0:
            lo = theta
        else:
            hi = theta
    return np.clip(d - 0.5 * (lo + hi), 0.0, cap)


def solve_master(signed_values: np.ndarray, nu: float) -> MasterSolution:
    """Solve the restricted master for the current columns.

    Parameters
    ----------
    signed_values : ndarray of shape (t, m)
        ``signed_values[j, i] = y_i * h_j(B_i)`` for accepted column ``j``.
    nu : float
        Soft-margin parameter.
    """
    U = np.atleast_2d(np.asarray(signed_values, dtype=np.float64))
    t, m = U.shape
    if t < 1:
        raise ValueError("at least one column is required")
    if nu * m < 1.0:
        raise ValueError(f"nu*m must be at least 1 (nu={nu}, m={m})")
    # Variables (gamma, d_1..d_m): minimize gamma subject to
    # U[j] @ d - gamma <= 0 per column, sum d = 1, 0 <= d <= 1/(nu m).
    cost = np.zeros(1 + m)
    cost[0] = 1.0
    A_ub = np.hstack([-np.ones((t, 1)), U])
    b_ub = np.zeros(t)
    A_eq = np.zeros((1, 1 + m))
    A_eq[0, 1:] = 1.0
    b_eq = np.array([1.0])
    bounds = [(None, None)] + [(0.0, 1.0 / (nu * m))] * m
    sol = solve_lp(
        LinearProgram(c=cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds)
    )
    if sol.status != "optimal":
        raise SolverError(f"master problem ended with status {sol.status}")
    return MasterSolution(
        gamma=float(sol.x[0]),
        d=_project_box_simplex(sol.x[1:].copy(), 1.0 / (nu * m)),
        column_duals=np.maximum(sol.ineq_duals, 0.0),
        rho=float(sol.eq_duals[0]),
    )


def recover_primal_and_check(
    master: MasterSolution, signed_values: np.ndarray, nu: float
) -> PrimalRecovery:
    """Recover primal weights and audit the duality gap.

    ``w`` is the normalized vector of column duals, ``xi`` the implied
    slacks ``max(0, rho - y_i g(B_i))``, and the recovered objective
    ``rho - sum(xi)/(nu*m)`` must match the master's ``gamma``.

    Raises
    ------
    SolverError
        If the recovered objective differs from ``gamma`` by more than
        1e-4, which indicates a solver inconsistency.
    """
    U = np.atleast_2d(np.asarray(signed_values, dtype=np.float64))
    m = U.shape[1]
    total = float(master.column_duals.sum())
    if total <= 0:
        raise SolverError("master column duals sum to zero")
    w = master.column_duals / total
    margins = w @ U  # y_i * g(B_i) per bag
    xi = np.maximum(0.0, master.rho - margins)
    objective = master.rho - float(xi.sum()) / (nu * m)
    gap = abs(objective - master.gamma)
    if gap > GAP_ERROR:
        raise SolverError(
            f"duality gap {gap:.3e} exceeds {GAP_ERROR:.0e}; master duals are inconsistent"
        )
    return PrimalRecovery(w=w, rho=master.rho, xi=xi, objective=objective, gap=gap)


def lpboost_train(
    sample: LabeledSample,
    grams: Mapping[int, GramMatrix],
    config: BoostConfig,
) -> tuple[BoostModel, BoostDiagnostics]:
    """Train a boosted shapelet ensemble by column generation.

    Parameters
    ----------
    sample : LabeledSample
        Signed sample with both classes present.
    grams : mapping of length to GramMatrix
        Precomputed Gram matrices, one per pool length in
        ``config.lengths``.
    config : BoostConfig

    Returns
    -------
    model : BoostModel
        Ensemble with normalized positive weights; zero-coefficient pool
        entries are dropped from each term.
    diagnostics : BoostDiagnostics

    Raises
    ------
    DataError
        On single-class samples or missing lengths.
    SolverError
        If the very first column is rejected ("no separating column") or
        an optimizer fails.
    """
    sample.require_signed()
    if np.unique(sample.labels).size < 2:
        raise DataError("training requires both classes in the sample")
    missing = [l for l in config.lengths if l not in grams]
    if missing:
        raise DataError(f"no Gram matrix for lengths {missing}")
    grams = {l: grams[l] for l in config.lengths}
    for length in config.lengths:
        for i, bag in enumerate(sample.bags):
            if not bag.has_length(length):
                raise DataError(f"bag {i} has no instances of dimension {length}")
    m = sample.m
    if config.nu * m < 1.0:
        raise ValueError(f"nu*m must be at least 1 (nu={config.nu}, m={m})")

    diag = BoostDiagnostics()
    d = np.full(m, 1.0 / m)
    gamma = 0.0
    columns: list[WeakLearnResult] = []
    signed_rows: list[np.ndarray] = []
    master: MasterSolution | None = None
    for t in range(1, config.max_columns + 1):
        weights = WeightedSample(d, config.nu)
        diag.weights_history.append(weights.d.copy())
        result = best_over_lengths(sample, grams, weights.d, config.weak)
        diag.edges.append(result.edge)
        if result.edge <= gamma + config.delta_stop:
            diag.final_rejected = True
            logger.info(
                "iteration %d: edge %.6g <= gamma %.6g, stopping", t, result.edge, gamma
            )
            break
        columns.append(result)
        signed_rows.append(sample.labels * result.bag_values)
        master = solve_master(np.vstack(signed_rows), config.nu)
        d = master.d
        gamma = master.gamma
        diag.gammas.append(gamma)
        logger.info(
            "iteration %d: length %d, edge %.6g, gamma %.6g, %d nonzero coefficients",
            t,
            result.shapelet.length,
            result.edge,
            gamma,
            result.shapelet.n_nonzero,
        )
    else:
        diag.hit_column_cap = True
        warnings.warn(
            f"boosting stopped at the column cap ({config.max_columns})",
            RuntimeWarning,
            stacklevel=2,
        )
    if not columns or master is None:
        raise SolverError("no separating column: the first weak hypothesis was rejected")

    diag.n_columns = len(columns)
    diag.raw_weight_sum = float(master.column_duals.sum())
    recovery = recover_primal_and_check(master, np.vstack(signed_rows), config.nu)
    diag.recovery = recovery

    terms = []
    for weight, column in zip(recovery.w, columns):
        if weight <= WEIGHT_PRUNE:
            continue
        terms.append(
            ModelTerm.from_coefficients(
                weight=float(weight),
                length=column.shapelet.length,
                coefficients=column.shapelet.coefficients,
                vectors=column.shapelet.pool.vectors,
            )
        )
    spec = next(iter(grams.values())).spec
    model = BoostModel(
        kernel=spec,
        nu=config.nu,
        terms=tuple(terms),
        meta={"lengths": list(config.lengths)},
    )
    return model, diag
