"""Weak learning by difference-of-convex (DC) iteration.

A weak hypothesis scores a bag by the best kernel similarity between any
of its instances and a learned expansion ``sum_z alpha_z K(z, .)`` over the
instance pool.  Given bag weights ``d``, the weak learner minimizes

    - sum_i d_i y_i max_x k_x @ alpha

over a feasible set for ``alpha``: either the kernel-norm ball
``alpha' G alpha <= 1`` (variant ``"op1"``) or the l1 ball
``||alpha||_1 <= 1`` (variant ``"op2"``, sparse).  The objective is a
difference of convex functions, so each DC iteration fixes the maximizing
instance of every positive bag and solves the resulting convex subproblem:
a linear program for the l1 ball, a projected subgradient method in the
Gram eigenbasis for the norm ball.  The loop starts from the best one-hot
coefficient vector and stops once the objective improves by at most
``epsilon``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .bags import Bag, InstancePool, LabeledSample
from .errors import DataError, SolverError
from .kernels import GramMatrix, kernel_matrix
from .lp import LinearProgram, solve_lp

__all__ = [
    "Shapelet",
    "WeightedSample",
    "WeakLearnConfig",
    "WeakLearnResult",
    "hypothesis_value",
    "edge",
    "init_one_hot",
    "solve_linearized_l1",
    "solve_linearized_norm_ball",
    "dc_weak_learn",
    "best_over_lengths",
]

VARIANTS = ("op1", "op2")

# Feasibility slack for returned coefficient vectors.
NORM_BALL_TOL = 1e-8
L1_TOL = 1e-10

# Projected-subgradient settings for the norm-ball subproblem.
_SUBGRAD_CAP = 5000
_SUBGRAD_TAIL = 500


@dataclass(frozen=True)
class Shapelet:
    """A coefficient vector over an instance pool.

    ``coefficients[j]`` multiplies ``K(pool.vectors[j], .)`` in the
    hypothesis ``h(B) = max_x sum_j coefficients[j] K(pool.vectors[j], x)``.
    """

    length: int
    coefficients: np.ndarray
    pool: InstancePool

    def __post_init__(self) -> None:
        a = np.ascontiguousarray(self.coefficients, dtype=np.float64)
        if a.shape != (self.pool.size,):
            raise ValueError(
                f"coefficient shape {a.shape} does not match pool size {self.pool.size}"
            )
        a.setflags(write=False)
        object.__setattr__(self, "coefficients", a)
        if self.length != self.pool.length:
            raise ValueError("shapelet length must match its pool")

    @property
    def n_nonzero(self) -> int:
        return int(np.count_nonzero(self.coefficients))


class WeightedSample:
    """A distribution over bags with the soft-margin box constraint.

    ``d`` must lie in ``[0, 1/(nu*m)]`` per coordinate and sum to one.
    """

    def __init__(self, d: np.ndarray, nu: float) -> None:
        d = np.asarray(d, dtype=np.float64)
        m = d.size
        if not 0 < nu <= 1:
            raise ValueError("nu must lie in (0, 1]")
        cap = 1.0 / (nu * m)
        if np.any(d < -1e-12) or np.any(d > cap + 1e-9):
            raise ValueError(f"weights leave the box [0, {cap}]")
        if abs(d.sum() - 1.0) > 1e-9:
            raise ValueError("weights must sum to one")
        self.d = np.clip(d, 0.0, cap)
        self.nu = float(nu)


@dataclass(frozen=True)
class WeakLearnConfig:
    """Settings for the DC weak learner.

    Parameters
    ----------
    variant : {"op1", "op2"}, default "op2"
        Feasible set: "op1" is the kernel-norm ball, "op2" the l1 ball.
    epsilon : float, default 1e-4
        Stop once one DC step improves the objective by at most this much.
    max_iterations : int, default 50
        DC iteration cap; hitting it is success with a warning.
    rough : bool, default False
        Return the one-hot initializer without any DC iteration (fast
        mode for hyperparameter search).
    negative_init : bool, default False
        Also consider negated one-hot vectors during initialization.
    """

    variant: str = "op2"
    epsilon: float = 1e-4
    max_iterations: int = 50
    rough: bool = False
    negative_init: bool = False

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass(frozen=True)
class WeakLearnResult:
    """Outcome of one weak-learning call.

    Attributes
    ----------
    shapelet : Shapelet
    objective : float
        Final subproblem objective; never above the initializer's value.
    objectives : tuple of float
        Objective trace starting at the initializer; non-increasing.
    iterations : int
        Number of DC iterations performed.
    converged : bool
        False only when the iteration cap cut the loop short.
    bag_values : ndarray of shape (m,)
        ``h(B_i)`` for every bag under the returned shapelet.
    edge : float
        ``sum_i y_i d_i h(B_i)`` for the weights the learner was given.
    """

    shapelet: Shapelet
    objective: float
    objectives: tuple[float, ...]
    iterations: int
    converged: bool
    bag_values: np.ndarray
    edge: float


def _cross(gram: GramMatrix, bag: Bag) -> np.ndarray:
    return gram.bag_cross(bag)


def hypothesis_value(shapelet: Shapelet, gram: GramMatrix, bag: Bag) -> tuple[float, int]:
    """Score one bag and report the maximizing instance.

    Returns
    -------
    value : float
        ``max_x k_x @ coefficients`` over the bag's instances of the
        shapelet's dimension.
    maximizer : int
        Index of the maximizing instance within that length group (ties
        go to the lowest index).
    """
    if gram.pool is shapelet.pool:
        C = _cross(gram, bag)
    else:
        C = kernel_matrix(gram.spec, bag.instances(shapelet.length), shapelet.pool.vectors)
    vals = C @ shapelet.coefficients
    idx = int(np.argmax(vals))
    return float(vals[idx]), idx


def edge(shapelet: Shapelet, sample: LabeledSample, gram: GramMatrix, d: np.ndarray) -> float:
    """Weighted correlation ``sum_i y_i d_i h(B_i)`` of a hypothesis."""
    values = np.array([hypothesis_value(shapelet, gram, bag)[0] for bag in sample.bags])
    return float(np.sum(np.asarray(d) * sample.labels * values))


def init_one_hot(
    sample: LabeledSample,
    gram: GramMatrix,
    d: np.ndarray,
    negative: bool = False,
) -> Shapelet:
    """Pick the most discriminative single pool instance.

    Enumerates ``alpha = e_z`` over the pool (and ``-e_z`` as well when
    ``negative`` is set) and returns the one maximizing
    ``sum_i d_i y_i max_x K(z, x)``; ties go to the lowest pool index,
    preferring the positive sign.
    """
    sample.require_signed()
    hi, lo = gram.bag_extrema(sample.bags)
    w = np.asarray(d) * sample.labels
    plus = w @ hi  # objective of +e_z for every z
    best = int(np.argmax(plus))
    coeffs = np.zeros(gram.size)
    coeffs[best] = 1.0
    if negative:
        minus = w @ (-lo)  # objective of -e_z: h(B) = max_x -K(z, x)
        best_minus = int(np.argmax(minus))
        if minus[best_minus] > plus[best]:
            coeffs[:] = 0.0
            coeffs[best_minus] = -1.0
    return Shapelet(gram.pool.length, coeffs, gram.pool)


def _positive_gradient(
    crosses: Sequence[np.ndarray],
    d: np.ndarray,
    maximizers: Mapping[int, int],
) -> np.ndarray:
    """Weighted sum of the fixed maximizer rows of the positive bags."""
    c = np.zeros(crosses[0].shape[1] if crosses else 0)
    for i, row in maximizers.items():
        c += d[i] * crosses[i][row]
    return c


def _linearized_objective(
    alpha: np.ndarray,
    c: np.ndarray,
    neg_idx: Sequence[int],
    crosses: Sequence[np.ndarray],
    d: np.ndarray,
) -> float:
    value = -float(c @ alpha)
    for r in neg_idx:
        value += float(d[r]) * float(np.max(crosses[r] @ alpha))
    return value


def _subproblem_inputs(
    sample: LabeledSample,
    gram: GramMatrix,
    d: np.ndarray,
    maximizers: Mapping[int, int],
) -> tuple[np.ndarray, list[int], list[np.ndarray]]:
    d = np.asarray(d, dtype=np.float64)
    crosses = [_cross(gram, bag) for bag in sample.bags]
    c = _positive_gradient(crosses, d, maximizers)
    # Zero-weight negative bags cannot affect the optimum; drop their rows.
    neg_idx = [
        i for i in range(sample.m) if sample.labels[i] == -1 and d[i] > 0.0
    ]
    return c, neg_idx, crosses


_ROWGEN_TOL = 1e-9
_ROWGEN_BATCH = 10
_ROWGEN_ROUNDS = 60


def _l1_lp(
    cost: np.ndarray,
    bounds: list,
    crosses: Sequence[np.ndarray],
    neg_idx: Sequence[int],
    row_sets: Sequence[Sequence[int]] | None,
    p: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Solve the split-variable l1 subproblem LP on a subset of rows.

    ``row_sets`` gives, per active negative bag, the instance rows to
    include; ``None`` includes every row.  Returns ``(alpha, lambda)``.
    """
    n_lam = len(neg_idx)
    blocks: list[np.ndarray] = []
    for slot, r in enumerate(neg_idx):
        C = crosses[r] if row_sets is None else crosses[r][list(row_sets[slot])]
        block = np.zeros((C.shape[0], 2 * p + n_lam))
        block[:, :p] = C
        block[:, p : 2 * p] = -C
        block[:, 2 * p + slot] = -1.0
        blocks.append(block)
    l1_row = np.zeros((1, 2 * p + n_lam))
    l1_row[0, : 2 * p] = 1.0
    blocks.append(l1_row)
    A_ub = np.vstack(blocks)
    b_ub = np.zeros(A_ub.shape[0])
    b_ub[-1] = 1.0
    sol = solve_lp(LinearProgram(c=cost, A_ub=A_ub, b_ub=b_ub, bounds=bounds))
    if sol.status != "optimal":
        raise SolverError(f"l1 subproblem ended with status {sol.status}")
    return sol.x[:p] - sol.x[p : 2 * p], sol.x[2 * p :]


def solve_linearized_l1(
    sample: LabeledSample,
    gram: GramMatrix,
    d: np.ndarray,
    maximizers: Mapping[int, int],
    hint: np.ndarray | None = None,
) -> tuple[np.ndarray, float]:
    """Solve one DC subproblem over the l1 ball as a linear program.

    The negative-bag constraints ``k_x @ alpha <= lambda_r`` are handled
    by row generation: solve on a small active subset, add the rows the
    solution violates, and repeat until none are (then the restricted
    optimum is feasible for, hence optimal for, the full LP).  ``hint``
    only seeds the initial active rows and cannot change the optimum.

    Parameters
    ----------
    maximizers : mapping of bag index to instance index
        The fixed maximizing instance of every positive bag.
    hint : ndarray, optional
        Coefficient vector whose per-bag maximizers seed the active rows
        (the DC loop passes its current iterate).

    Returns
    -------
    alpha : ndarray
        Optimal coefficients with ``||alpha||_1 <= 1``.
    objective : float
        Subproblem objective at ``alpha``.
    """
    sample.require_signed()
    c, neg_idx, crosses = _subproblem_inputs(sample, gram, d, maximizers)
    p = gram.size
    d = np.asarray(d, dtype=np.float64)
    cost = np.concatenate([-c, c, d[neg_idx]])
    bounds = [(0.0, 1.0)] * (2 * p) + [(None, None)] * len(neg_idx)
    row_sets: list[list[int]] = [
        [0 if hint is None else int(np.argmax(crosses[r] @ hint))] for r in neg_idx
    ]
    alpha: np.ndarray | None = None
    for _ in range(_ROWGEN_ROUNDS):
        alpha, lam = _l1_lp(cost, bounds, crosses, neg_idx, row_sets, p)
        grew = False
        for slot, r in enumerate(neg_idx):
            values = crosses[r] @ alpha
            over = np.flatnonzero(values > lam[slot] + _ROWGEN_TOL)
            if over.size:
                order = over[np.argsort(values[over], kind="stable")[::-1]]
                known = set(row_sets[slot])
                new = [int(i) for i in order if int(i) not in known][:_ROWGEN_BATCH]
                if new:
                    row_sets[slot].extend(new)
                    grew = True
        if not grew:
            break
    else:
        alpha, _ = _l1_lp(cost, bounds, crosses, neg_idx, None, p)
    assert alpha is not None
    norm = float(np.abs(alpha).sum())
    if norm > 1.0:
        alpha = alpha / norm
    return alpha, _linearized_objective(alpha, c, neg_idx, crosses, d)


def solve_linearized_norm_ball(
    sample: LabeledSample,
    gram: GramMatrix,
    d: np.ndarray,
    maximizers: Mapping[int, int],
) -> tuple[np.ndarray, float]:
    """Solve one DC subproblem over the kernel-norm ball.

    A change of variables in the Gram eigenbasis (null directions pinned
    to zero) turns the constraint ``alpha' G alpha <= 1`` into a Euclidean
    unit ball, on which a projected subgradient method with a Polyak-style
    step minimizes the convex piecewise-linear objective.

    Returns
    -------
    alpha : ndarray
        Feasible coefficients (``alpha' G alpha <= 1 + 1e-8``).
    objective : float
        Subproblem objective at ``alpha``.

    Raises
    ------
    SolverError
        If the method is still improving materially at the iteration cap;
        the error carries the best iterate found.
    """
    sample.require_signed()
    c, neg_idx, crosses = _subproblem_inputs(sample, gram, d, maximizers)
    d = np.asarray(d, dtype=np.float64)
    basis, scale = gram.factor()
    c_hat = (c @ basis) / scale
    neg_hats = [(crosses[r] @ basis) / scale[None, :] for r in neg_idx]
    neg_w = d[neg_idx]

    lipschitz = float(np.linalg.norm(c_hat))
    for w, H in zip(neg_w, neg_hats):
        lipschitz += float(w) * float(np.sqrt(np.max(np.sum(H * H, axis=1))))
    r_dim = basis.shape[1]
    beta = np.zeros(r_dim)
    beta_best = beta.copy()
    f_best = 0.0  # objective at beta = 0
    f_tail = np.inf
    f_mark = np.inf
    gap = max(lipschitz, 1e-12)
    gap_floor = 1e-12 * max(1.0, lipschitz)
    settle_gap = 1e-9 * max(1.0, lipschitz)
    converged = False
    for t in range(_SUBGRAD_CAP):
        g = -c_hat.copy()
        value = 0.0
        for w, H in zip(neg_w, neg_hats):
            vals = H @ beta
            row = int(np.argmax(vals))
            value += float(w) * float(vals[row])
            g += w * H[row]
        value -= float(c_hat @ beta)
        if value < f_best:
            f_best = value
            beta_best = beta.copy()
        if t == _SUBGRAD_CAP - _SUBGRAD_TAIL:
            f_tail = f_best
        ng2 = float(g @ g)
        if ng2 <= 1e-28:
            converged = True  # zero subgradient: global optimum
            break
        step = (value - (f_best - gap)) / ng2
        beta = beta - step * g
        norm = float(np.linalg.norm(beta))
        if norm > 1.0:
            beta /= norm
        # Halving every 50 iterations reaches the 1e-9 precision scale
        # within ~1500 iterations, leaving the rest of the budget to polish.
        if (t + 1) % 50 == 0:
            gap = max(gap * 0.5, gap_floor)
        if (t + 1) % 250 == 0:
            # Once the target stops moving and the best value has settled,
            # further iterations cannot add measurable precision.
            if gap <= settle_gap and f_mark - f_best <= 1e-12 * (1.0 + abs(f_best)):
                converged = True
                break
            f_mark = f_best
    alpha = basis @ (beta_best / scale)
    quad = float(alpha @ gram.matrix @ alpha)
    if quad > 1.0:
        alpha = alpha / np.sqrt(quad)
    objective = _linearized_objective(alpha, c, neg_idx, crosses, d)
    if not converged and f_tail - f_best > 1e-7 * (1.0 + abs(f_best)):
        raise SolverError(
            "norm-ball subproblem still improving at the iteration cap",
            best=(alpha, objective),
        )
    return alpha, objective


_SOLVERS = {"op1": solve_linearized_norm_ball, "op2": solve_linearized_l1}


def _exact_objective(
    alpha: np.ndarray,
    sample: LabeledSample,
    crosses: Sequence[np.ndarray],
    d: np.ndarray,
) -> float:
    value = 0.0
    for i, C in enumerate(crosses):
        value -= float(d[i]) * float(sample.labels[i]) * float(np.max(C @ alpha))
    return value


def dc_weak_learn(
    sample: LabeledSample,
    gram: GramMatrix,
    d: np.ndarray,
    config: WeakLearnConfig,
) -> WeakLearnResult:
    """Run the DC weak learner for one pool.

    Starting from the best one-hot coefficient vector, each iteration
    fixes the maximizing instance of every positive bag, solves the
    linearized convex subproblem for the configured variant, and stops
    when the improvement drops to ``config.epsilon`` or the iteration cap
    is reached (the latter warns but still succeeds).  In rough mode the
    initializer is returned directly.  A candidate that fails to improve
    the linearized objective (possible only through subproblem solver
    noise) is discarded, which keeps the objective trace non-increasing.
    """
    sample.require_signed()
    d = np.asarray(d, dtype=np.float64)
    if d.shape != (sample.m,):
        raise ValueError("one weight per bag is required")
    crosses = [_cross(gram, bag) for bag in sample.bags]
    pos_idx = [i for i in range(sample.m) if sample.labels[i] == 1]
    solver = _SOLVERS[config.variant]

    alpha = init_one_hot(sample, gram, d, negative=config.negative_init).coefficients
    f_prev = _exact_objective(alpha, sample, crosses, d)
    trace = [f_prev]
    iterations = 0
    converged = True
    if not config.rough:
        converged = False
        for _ in range(config.max_iterations):
            iterations += 1
            maximizers = {i: int(np.argmax(crosses[i] @ alpha)) for i in pos_idx}
            try:
                if config.variant == "op2":
                    candidate, f_cand = solver(sample, gram, d, maximizers, hint=alpha)
                else:
                    candidate, f_cand = solver(sample, gram, d, maximizers)
            except SolverError as exc:
                raise SolverError(
                    f"weak-learning subproblem failed at DC iteration {iterations}: {exc}",
                    best=exc.best,
                ) from exc
            c = _positive_gradient(crosses, d, maximizers)
            neg_idx = [i for i in range(sample.m) if sample.labels[i] == -1 and d[i] > 0.0]
            incumbent_q = _linearized_objective(alpha, c, neg_idx, crosses, d)
            if f_cand <= incumbent_q + 1e-12:
                alpha = candidate
                f_t = f_cand
            else:
                f_t = incumbent_q
            trace.append(f_t)
            if f_prev - f_t <= config.epsilon:
                converged = True
                f_prev = f_t
                break
            f_prev = f_t
        if not converged:
            warnings.warn(
                "weak learner hit the DC iteration cap before converging",
                RuntimeWarning,
                stacklevel=2,
            )
    shapelet = Shapelet(gram.pool.length, alpha, gram.pool)
    bag_values = np.array([float(np.max(C @ alpha)) for C in crosses])
    e = float(np.sum(d * sample.labels * bag_values))
    return WeakLearnResult(
        shapelet=shapelet,
        objective=trace[-1],
        objectives=tuple(trace),
        iterations=iterations,
        converged=converged,
        bag_values=bag_values,
        edge=e,
    )


def best_over_lengths(
    sample: LabeledSample,
    grams: Mapping[int, GramMatrix],
    d: np.ndarray,
    config: WeakLearnConfig,
) -> WeakLearnResult:
    """Run the weak learner once per pool length and keep the best.

    Lengths are tried in ascending order and the result with the largest
    edge (smallest objective) wins; exact ties keep the smallest length.
    Individual lengths may fail as long as at least one succeeds.
    """
    if not grams:
        raise ValueError("at least one pool length is required")
    best: WeakLearnResult | None = None
    failures: list[str] = []
    for length in sorted(grams):
        try:
            result = dc_weak_learn(sample, grams[length], d, config)
        except SolverError as exc:
            failures.append(f"length {length}: {exc}")
            continue
        if best is None or result.edge > best.edge:
            best = result
    if best is None:
        raise SolverError("weak learning failed for every length: " + "; ".join(failures))
    return best
