"""Brute-force oracles for tests.

These deliberately re-derive every quantity from first principles (their
own kernel arithmetic, exhaustive grids, exhaustive vertex enumeration)
and share no code with the production optimizers, so drift between the
solvers and the definitions they implement is caught.  They only handle
tiny instances.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .bags import LabeledSample
from .kernels import GramMatrix
from .lp import LinearProgram

__all__ = ["grid_weak_objective_oracle", "OracleLpResult", "lp_vertex_oracle"]

_FEAS_TOL = 1e-9


def _oracle_kernel(kind: str, sigma2: float | None, X: np.ndarray, Z: np.ndarray) -> np.ndarray:
    # Independent kernel arithmetic: plain loops over squared distances.
    out = np.empty((X.shape[0], Z.shape[0]))
    for a in range(X.shape[0]):
        for b in range(Z.shape[0]):
            if kind == "linear":
                out[a, b] = float(np.dot(X[a], Z[b]))
            else:
                diff = X[a] - Z[b]
                out[a, b] = math.exp(-float(np.dot(diff, diff)) / (X.shape[1] * sigma2))
    return out


def grid_weak_objective_oracle(
    sample: LabeledSample,
    gram: GramMatrix,
    d: np.ndarray,
    constraint: str,
    step: float = 0.01,
) -> tuple[np.ndarray, float]:
    """Exhaustively minimize the exact weak-learning objective on a grid.

    Scans coefficient vectors over the grid ``{-1, -1+step, ..., 1}^p``
    restricted to the feasible set (``constraint`` is ``"l1"`` for the l1
    ball or ``"ellipsoid"`` for the kernel-norm ball) and evaluates
    ``-sum_i d_i y_i max_x K(., x) @ alpha`` exactly.

    Refuses pools with more than three instances.
    """
    if constraint not in ("l1", "ellipsoid"):
        raise ValueError("constraint must be 'l1' or 'ellipsoid'")
    pool = gram.pool
    p = pool.size
    if p > 3:
        raise ValueError(f"refusing a grid over {p} pool dimensions (limit 3)")
    d = np.asarray(d, dtype=np.float64)
    kind, sigma2 = gram.spec.kind, gram.spec.sigma2

    crosses = [
        _oracle_kernel(kind, sigma2, bag.instances(pool.length), pool.vectors)
        for bag in sample.bags
    ]
    G = _oracle_kernel(kind, sigma2, pool.vectors, pool.vectors)

    axis = np.arange(-1.0, 1.0 + step / 2.0, step)
    grids = np.meshgrid(*([axis] * p), indexing="ij")
    points = np.stack([g.ravel() for g in grids], axis=1)
    if constraint == "l1":
        feasible = np.abs(points).sum(axis=1) <= 1.0 + 1e-12
    else:
        feasible = np.einsum("ij,jk,ik->i", points, G, points) <= 1.0 + 1e-12
    points = points[feasible]

    y = sample.labels.astype(np.float64)
    best_value = np.inf
    best_alpha = None
    chunk = 200_000
    for start in range(0, points.shape[0], chunk):
        block = points[start : start + chunk]
        total = np.zeros(block.shape[0])
        for i, C in enumerate(crosses):
            total -= d[i] * y[i] * np.max(block @ C.T, axis=1)
        local = int(np.argmin(total))
        if total[local] < best_value:
            best_value = float(total[local])
            best_alpha = block[local].copy()
    assert best_alpha is not None
    return best_alpha, best_value


@dataclass(frozen=True)
class OracleLpResult:
    """Status and exact optimum from vertex enumeration."""

    status: str
    objective: float | None = None


def _active_candidates(lp: LinearProgram) -> tuple[list[tuple[np.ndarray, float]], list[tuple[np.ndarray, float]]]:
    n = lp.n
    forced: list[tuple[np.ndarray, float]] = []
    optional: list[tuple[np.ndarray, float]] = []
    if lp.A_eq is not None:
        for row, rhs in zip(lp.A_eq, lp.b_eq):
            forced.append((row, float(rhs)))
    if lp.A_ub is not None:
        for row, rhs in zip(lp.A_ub, lp.b_ub):
            optional.append((row, float(rhs)))
    for j, (lo, hi) in enumerate(lp.bounds):
        e = np.zeros(n)
        e[j] = 1.0
        if lo is not None and np.isfinite(lo):
            optional.append((e, float(lo)))
        if hi is not None and np.isfinite(hi):
            optional.append((e.copy(), float(hi)))
    return forced, optional


def _feasible(lp: LinearProgram, x: np.ndarray) -> bool:
    if lp.A_ub is not None and np.any(lp.A_ub @ x > lp.b_ub + _FEAS_TOL):
        return False
    if lp.A_eq is not None and np.any(np.abs(lp.A_eq @ x - lp.b_eq) > _FEAS_TOL):
        return False
    for j, (lo, hi) in enumerate(lp.bounds):
        if lo is not None and x[j] < lo - _FEAS_TOL:
            return False
        if hi is not None and x[j] > hi + _FEAS_TOL:
            return False
    return True


def _enumerate_vertices(lp: LinearProgram) -> list[np.ndarray]:
    n = lp.n
    forced, optional = _active_candidates(lp)
    vertices: list[np.ndarray] = []
    need = n - len(forced)
    if need < 0:
        combos: list[tuple[int, ...]] = [()]
    else:
        combos = list(itertools.combinations(range(len(optional)), need))
    for combo in combos:
        rows = [r for r, _ in forced] + [optional[i][0] for i in combo]
        rhs = [b for _, b in forced] + [optional[i][1] for i in combo]
        A = np.array(rows, dtype=np.float64).reshape(len(rows), n)
        b = np.array(rhs, dtype=np.float64)
        if A.shape[0] != n or np.linalg.matrix_rank(A) < n:
            continue
        try:
            x = np.linalg.solve(A, b)
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(x)) and _feasible(lp, x):
            vertices.append(x)
    return vertices


def _has_improving_ray(lp: LinearProgram) -> bool:
    # A feasible LP is unbounded iff a direction r exists with c@r < 0 that
    # keeps every constraint satisfied forever.  Normalize c@r = -1 and box
    # the direction so the ray system itself has vertices to enumerate.
    n = lp.n
    ray_bounds: list[tuple[float | None, float | None]] = []
    for lo, hi in lp.bounds:
        r_lo = 0.0 if lo is not None and np.isfinite(lo) else -1.0
        r_hi = 0.0 if hi is not None and np.isfinite(hi) else 1.0
        ray_bounds.append((r_lo, r_hi))
    A_eq_rows = [lp.c]
    b_eq_vals = [-1.0]
    if lp.A_eq is not None:
        A_eq_rows.extend(list(lp.A_eq))
        b_eq_vals.extend([0.0] * lp.A_eq.shape[0])
    ray_lp = LinearProgram(
        c=np.zeros(n),
        A_ub=None if lp.A_ub is None else lp.A_ub.copy(),
        b_ub=None if lp.A_ub is None else np.zeros(lp.A_ub.shape[0]),
        A_eq=np.array(A_eq_rows),
        b_eq=np.array(b_eq_vals),
        bounds=ray_bounds,
    )
    return len(_enumerate_vertices(ray_lp)) > 0


def lp_vertex_oracle(lp: LinearProgram) -> OracleLpResult:
    """Solve a small LP by enumerating every basic feasible solution.

    Equality rows are always active; the remaining active sets are drawn
    from inequality rows and finite bounds.  Unboundedness is flagged by
    searching for an improving feasible ray.  Instances with more than six
    variables are refused.
    """
    if lp.n > 6:
        raise ValueError(f"refusing vertex enumeration over {lp.n} variables (limit 6)")
    vertices = _enumerate_vertices(lp)
    if not vertices:
        return OracleLpResult(status="infeasible")
    if _has_improving_ray(lp):
        return OracleLpResult(status="unbounded")
    values = [float(lp.c @ x) for x in vertices]
    return OracleLpResult(status="optimal", objective=min(values))
