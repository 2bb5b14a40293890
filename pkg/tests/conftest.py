"""Shared builders for the test suite."""

from __future__ import annotations

import pathlib

import numpy as np
import pytest

from shapeboost import Bag, LabeledSample, build_gram, build_pool
from shapeboost.kernels import KernelSpec

DATA_DIR = pathlib.Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> pathlib.Path:
    return DATA_DIR


def random_bag_weights(rng: np.random.Generator, m: int, nu: float) -> np.ndarray:
    """Draw a random distribution inside the box [0, 1/(nu*m)] and the simplex.

    Falls back to the uniform distribution when rejection sampling fails
    (e.g. nu = 1, where uniform is the only feasible point).
    """
    cap = 1.0 / (nu * m)
    for _ in range(200):
        d = rng.dirichlet(np.full(m, 1.5))
        if d.max() <= cap:
            return d
    return np.full(m, 1.0 / m)


def make_weaklearn_problem(
    rng: np.random.Generator,
    *,
    n_pos: int = 2,
    n_neg: int = 2,
    dim: int = 2,
    pool_size: int | None = None,
    max_instances: int = 3,
    singleton_positives: bool = False,
    kernel: str = "gaussian",
    sigma2: float = 1.0,
    nu: float = 0.5,
) -> tuple[LabeledSample, "object", np.ndarray]:
    """Build a small random weak-learning instance: (sample, gram, d)."""
    bags = []
    labels = []
    for _ in range(n_pos):
        n = 1 if singleton_positives else int(rng.integers(1, max_instances + 1))
        bags.append(Bag(rng.normal(size=(n, dim)) * 1.5))
        labels.append(1)
    for _ in range(n_neg):
        n = int(rng.integers(1, max_instances + 1))
        bags.append(Bag(rng.normal(size=(n, dim)) * 1.5))
        labels.append(-1)
    sample = LabeledSample(bags, labels)
    pool = build_pool(sample, dim)
    if pool_size is not None and pool.size > pool_size:
        from shapeboost.bags import InstancePool

        keep = rng.choice(pool.size, size=pool_size, replace=False)
        pool = InstancePool(dim, pool.vectors[np.sort(keep)])
    gram = build_gram(KernelSpec(kernel, sigma2 if kernel == "gaussian" else None), pool)
    d = random_bag_weights(rng, sample.m, nu)
    return sample, gram, d


def planted_series(
    rng: np.random.Generator,
    n: int = 200,
    length: int = 60,
    pattern_length: int = 10,
    amplitude: float = 1.0,
    noise: float = 0.1,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Generate noise series where positives carry a bump at a random offset.

    Returns (series, labels in {-1,+1}, planted start per series; -1 for
    negatives).
    """
    t = np.arange(pattern_length)
    pattern = amplitude * np.sin(np.pi * (t + 0.5) / pattern_length)
    X = rng.normal(scale=noise, size=(n, length))
    y = np.where(np.arange(n) % 2 == 0, 1, -1)
    starts = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        if y[i] == 1:
            s = int(rng.integers(0, length - pattern_length + 1))
            X[i, s : s + pattern_length] += pattern
            starts[i] = s
    perm = rng.permutation(n)
    return X[perm], y[perm], starts[perm]


def random_bounded_lp(rng: np.random.Generator):
    """Random feasible bounded LP with at most 6 variables and 8 rows.

    Finite boxes keep it bounded; inequality right-hand sides are padded
    around an interior point and any equality row passes through it, so
    the program is always feasible.
    """
    from shapeboost.lp import LinearProgram

    n = int(rng.integers(1, 7))
    lo = rng.uniform(-2.0, 0.0, size=n)
    hi = lo + rng.uniform(0.5, 3.0, size=n)
    c = rng.normal(size=n)
    x0 = rng.uniform(lo, hi)
    A_ub = b_ub = None
    r = int(rng.integers(0, 5))
    if r:
        A_ub = rng.normal(size=(r, n))
        b_ub = A_ub @ x0 + rng.uniform(0.05, 1.0, size=r)
    A_eq = b_eq = None
    if n >= 2 and rng.random() < 0.4:
        A_eq = rng.normal(size=(1, n))
        b_eq = A_eq @ x0
    bounds = [(float(a), float(b)) for a, b in zip(lo, hi)]
    return LinearProgram(c=c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds)


def assert_duality_invariants(diag, nu: float, m: int) -> None:
    """Check the audit trail of one boosting run.

    Gamma must be non-decreasing, the recovered primal objective must
    match the final gamma to 1e-6, hypothesis weights must sum to one,
    and every bag-weight iterate must stay inside its box and simplex.
    """
    gammas = np.asarray(diag.gammas)
    assert gammas.size >= 1
    assert np.all(np.diff(gammas) >= -1e-9), "gamma decreased between iterations"
    rec = diag.recovery
    assert rec is not None
    assert abs(rec.objective - gammas[-1]) <= 1e-6
    assert abs(rec.w.sum() - 1.0) <= 1e-6
    assert np.all(rec.w >= 0.0)
    cap = 1.0 / (nu * m)
    for d in diag.weights_history:
        assert d.shape == (m,)
        assert np.all(d >= -1e-9)
        assert np.all(d <= cap + 1e-9)
        assert abs(d.sum() - 1.0) <= 1e-7
