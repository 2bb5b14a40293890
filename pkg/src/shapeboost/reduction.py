"""Per-class k-means reduction of instance pools.

For large samples the pool of candidate expansion points grows with the
number of instances, so each class's instances are replaced by at most
``k`` cluster centers.  Classes with at most ``k`` instances pass through
verbatim.  The reduced pool lists the positive class's centers first.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .bags import InstancePool, LabeledSample
from .errors import DataError

__all__ = ["ReductionSpec", "run_kmeans", "kmeans_reduce"]


@dataclass(frozen=True)
class ReductionSpec:
    """Settings for per-class pool reduction.

    Parameters
    ----------
    k : int, default 100
        Maximum number of centers per class.
    max_iterations : int, default 100
        Lloyd iteration cap per k-means run.
    seed : int, default 0
        Base RNG seed; every (length, class, restart) combination derives
        its own deterministic stream.
    restarts : int, default 1
        Independent k-means runs per class; the lowest within-cluster sum
        of squares wins.
    snap_to_instances : bool, default False
        Replace each centroid by the nearest real instance of its class.
    """

    k: int = 100
    max_iterations: int = 100
    seed: int = 0
    restarts: int = 1
    snap_to_instances: bool = False

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.max_iterations < 1 or self.restarts < 1:
            raise ValueError("max_iterations and restarts must be at least 1")


def _seed_centers(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    # k-means++: first center uniform, then proportional to squared distance.
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # All points coincide with chosen centers; reuse uniformly.
            centers[j] = X[rng.integers(n)]
            continue
        centers[j] = X[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((X - centers[j]) ** 2, axis=1))
    return centers


def run_kmeans(
    X: np.ndarray,
    k: int,
    rng: np.random.Generator,
    max_iterations: int = 100,
) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Lloyd's algorithm with k-means++ seeding.

    Empty clusters are reseeded at the point farthest from the stale
    center.  Returns ``(centers, assignment, wcss_trace)`` where the trace
    holds the within-cluster sum of squares after each assignment step and
    is non-increasing.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if k > n:
        raise ValueError(f"k={k} exceeds the number of points {n}")
    centers = _seed_centers(X, k, rng)
    assignment = np.full(n, -1, dtype=np.int64)
    trace: list[float] = []
    for _ in range(max_iterations):
        d2 = (
            np.sum(X * X, axis=1)[:, None]
            + np.sum(centers * centers, axis=1)[None, :]
            - 2.0 * (X @ centers.T)
        )
        np.maximum(d2, 0.0, out=d2)
        new_assignment = np.argmin(d2, axis=1)
        trace.append(float(d2[np.arange(n), new_assignment].sum()))
        if np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
        for j in range(k):
            members = X[assignment == j]
            if members.shape[0] > 0:
                centers[j] = members.mean(axis=0)
            else:
                # Reseed the empty cluster at the point farthest from it.
                far = np.argmax(np.sum((X - centers[j]) ** 2, axis=1))
                centers[j] = X[far]
    return centers, assignment, trace


def _reduce_class(
    X: np.ndarray, spec: ReductionSpec, length: int, class_code: int
) -> np.ndarray:
    best_centers: np.ndarray | None = None
    best_wcss = np.inf
    for restart in range(spec.restarts):
        rng = np.random.default_rng([spec.seed, length, class_code, restart])
        centers, _, trace = run_kmeans(X, spec.k, rng, spec.max_iterations)
        if trace[-1] < best_wcss:
            best_wcss = trace[-1]
            best_centers = centers
    assert best_centers is not None
    if spec.snap_to_instances:
        d2 = (
            np.sum(best_centers * best_centers, axis=1)[:, None]
            + np.sum(X * X, axis=1)[None, :]
            - 2.0 * (best_centers @ X.T)
        )
        best_centers = X[np.argmin(d2, axis=1)]
    return best_centers


def kmeans_reduce(sample: LabeledSample, length: int, spec: ReductionSpec) -> InstancePool:
    """Build a reduced pool of per-class k-means centers.

    Parameters
    ----------
    sample : LabeledSample
        Signed sample (labels -1/+1).
    length : int
        Instance dimension to pool.
    spec : ReductionSpec

    Returns
    -------
    InstancePool
        Positive-class centers first, then negative-class centers; classes
        with at most ``k`` instances contribute their instances verbatim.
    """
    sample.require_signed()
    rows: list[np.ndarray] = []
    tags: list[str] = []
    for label in (1, -1):
        blocks: list[np.ndarray] = []
        block_tags: list[str] = []
        for i, bag in enumerate(sample.bags):
            if sample.labels[i] != label or not bag.has_length(length):
                continue
            X = bag.instances(length)
            blocks.append(X)
            block_tags.extend(f"bag{i}[{j}]" for j in range(X.shape[0]))
        if not blocks:
            warnings.warn(
                f"class {label:+d} has no instances of dimension {length}",
                RuntimeWarning,
                stacklevel=2,
            )
            continue
        X = np.vstack(blocks)
        if X.shape[0] <= spec.k:
            rows.append(X)
            tags.extend(block_tags)
        else:
            centers = _reduce_class(X, spec, length, 0 if label == 1 else 1)
            rows.append(centers)
            tags.extend(f"centroid[{label:+d}]{c}" for c in range(centers.shape[0]))
    if not rows:
        raise DataError(f"no instances of dimension {length} in the sample")
    return InstancePool(length, np.vstack(rows), sources=tags)
