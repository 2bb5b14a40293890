"""Kernel evaluation and Gram-matrix precomputation over instance pools.

The Gaussian kernel divides the squared distance by ``dim * sigma2`` where
``dim`` is the instance dimension, so one bandwidth setting transfers
across window lengths.  Gram matrices and per-bag cross rows are computed
once per pool and cached; all downstream optimization reads from here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bags import Bag, InstancePool
from .errors import DataError

__all__ = ["KernelSpec", "GramMatrix", "eval_kernel", "kernel_matrix", "build_gram"]

KERNEL_KINDS = ("linear", "gaussian")

# Eigenvalues of a Gram matrix below this floor are treated as null
# directions (near-duplicate pool instances make G numerically singular).
EIGENVALUE_FLOOR = 1e-10


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family and its bandwidth.

    Parameters
    ----------
    kind : {"linear", "gaussian"}
    sigma2 : float, optional
        Gaussian bandwidth (must be positive); ignored for the linear
        kernel.
    """

    kind: str
    sigma2: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in KERNEL_KINDS:
            raise DataError(f"unsupported kernel kind {self.kind!r}")
        if self.kind == "gaussian":
            if self.sigma2 is None or not np.isfinite(self.sigma2) or self.sigma2 <= 0:
                raise DataError("gaussian kernel requires sigma2 > 0")


def eval_kernel(spec: KernelSpec, x: np.ndarray, z: np.ndarray) -> float:
    """Evaluate ``K(x, z)`` for two instances of equal dimension."""
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if x.shape != z.shape or x.ndim != 1:
        raise ValueError(f"dimension mismatch: {x.shape} vs {z.shape}")
    return float(kernel_matrix(spec, x[None, :], z[None, :])[0, 0])


def kernel_matrix(spec: KernelSpec, X: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Evaluate the ``(n, p)`` matrix ``K(X[i], Z[j])``.

    Parameters
    ----------
    X : ndarray of shape (n, dim)
    Z : ndarray of shape (p, dim)
    """
    X = np.asarray(X, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    if X.ndim != 2 or Z.ndim != 2 or X.shape[1] != Z.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape} vs {Z.shape}")
    if spec.kind == "linear":
        return X @ Z.T
    dim = X.shape[1]
    sq = (
        np.einsum("ij,ij->i", X, X)[:, None]
        + np.einsum("ij,ij->i", Z, Z)[None, :]
        - 2.0 * (X @ Z.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-sq / (dim * float(spec.sigma2)))


class GramMatrix:
    """Dense kernel matrix over a pool, with cached cross rows per bag.

    Attributes
    ----------
    spec : KernelSpec
    pool : InstancePool
    matrix : ndarray of shape (p, p)
        ``matrix[a, b] = K(pool[a], pool[b])``; exactly symmetric, with a
        unit diagonal for the Gaussian kernel.
    """

    def __init__(self, spec: KernelSpec, pool: InstancePool) -> None:
        self.spec = spec
        self.pool = pool
        G = kernel_matrix(spec, pool.vectors, pool.vectors)
        G = 0.5 * (G + G.T)
        if spec.kind == "gaussian":
            np.fill_diagonal(G, 1.0)
        G.setflags(write=False)
        self.matrix = G
        self._factor: tuple[np.ndarray, np.ndarray] | None = None
        self._bag_cache: dict[int, tuple[Bag, np.ndarray]] = {}
        self._extrema_cache: dict[int, tuple[object, np.ndarray, np.ndarray]] = {}

    @property
    def size(self) -> int:
        return self.pool.size

    def cross_row(self, x: np.ndarray) -> np.ndarray:
        """Return the vector ``K(z, x)`` over the pool, in pool order."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1 or x.size != self.pool.length:
            raise ValueError(
                f"instance dimension {x.shape} does not match pool dimension {self.pool.length}"
            )
        return kernel_matrix(self.spec, x[None, :], self.pool.vectors)[0]

    def bag_cross(self, bag: Bag) -> np.ndarray:
        """Cross rows ``K(z, x)`` for every pool-dimension instance of a bag.

        The ``(n, p)`` result is cached for the lifetime of this Gram
        matrix; bags are immutable so the cache never goes stale.
        """
        key = id(bag)
        hit = self._bag_cache.get(key)
        if hit is not None:
            return hit[1]
        X = bag.instances(self.pool.length)
        C = kernel_matrix(self.spec, X, self.pool.vectors)
        C.setflags(write=False)
        self._bag_cache[key] = (bag, C)
        return C

    def bag_extrema(self, bags: list[Bag]) -> tuple[np.ndarray, np.ndarray]:
        """Per-bag columnwise max and min of the cross rows.

        Returns ``(hi, lo)`` of shape ``(m, p)`` with
        ``hi[i, j] = max_x K(z_j, x)`` over instances ``x`` of bag ``i``.
        Cached per bag list; used by the one-hot initializer.
        """
        key = id(bags)
        hit = self._extrema_cache.get(key)
        if hit is not None:
            return hit[1], hit[2]
        hi = np.empty((len(bags), self.size))
        lo = np.empty((len(bags), self.size))
        for i, bag in enumerate(bags):
            C = self.bag_cross(bag)
            hi[i] = C.max(axis=0)
            lo[i] = C.min(axis=0)
        hi.setflags(write=False)
        lo.setflags(write=False)
        self._extrema_cache[key] = (bags, hi, lo)
        return hi, lo

    def factor(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenbasis of the Gram matrix above the eigenvalue floor.

        Returns ``(basis, scale)`` where ``basis`` has one column per
        retained eigenvector and ``scale`` holds the square roots of the
        retained eigenvalues, so ``alpha = basis @ (beta / scale)`` maps the
        unit ball in ``beta`` onto the set ``alpha' G alpha <= 1``
        restricted to the row space of ``G``.
        """
        if self._factor is None:
            eigvals, eigvecs = np.linalg.eigh(self.matrix)
            keep = eigvals > EIGENVALUE_FLOOR
            self._factor = (
                np.ascontiguousarray(eigvecs[:, keep]),
                np.sqrt(eigvals[keep]),
            )
        return self._factor


def build_gram(spec: KernelSpec, pool: InstancePool) -> GramMatrix:
    """Materialize the full Gram matrix of a pool once."""
    if pool.size < 1:
        raise DataError("cannot build a Gram matrix over an empty pool")
    return GramMatrix(spec, pool)
