"""Scikit-learn style estimators and the shared training pipeline.

Two entry points cover the two tasks: :class:`ShapeletSeriesClassifier`
consumes equal-length time series (each row becomes a bag of sliding
windows) and :class:`ShapeletBagClassifier` consumes ready-made bags of
feature vectors.  Both are binary classifiers that expand to one-vs-rest
automatically when more than two classes are present.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import unique_labels
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .bags import Bag, InstancePool, LabeledSample, build_pool, make_bag_from_series
from .boosting import BoostConfig, BoostDiagnostics, lpboost_train
from .errors import DataError
from .kernels import KernelSpec, build_gram
from .model import BoostModel, predict_bags, score_bags
from .reduction import ReductionSpec, kmeans_reduce
from .weaklearn import WeakLearnConfig

__all__ = [
    "DEFAULT_LENGTH_FRACTIONS",
    "resolve_lengths",
    "series_to_bags",
    "prepare_pools",
    "prepare_grams",
    "train_signed",
    "ShapeletSeriesClassifier",
    "ShapeletBagClassifier",
]

DEFAULT_LENGTH_FRACTIONS = (0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5)


def resolve_lengths(
    lengths: Iterable[float | int] | None, series_length: int
) -> tuple[int, ...]:
    """Turn requested window lengths into concrete, deduplicated values.

    Fractions in (0, 1] resolve to ``max(2, floor(fraction * L))``;
    integer values pass through unchanged and must lie in ``[1, L]``.
    ``None`` selects the default fraction ladder 0.05..0.5.
    """
    if lengths is None:
        lengths = DEFAULT_LENGTH_FRACTIONS
    resolved: list[int] = []
    for value in lengths:
        v = float(value)
        if isinstance(value, float) and 0 < v <= 1.0:
            resolved.append(max(2, math.floor(v * series_length)))
        elif v.is_integer() and v >= 1:
            resolved.append(int(v))
        else:
            raise DataError(f"invalid window length {value!r}")
    out = sorted(set(resolved))
    for length in out:
        if length < 1 or length > series_length:
            raise DataError(
                f"window length {length} invalid for series of length {series_length}"
            )
    return tuple(out)


def series_to_bags(
    X: np.ndarray, lengths: Sequence[int], znorm: bool = False
) -> list[Bag]:
    """Convert each series row into a bag of sliding windows."""
    return [make_bag_from_series(row, lengths, znorm=znorm) for row in np.asarray(X)]


def prepare_pools(
    sample: LabeledSample,
    lengths: Sequence[int],
    k: int | None,
    kmeans_iterations: int = 100,
    kmeans_restarts: int = 1,
    snap_centers: bool = False,
    seed: int = 0,
) -> dict[int, InstancePool]:
    """Build one (optionally k-means reduced) pool per length.

    ``k=None`` (or 0) skips reduction and pools every instance.
    """
    pools: dict[int, InstancePool] = {}
    for length in lengths:
        if not k:
            pools[length] = build_pool(sample, length)
        else:
            pools[length] = kmeans_reduce(
                sample,
                length,
                ReductionSpec(
                    k=k,
                    max_iterations=kmeans_iterations,
                    seed=seed,
                    restarts=kmeans_restarts,
                    snap_to_instances=snap_centers,
                ),
            )
    return pools


def prepare_grams(spec: KernelSpec, pools: dict[int, InstancePool]):
    """Materialize one Gram matrix per pool."""
    return {length: build_gram(spec, pool) for length, pool in pools.items()}


def train_signed(
    bags: Sequence[Bag],
    y: np.ndarray,
    *,
    lengths: Sequence[int],
    nu: float,
    kernel: str = "gaussian",
    sigma2: float = 1.0,
    variant: str = "op2",
    k: int | None = 100,
    kmeans_iterations: int = 100,
    kmeans_restarts: int = 1,
    snap_centers: bool = False,
    epsilon: float = 1e-4,
    delta_stop: float = 1e-6,
    max_columns: int = 200,
    negative_init: bool = False,
    rough: bool = False,
    restarts: int = 1,
    seed: int = 0,
    grams=None,
) -> tuple[BoostModel, BoostDiagnostics, float]:
    """Train one signed (-1/+1) model, optionally with restarts.

    With ``restarts > 1`` the pool reduction is reseeded per restart and
    the model with the best training accuracy wins.  A prebuilt ``grams``
    mapping bypasses pool construction entirely (used by the tuning loop,
    which shares Gram matrices across settings); it forces one restart.

    Returns ``(model, diagnostics, training_accuracy)``.
    """
    sample = LabeledSample(bags, y)
    sample.require_signed()
    spec = KernelSpec(kernel, sigma2 if kernel == "gaussian" else None)
    best: tuple[BoostModel, BoostDiagnostics, float] | None = None
    n_restarts = 1 if grams is not None else max(1, int(restarts))
    for restart in range(n_restarts):
        if grams is None:
            pools = prepare_pools(
                sample,
                lengths,
                k,
                kmeans_iterations=kmeans_iterations,
                kmeans_restarts=kmeans_restarts,
                snap_centers=snap_centers,
                seed=seed + 1_000_003 * restart,
            )
            run_grams = prepare_grams(spec, pools)
        else:
            run_grams = grams
        config = BoostConfig(
            nu=nu,
            lengths=tuple(sorted(run_grams)),
            weak=WeakLearnConfig(
                variant=variant,
                epsilon=epsilon,
                rough=rough,
                negative_init=negative_init,
            ),
            delta_stop=delta_stop,
            max_columns=max_columns,
        )
        model, diag = lpboost_train(sample, run_grams, config)
        accuracy = float(np.mean(predict_bags(model, sample.bags) == sample.labels))
        if best is None or accuracy > best[2]:
            meta = dict(model.meta)
            meta.update(
                {
                    "nu": nu,
                    "kernel": kernel,
                    "sigma2": sigma2 if kernel == "gaussian" else None,
                    "variant": variant,
                    "seed": seed,
                    "restart": restart,
                    "columns": diag.n_columns,
                    "training_accuracy": accuracy,
                }
            )
            best = (
                BoostModel(kernel=model.kernel, nu=model.nu, terms=model.terms, meta=meta),
                diag,
                accuracy,
            )
    assert best is not None
    return best


class _BoostMixin:
    """Shared one-vs-rest fitting and scoring over prepared bags."""

    def _fit_bags(self, bags: list[Bag], y: np.ndarray) -> None:
        self.classes_ = unique_labels(y)
        if self.classes_.size < 2:
            raise ValueError("training requires at least two classes")
        seed = 0 if self.random_state is None else int(self.random_state)
        params = dict(
            lengths=self.lengths_,
            nu=self.nu,
            kernel=self.kernel,
            sigma2=self.sigma2,
            variant=self.variant,
            k=self.k,
            kmeans_iterations=self.kmeans_iterations,
            kmeans_restarts=self.kmeans_restarts,
            snap_centers=self.snap_centers,
            epsilon=self.epsilon,
            delta_stop=self.delta_stop,
            max_columns=self.max_columns,
            negative_init=self.negative_init,
            restarts=self.restarts,
            seed=seed,
        )
        self.models_: list[BoostModel] = []
        self.diagnostics_: list[BoostDiagnostics] = []
        if self.classes_.size == 2:
            signed = np.where(y == self.classes_[0], -1, 1)
            model, diag, accuracy = train_signed(bags, signed, **params)
            self.models_.append(model)
            self.diagnostics_.append(diag)
            self.training_accuracy_ = accuracy
        else:
            correct = np.zeros(len(bags), dtype=bool)
            scores = np.empty((len(bags), self.classes_.size))
            for idx, label in enumerate(self.classes_):
                signed = np.where(y == label, 1, -1)
                model, diag, _ = train_signed(bags, signed, **params)
                self.models_.append(model)
                self.diagnostics_.append(diag)
                scores[:, idx] = score_bags(model, bags)
            correct = self.classes_[np.argmax(scores, axis=1)] == y
            self.training_accuracy_ = float(np.mean(correct))

    def _decision_bags(self, bags: list[Bag]) -> np.ndarray:
        if self.classes_.size == 2:
            return score_bags(self.models_[0], bags)
        return np.column_stack([score_bags(m, bags) for m in self.models_])

    def _predict_bags(self, bags: list[Bag]) -> np.ndarray:
        scores = self._decision_bags(bags)
        if self.classes_.size == 2:
            return np.where(scores >= 0.0, self.classes_[1], self.classes_[0])
        return self.classes_[np.argmax(scores, axis=1)]


class ShapeletSeriesClassifier(_BoostMixin, ClassifierMixin, BaseEstimator):
    """Time-series classifier over bags of sliding-window subsequences.

    Parameters
    ----------
    lengths : sequence of float or int, optional
        Window lengths; fractions in (0, 1) are taken relative to the
        series length (default ladder 0.05..0.5).
    nu : float, default 0.2
        Soft-margin parameter of the boosting master.
    kernel : {"gaussian", "linear"}, default "gaussian"
    sigma2 : float, default 1.0
        Gaussian bandwidth (scaled by the window length internally).
    variant : {"op1", "op2"}, default "op2"
        Weak-learner feasible set: kernel-norm ball or sparse l1 ball.
    k : int or None, default 100
        Per-class k-means budget for pool reduction; ``None`` pools all
        subsequences.
    znorm : bool, default False
        Standardize each window before training and prediction.
    restarts : int, default 1
        Full training restarts (reseeded pool reduction); best training
        accuracy wins.
    random_state : int, optional
        Base seed for every stochastic component.

    Attributes
    ----------
    classes_ : ndarray
        Sorted class labels; more than two trigger one-vs-rest training.
    models_ : list of BoostModel
        One model for binary problems, one per class otherwise.
    training_accuracy_ : float
    """

    def __init__(
        self,
        lengths=None,
        nu: float = 0.2,
        kernel: str = "gaussian",
        sigma2: float = 1.0,
        variant: str = "op2",
        k: int | None = 100,
        kmeans_iterations: int = 100,
        kmeans_restarts: int = 1,
        snap_centers: bool = False,
        epsilon: float = 1e-4,
        delta_stop: float = 1e-6,
        max_columns: int = 200,
        znorm: bool = False,
        negative_init: bool = False,
        restarts: int = 1,
        random_state: int | None = None,
    ) -> None:
        self.lengths = lengths
        self.nu = nu
        self.kernel = kernel
        self.sigma2 = sigma2
        self.variant = variant
        self.k = k
        self.kmeans_iterations = kmeans_iterations
        self.kmeans_restarts = kmeans_restarts
        self.snap_centers = snap_centers
        self.epsilon = epsilon
        self.delta_stop = delta_stop
        self.max_columns = max_columns
        self.znorm = znorm
        self.negative_init = negative_init
        self.restarts = restarts
        self.random_state = random_state

    def fit(self, X, y) -> "ShapeletSeriesClassifier":
        """Fit on series rows ``X`` of shape (n_samples, series_length)."""
        X, y = check_X_y(X, y)
        self.n_features_in_ = X.shape[1]
        self.lengths_ = resolve_lengths(self.lengths, X.shape[1])
        bags = series_to_bags(X, self.lengths_, znorm=self.znorm)
        self._fit_bags(bags, y)
        return self

    def _bags(self, X) -> list[Bag]:
        check_is_fitted(self, "models_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        return series_to_bags(X, self.lengths_, znorm=self.znorm)

    def decision_function(self, X) -> np.ndarray:
        """Ensemble scores: shape (n,) for binary, (n, n_classes) otherwise."""
        return self._decision_bags(self._bags(X))

    def predict(self, X) -> np.ndarray:
        """Predicted class labels."""
        return self._predict_bags(self._bags(X))


class ShapeletBagClassifier(_BoostMixin, ClassifierMixin, BaseEstimator):
    """Multiple-instance classifier over bags of feature vectors.

    ``fit`` takes a list of 2-d arrays, one per bag (rows are instances),
    plus one label per bag.  Parameters match
    :class:`ShapeletSeriesClassifier` minus the series-specific ones.
    """

    def __init__(
        self,
        nu: float = 0.2,
        kernel: str = "gaussian",
        sigma2: float = 1.0,
        variant: str = "op2",
        k: int | None = 100,
        kmeans_iterations: int = 100,
        kmeans_restarts: int = 1,
        snap_centers: bool = False,
        epsilon: float = 1e-4,
        delta_stop: float = 1e-6,
        max_columns: int = 200,
        negative_init: bool = False,
        restarts: int = 1,
        random_state: int | None = None,
    ) -> None:
        self.nu = nu
        self.kernel = kernel
        self.sigma2 = sigma2
        self.variant = variant
        self.k = k
        self.kmeans_iterations = kmeans_iterations
        self.kmeans_restarts = kmeans_restarts
        self.snap_centers = snap_centers
        self.epsilon = epsilon
        self.delta_stop = delta_stop
        self.max_columns = max_columns
        self.negative_init = negative_init
        self.restarts = restarts
        self.random_state = random_state

    @staticmethod
    def _as_bags(bags) -> list[Bag]:
        out: list[Bag] = []
        for b in bags:
            if isinstance(b, Bag):
                out.append(b)
            else:
                arr = np.asarray(b, dtype=np.float64)
                if arr.ndim != 2:
                    raise DataError("each bag must be a 2-d array of instances")
                out.append(Bag(list(arr)))
        if not out:
            raise DataError("at least one bag is required")
        return out

    def fit(self, bags, y) -> "ShapeletBagClassifier":
        """Fit on a list of per-bag instance matrices."""
        prepared = self._as_bags(bags)
        y = np.asarray(y)
        if y.shape != (len(prepared),):
            raise DataError("one label per bag is required")
        lengths = sorted({l for bag in prepared for l in bag.lengths})
        self.lengths_ = tuple(lengths)
        self._fit_bags(prepared, y)
        return self

    def decision_function(self, bags) -> np.ndarray:
        check_is_fitted(self, "models_")
        return self._decision_bags(self._as_bags(bags))

    def predict(self, bags) -> np.ndarray:
        check_is_fitted(self, "models_")
        return self._predict_bags(self._as_bags(bags))
