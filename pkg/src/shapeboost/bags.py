"""Bags, labeled samples, instance pools, and file ingestion.

A bag is a finite set of fixed-dimension instances; a time series becomes a
bag of sliding-window subsequences, one group per requested window length.
This module also owns the two on-disk formats: the time-series CSV
(``label,v1,...,vL``) and the multiple-instance JSON-lines format
(``{"label": <int>, "instances": [[...], ...]}``).
"""

from __future__ import annotations

import json
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

__all__ = [
    "Bag",
    "LabeledSample",
    "InstancePool",
    "make_bag_from_series",
    "build_pool",
    "signed_labels",
    "load_timeseries_csv",
    "save_timeseries_csv",
    "load_mil_jsonl",
    "save_mil_jsonl",
]


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


class Bag:
    """A nonempty set of instances grouped by dimension.

    Parameters
    ----------
    instances : iterable of 1-d arrays
        Instance vectors.  Vectors of equal dimension form one length
        group; order within a group is preserved.
    origins : iterable of int, optional
        One tag per instance recording where it came from (window start
        for subsequences, instance index otherwise).  Defaults to the
        running index within each length group.
    """

    def __init__(
        self,
        instances: Iterable[np.ndarray],
        origins: Iterable[int] | None = None,
    ) -> None:
        groups: dict[int, list[np.ndarray]] = {}
        tags: dict[int, list[int]] = {}
        counts: dict[int, int] = {}
        origin_list = None if origins is None else list(origins)
        n_seen = 0
        for idx, raw in enumerate(instances):
            vec = np.asarray(raw, dtype=np.float64)
            if vec.ndim != 1 or vec.size < 1:
                raise DataError(f"instance {idx}: expected a nonempty 1-d vector")
            if not np.all(np.isfinite(vec)):
                raise DataError(f"instance {idx}: non-finite value")
            length = vec.size
            groups.setdefault(length, []).append(vec)
            if origin_list is None:
                tag = counts.get(length, 0)
                counts[length] = tag + 1
            else:
                tag = int(origin_list[idx])
            tags.setdefault(length, []).append(tag)
            n_seen += 1
        if n_seen == 0:
            raise DataError("a bag must contain at least one instance")
        self._groups = {
            length: _readonly(np.vstack(rows)) for length, rows in groups.items()
        }
        self._origins = {
            length: _readonly_int(np.asarray(tags[length], dtype=np.int64))
            for length in groups
        }
        self._n = n_seen

    @property
    def lengths(self) -> tuple[int, ...]:
        """Instance dimensions present in the bag, ascending."""
        return tuple(sorted(self._groups))

    def __len__(self) -> int:
        return self._n

    def has_length(self, length: int) -> bool:
        return length in self._groups

    def instances(self, length: int) -> np.ndarray:
        """Return the ``(n, length)`` matrix of instances of one dimension."""
        try:
            return self._groups[length]
        except KeyError:
            raise DataError(f"bag has no instances of dimension {length}") from None

    def origins(self, length: int) -> np.ndarray:
        """Return the origin tag of each instance of one dimension."""
        self.instances(length)
        return self._origins[length]


def _readonly_int(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.int64)
    a.setflags(write=False)
    return a


class LabeledSample:
    """A sample of labeled bags.

    Labels are integers; training entry points require the signed form
    (every label in ``{-1, +1}``), while multi-class label sets are kept
    verbatim for one-vs-rest dispatch.
    """

    def __init__(self, bags: Sequence[Bag], labels: Iterable[int]) -> None:
        bags = list(bags)
        y = np.asarray(list(labels), dtype=np.int64)
        if len(bags) < 1:
            raise DataError("a sample must contain at least one bag")
        if y.shape != (len(bags),):
            raise DataError(
                f"label count {y.size} does not match bag count {len(bags)}"
            )
        self.bags: list[Bag] = bags
        self.labels: np.ndarray = _readonly_int(y)

    @property
    def m(self) -> int:
        """Number of bags."""
        return len(self.bags)

    def is_signed(self) -> bool:
        return bool(np.all(np.isin(self.labels, (-1, 1))))

    def require_signed(self) -> None:
        if not self.is_signed():
            raise DataError("sample labels must be -1/+1 at this stage")


def signed_labels(labels: np.ndarray) -> np.ndarray:
    """Map a two-class label vector onto ``{-1, +1}``.

    The smaller of the two class ids becomes -1 and the larger becomes +1;
    labels already in ``{-1, +1}`` are returned unchanged.  More or fewer
    than two distinct values is an error.
    """
    y = np.asarray(labels, dtype=np.int64)
    values = np.unique(y)
    if values.size != 2:
        raise DataError(
            f"expected exactly two classes, found {values.size}: {values.tolist()}"
        )
    return np.where(y == values[0], -1, 1).astype(np.int64)


def make_bag_from_series(
    series: np.ndarray,
    lengths: Iterable[int],
    znorm: bool = False,
) -> Bag:
    """Convert one time series into a bag of sliding-window subsequences.

    Parameters
    ----------
    series : array of shape (L,)
        The raw time series.
    lengths : iterable of int
        Window lengths; for each length ``l`` the bag receives the
        ``L - l + 1`` windows in index order, tagged with their 0-based
        start position.
    znorm : bool, default False
        Standardize each window to zero mean and unit variance
        (constant windows become all-zero).

    Returns
    -------
    Bag
    """
    tau = np.asarray(series, dtype=np.float64)
    if tau.ndim != 1 or tau.size < 1:
        raise DataError("series must be a nonempty 1-d vector")
    if not np.all(np.isfinite(tau)):
        raise DataError("series contains a non-finite value")
    L = tau.size
    wanted = sorted(set(int(l) for l in lengths))
    if not wanted:
        raise DataError("at least one window length is required")
    vecs: list[np.ndarray] = []
    starts: list[int] = []
    for length in wanted:
        if length < 1 or length > L:
            raise DataError(f"invalid window length {length} for series of length {L}")
        windows = np.lib.stride_tricks.sliding_window_view(tau, length).copy()
        if znorm:
            mean = windows.mean(axis=1, keepdims=True)
            std = windows.std(axis=1, keepdims=True)
            centered = windows - mean
            windows = np.where(std > 1e-12, centered / np.where(std > 1e-12, std, 1.0), 0.0)
        vecs.extend(windows)
        starts.extend(range(L - length + 1))
    return Bag(vecs, origins=starts)


class InstancePool:
    """An ordered, exactly deduplicated set of same-dimension instances.

    The index of an instance in the pool is permanent: shapelet
    coefficient ``j`` always refers to ``vectors[j]``.
    """

    def __init__(
        self,
        length: int,
        vectors: np.ndarray,
        sources: Sequence[str] | None = None,
    ) -> None:
        V = np.asarray(vectors, dtype=np.float64)
        if V.ndim != 2 or V.shape[0] < 1:
            raise DataError("pool needs at least one instance")
        if V.shape[1] != length:
            raise DataError(
                f"pool vectors have dimension {V.shape[1]}, expected {length}"
            )
        if not np.all(np.isfinite(V)):
            raise DataError("pool contains a non-finite value")
        seen: set[bytes] = set()
        keep: list[int] = []
        for i in range(V.shape[0]):
            key = V[i].tobytes()
            if key not in seen:
                seen.add(key)
                keep.append(i)
        self.length = int(length)
        self.vectors = _readonly(V[keep])
        if sources is None:
            self.sources: tuple[str, ...] = tuple(f"instance[{i}]" for i in keep)
        else:
            if len(sources) != V.shape[0]:
                raise DataError("one source tag per vector is required")
            self.sources = tuple(sources[i] for i in keep)

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    def __len__(self) -> int:
        return self.size


def build_pool(sample: LabeledSample, length: int) -> InstancePool:
    """Collect every length-``length`` instance of the sample into a pool.

    Instances are taken in (bag index, instance index) order; exact
    duplicates keep their first occurrence.
    """
    rows: list[np.ndarray] = []
    tags: list[str] = []
    for i, bag in enumerate(sample.bags):
        if not bag.has_length(length):
            continue
        X = bag.instances(length)
        rows.append(X)
        tags.extend(f"bag{i}[{j}]" for j in range(X.shape[0]))
    if not rows:
        raise DataError(f"no instances of dimension {length} in the sample")
    return InstancePool(length, np.vstack(rows), sources=tags)


# ---------------------------------------------------------------------------
# File formats


def load_timeseries_csv(path: str) -> tuple[np.ndarray, np.ndarray]:
    """Load a ``label,v1,...,vL`` CSV file.

    Returns
    -------
    series : ndarray of shape (n, L)
    labels : ndarray of int
        Mapped onto ``{-1, +1}`` when exactly two classes are present,
        kept verbatim otherwise.
    """
    rows: list[np.ndarray] = []
    labels: list[int] = []
    width: int | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) < 2:
                raise DataError(f"{path}: line {lineno}: need a label and at least one value")
            try:
                label = int(parts[0])
            except ValueError:
                raise DataError(
                    f"{path}: line {lineno}: label {parts[0]!r} is not an integer"
                ) from None
            try:
                values = np.array([float(p) for p in parts[1:]], dtype=np.float64)
            except ValueError:
                raise DataError(f"{path}: line {lineno}: non-numeric value") from None
            if not np.all(np.isfinite(values)):
                raise DataError(f"{path}: line {lineno}: non-finite value")
            if width is None:
                width = values.size
            elif values.size != width:
                raise DataError(
                    f"{path}: line {lineno}: row has {values.size} values, expected {width}"
                )
            rows.append(values)
            labels.append(label)
    if not rows:
        raise DataError(f"{path}: no records found")
    y = np.asarray(labels, dtype=np.int64)
    if np.unique(y).size == 2:
        y = signed_labels(y)
    return np.vstack(rows), y


def save_timeseries_csv(path: str, series: np.ndarray, labels: np.ndarray) -> None:
    """Write series and labels in the ``label,v1,...,vL`` format."""
    X = np.asarray(series, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise DataError("series must be 2-d with one label per row")
    with open(path, "w", encoding="utf-8") as fh:
        for label, row in zip(y, X):
            fh.write(",".join([str(int(label))] + [repr(float(v)) for v in row]) + "\n")


def load_mil_jsonl(path: str) -> LabeledSample:
    """Load a JSON-lines multiple-instance file.

    Each line is ``{"label": <int>, "instances": [[...], ...]}``.  Binary
    label sets are mapped onto ``{-1, +1}``; larger label sets are kept
    verbatim for one-vs-rest dispatch.
    """
    bags: list[Bag] = []
    labels: list[int] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: line {lineno}: invalid JSON: {exc}") from None
            if not isinstance(record, dict) or "label" not in record or "instances" not in record:
                raise DataError(f"{path}: line {lineno}: need 'label' and 'instances' keys")
            label = record["label"]
            if not isinstance(label, int) or isinstance(label, bool):
                raise DataError(f"{path}: line {lineno}: label must be an integer")
            instances = record["instances"]
            if not isinstance(instances, list) or not instances:
                raise DataError(f"{path}: line {lineno}: empty instance list")
            try:
                vecs = [np.asarray(inst, dtype=np.float64) for inst in instances]
                bag = Bag(vecs)
            except (TypeError, ValueError, DataError) as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from None
            bags.append(bag)
            labels.append(label)
    if not bags:
        raise DataError(f"{path}: no records found")
    y = np.asarray(labels, dtype=np.int64)
    if np.unique(y).size == 2:
        y = signed_labels(y)
    return LabeledSample(bags, y)


def save_mil_jsonl(path: str, sample: LabeledSample) -> None:
    """Write a sample in the JSON-lines multiple-instance format.

    Instances are written per length group in ascending length order, so a
    save/load round trip reproduces the bags exactly.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for bag, label in zip(sample.bags, sample.labels):
            instances: list[list[float]] = []
            for length in bag.lengths:
                instances.extend(row.tolist() for row in bag.instances(length))
            fh.write(json.dumps({"label": int(label), "instances": instances}) + "\n")
