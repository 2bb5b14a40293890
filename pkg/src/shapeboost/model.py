"""The final classifier: scoring, diagnostics, explanations, serialization.

A trained model is a weighted ensemble of kernel expansions.  Each term
scores a bag by the best kernel similarity between any bag instance and
the term's expansion; the bag score is the weighted sum of term values and
the label is its sign (with ``sign(0) = +1``).  Models are self-contained:
every term embeds the raw expansion-point vectors, so prediction needs no
training data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bags import Bag, LabeledSample
from .errors import DataError
from .kernels import KernelSpec, kernel_matrix

__all__ = [
    "ModelTerm",
    "BoostModel",
    "TermAttribution",
    "score",
    "predict",
    "margin_loss",
    "explain",
    "save_model",
    "load_model",
]

MODEL_VERSION = 1


@dataclass(frozen=True)
class ModelTerm:
    """One weighted kernel expansion.

    ``vectors`` holds only the expansion points with nonzero coefficients,
    so sparse training solutions stay small on disk and at predict time.
    """

    weight: float
    length: int
    coefficients: np.ndarray
    vectors: np.ndarray

    def __post_init__(self) -> None:
        a = np.ascontiguousarray(self.coefficients, dtype=np.float64)
        V = np.ascontiguousarray(self.vectors, dtype=np.float64)
        if self.weight <= 0 or not np.isfinite(self.weight):
            raise DataError("term weight must be positive and finite")
        if V.ndim != 2 or V.shape[1] != self.length or a.shape != (V.shape[0],):
            raise DataError("term coefficients and vectors are inconsistent")
        if a.size < 1:
            raise DataError("a term needs at least one expansion point")
        a.setflags(write=False)
        V.setflags(write=False)
        object.__setattr__(self, "coefficients", a)
        object.__setattr__(self, "vectors", V)

    @classmethod
    def from_coefficients(
        cls,
        weight: float,
        length: int,
        coefficients: np.ndarray,
        vectors: np.ndarray,
    ) -> "ModelTerm":
        """Build a term from a full pool-sized coefficient vector.

        Zero coefficients and their vectors are dropped; an all-zero
        vector keeps its first entry so the term stays well-formed.
        """
        a = np.asarray(coefficients, dtype=np.float64)
        keep = np.flatnonzero(a != 0.0)
        if keep.size == 0:
            keep = np.array([0])
        return cls(
            weight=weight,
            length=length,
            coefficients=a[keep],
            vectors=np.asarray(vectors, dtype=np.float64)[keep],
        )


@dataclass(frozen=True)
class TermAttribution:
    """Contribution of one term to one bag's score."""

    weight: float
    length: int
    window_start: int
    contribution: float


@dataclass(frozen=True)
class BoostModel:
    """Weighted ensemble of kernel expansions plus kernel settings.

    ``meta`` carries run information (task, lengths, normalization flag,
    seed, training statistics); prediction only requires ``lengths`` for
    series conversion.
    """

    kernel: KernelSpec
    nu: float
    terms: tuple[ModelTerm, ...]
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.terms:
            raise DataError("a model needs at least one term")
        total = sum(t.weight for t in self.terms)
        if abs(total - 1.0) > 1e-6:
            raise DataError(f"term weights sum to {total}, expected 1")

    @property
    def lengths(self) -> tuple[int, ...]:
        stored = self.meta.get("lengths")
        if stored:
            return tuple(int(l) for l in stored)
        return tuple(sorted({t.length for t in self.terms}))


def _term_values(model: BoostModel, bag: Bag) -> tuple[np.ndarray, list[int]]:
    """Per-term max similarity and maximizer index for one bag."""
    values = np.empty(len(model.terms))
    argmaxes: list[int] = []
    for j, term in enumerate(model.terms):
        X = bag.instances(term.length)
        vals = kernel_matrix(model.kernel, X, term.vectors) @ term.coefficients
        idx = int(np.argmax(vals))
        values[j] = vals[idx]
        argmaxes.append(idx)
    return values, argmaxes


def score(model: BoostModel, bag: Bag) -> float:
    """Weighted-sum score of one bag (same arithmetic as ``explain``)."""
    values, _ = _term_values(model, bag)
    weights = np.array([t.weight for t in model.terms])
    return float(np.sum(weights * values))


def score_bags(model: BoostModel, bags: Sequence[Bag]) -> np.ndarray:
    """Scores for a sequence of bags."""
    return np.array([score(model, bag) for bag in bags])


def predict(model: BoostModel, bag: Bag) -> int:
    """Signed label of one bag; a zero score maps to +1."""
    return 1 if score(model, bag) >= 0.0 else -1


def predict_bags(model: BoostModel, bags: Sequence[Bag]) -> np.ndarray:
    s = score_bags(model, bags)
    return np.where(s >= 0.0, 1, -1).astype(np.int64)


def margin_loss(model: BoostModel, sample: LabeledSample, rho: float) -> float:
    """Fraction of bags with ``y * score`` strictly below ``rho``."""
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    sample.require_signed()
    s = score_bags(model, sample.bags)
    return float(np.mean(sample.labels * s < rho))


def explain(model: BoostModel, bag: Bag) -> list[TermAttribution]:
    """Per-term attribution for one bag.

    Each record reports the term weight, its length, the origin tag of
    the maximizing instance (window start for subsequence bags), and the
    contribution ``weight * value``; contributions sum to the bag score.
    """
    values, argmaxes = _term_values(model, bag)
    records = []
    for term, value, idx in zip(model.terms, values, argmaxes):
        start = int(bag.origins(term.length)[idx])
        records.append(
            TermAttribution(
                weight=term.weight,
                length=term.length,
                window_start=start,
                contribution=float(term.weight * value),
            )
        )
    return records


def save_model(model: BoostModel, path: str) -> None:
    """Write a model as self-contained JSON.

    Zero-coefficient entries are dropped; floating-point values use
    shortest round-trip text, so save/load preserves every score bit for
    bit.
    """
    terms = []
    for term in model.terms:
        entries = [
            {"coef": float(c), "vector": [float(v) for v in vec]}
            for c, vec in zip(term.coefficients, term.vectors)
            if c != 0.0
        ]
        if not entries:
            entries = [
                {"coef": 0.0, "vector": [float(v) for v in term.vectors[0]]}
            ]
        terms.append({"weight": float(term.weight), "length": int(term.length), "entries": entries})
    payload = {
        "version": MODEL_VERSION,
        "kernel": {
            "kind": model.kernel.kind,
            "sigma2": None if model.kernel.sigma2 is None else float(model.kernel.sigma2),
        },
        "nu": float(model.nu),
        "terms": terms,
        "meta": model.meta,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_model(path: str) -> BoostModel:
    """Load a model written by :func:`save_model`.

    Raises
    ------
    DataError
        On unparsable files, schema or version mismatches, and unknown
        kernel kinds.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise DataError(f"{path}: not a valid model file: {exc}") from None
    if not isinstance(payload, dict):
        raise DataError(f"{path}: not a valid model file")
    if payload.get("version") != MODEL_VERSION:
        raise DataError(
            f"{path}: unsupported model version {payload.get('version')!r}"
        )
    kernel_info = payload.get("kernel")
    if not isinstance(kernel_info, dict) or "kind" not in kernel_info:
        raise DataError(f"{path}: missing kernel section")
    kind = kernel_info["kind"]
    if kind not in ("linear", "gaussian"):
        raise DataError(f"{path}: unsupported kernel kind {kind!r}")
    spec = KernelSpec(kind=kind, sigma2=kernel_info.get("sigma2"))
    raw_terms = payload.get("terms")
    if not isinstance(raw_terms, list) or not raw_terms:
        raise DataError(f"{path}: model has no terms")
    terms = []
    try:
        for entry in raw_terms:
            coefs = np.array([e["coef"] for e in entry["entries"]], dtype=np.float64)
            vectors = np.array(
                [e["vector"] for e in entry["entries"]], dtype=np.float64
            )
            terms.append(
                ModelTerm(
                    weight=float(entry["weight"]),
                    length=int(entry["length"]),
                    coefficients=coefs,
                    vectors=vectors,
                )
            )
        return BoostModel(
            kernel=spec,
            nu=float(payload["nu"]),
            terms=tuple(terms),
            meta=payload.get("meta", {}) or {},
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: malformed model file: {exc}") from None
