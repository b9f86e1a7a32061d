"""Comparable selection, similarity weights, and weighted-average reconciliation."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import EmptyInput, KTooLarge, SchemaError
from .predictors import EPS_WEIGHT, Predictor, predict
from .schema import Dataset, Instance, Standardizer


class Method(str, Enum):
    COMPARABLES_ONLY = "comparables"
    LINEAR_REGRESSION = "regression"
    LINEAR_ADJUSTMENTS = "linear-adjust"
    TRACE_ADJUSTMENTS = "trace"


class ValueChannel(str, Enum):
    ACTUAL = "actual"
    PREDICTION = "prediction"


@dataclass(frozen=True)
class Comparable:
    instance: Instance
    actual_value: float
    ai_prediction: float

    def __post_init__(self):
        if not (np.isfinite(self.actual_value) and np.isfinite(self.ai_prediction)):
            raise SchemaError("comparable values must be finite")


@dataclass(frozen=True)
class ComparableSet:
    """Subject plus its selected comparables with distances and normalized similarities."""

    subject: Instance
    comparables: tuple[Comparable, ...]
    distances: tuple[float, ...]
    similarities: tuple[float, ...]

    def __post_init__(self):
        n = len(self.comparables)
        if n < 1:
            raise EmptyInput("a comparable set needs at least one comparable")
        if len(self.similarities) != n or len(self.distances) != n:
            raise SchemaError("distances/similarities must align with comparables")
        if any(d < 0 for d in self.distances):
            raise SchemaError("distances must be nonnegative")
        if abs(sum(self.similarities) - 1.0) > 1e-9:
            raise SchemaError("similarities must sum to 1")

    def values(self, channel: ValueChannel) -> np.ndarray:
        if channel == ValueChannel.ACTUAL:
            return np.array([c.actual_value for c in self.comparables])
        return np.array([c.ai_prediction for c in self.comparables])


@dataclass(frozen=True)
class ReconciledEstimate:
    point_estimate: float
    bounds: tuple[float, float]
    method_tag: Method

    def __post_init__(self):
        if self.bounds[0] > self.bounds[1]:
            raise SchemaError("bounds must satisfy low <= high")

    @property
    def width(self) -> float:
        return self.bounds[1] - self.bounds[0]


def manhattan_distance(a: np.ndarray, b: np.ndarray, coord_weights: np.ndarray) -> float:
    """Standardized Manhattan distance; categorical blocks weighted 0.5 per coordinate."""
    return float(np.abs(np.asarray(a) - np.asarray(b)) @ coord_weights)


def similarities_from_distances(distances: Sequence[float]) -> tuple[float, ...]:
    """Normalized inverse distance, rho_c = (1/(d_c+eps)) / sum_j (1/(d_j+eps))."""
    inv = 1.0 / (np.asarray(distances, dtype=float) + EPS_WEIGHT)
    rho = inv / inv.sum()
    return tuple(float(r) for r in rho)


def select_comparables(
    dataset: Dataset,
    std: Standardizer,
    subject: Instance,
    k: int,
    predictor: Predictor | None = None,
    z_rows: np.ndarray | None = None,
) -> ComparableSet:
    """The k nearest dataset rows to the subject, ties broken by dataset order.

    The dataset is expected to exclude the subject row itself. When a
    predictor is given, each comparable carries its AI prediction; otherwise
    predictions fall back to the actual values. Pass z_rows (the encoded
    dataset matrix) to skip re-encoding on repeated selections.
    """
    if k < 1 or k > len(dataset):
        raise KTooLarge(f"k={k} with dataset of size {len(dataset)}")
    weights = std.coord_weights
    zs = std.transform_batch(inst for inst, _ in dataset.rows) if z_rows is None else z_rows
    z_subject = std.transform(subject)
    dists = np.abs(zs - z_subject) @ weights
    order = np.argsort(dists, kind="stable")[:k]

    if predictor is not None:
        preds = predict(predictor, zs[order])
    else:
        preds = np.array([dataset.rows[i][1] for i in order])

    comps = tuple(
        Comparable(
            instance=dataset.rows[i][0],
            actual_value=float(dataset.rows[i][1]),
            ai_prediction=float(p),
        )
        for i, p in zip(order, preds)
    )
    selected = tuple(float(dists[i]) for i in order)
    return ComparableSet(
        subject=subject,
        comparables=comps,
        distances=selected,
        similarities=similarities_from_distances(selected),
    )


def weighted_average(cset: ComparableSet, use: ValueChannel = ValueChannel.ACTUAL) -> ReconciledEstimate:
    """Similarity-weighted average of comparable values with min/max bounds."""
    vals = cset.values(use)
    rho = np.asarray(cset.similarities)
    point = float(np.dot(rho, vals) / rho.sum())
    low, high = uncertainty_bounds(vals)
    return ReconciledEstimate(
        point_estimate=point, bounds=(low, high), method_tag=Method.COMPARABLES_ONLY
    )


def uncertainty_bounds(values: Sequence[float]) -> tuple[float, float]:
    vals = np.asarray(values, dtype=float)
    if vals.size == 0:
        raise EmptyInput("uncertainty bounds need at least one value")
    return float(vals.min()), float(vals.max())
