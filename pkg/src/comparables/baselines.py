"""Linear explanation baselines: regression over comparables and local linear adjustments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, TooFewSamples
from .predictors import Predictor, predict
from .schema import Standardizer
from .selection import (
    Comparable,
    ComparableSet,
    Method,
    ReconciledEstimate,
    ValueChannel,
    uncertainty_bounds,
)

RIDGE_LAMBDA = 1e-6  # keeps underdetermined fits minimum-norm without changing exact ones


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    bias: float
    residual_rmse: float
    regularized: bool  # true when rows < features + 1

    def predict(self, xs: np.ndarray) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        if xs.shape[1] != len(self.weights):
            raise DimensionMismatch(
                f"model has {len(self.weights)} weights, input has {xs.shape[1]}"
            )
        return xs @ self.weights + self.bias


@dataclass(frozen=True)
class LocalLinearModel:
    anchor: np.ndarray
    weights: np.ndarray
    bias: float
    sampling_radius: float
    n_samples: int
    seed: int


@dataclass(frozen=True)
class AttributeDelta:
    attribute: str
    value_change: tuple  # (from, to) in raw attribute units
    money_delta: float


@dataclass(frozen=True)
class AdjustmentBreakdown:
    deltas: tuple[AttributeDelta, ...]
    total_adjustment: float
    adjusted_value: float
    anchor_value: float  # the comparable value the adjustment starts from


def _ridge_fit(xs: np.ndarray, ys: np.ndarray, sample_weight: np.ndarray | None = None):
    """Least squares of ys on [xs, 1] with a tiny ridge on the weights only.

    Solved as an augmented least-squares system (ridge rows appended) so
    underdetermined fits resolve to the minimum-norm weights without the
    conditioning loss of normal equations.
    """
    n, d = xs.shape
    design = np.hstack([xs, np.ones((n, 1))])
    ys = np.asarray(ys, dtype=float)
    if sample_weight is not None:
        sw = np.sqrt(sample_weight)[:, None]
        design = design * sw
        ys = ys * sw[:, 0]
    ridge_rows = np.hstack([np.sqrt(RIDGE_LAMBDA) * np.eye(d), np.zeros((d, 1))])
    aug = np.vstack([design, ridge_rows])
    target = np.concatenate([ys, np.zeros(d)])
    coef, *_ = np.linalg.lstsq(aug, target, rcond=None)
    return coef[:d], float(coef[d])


def fit_regression(cset: ComparableSet, std: Standardizer, use: ValueChannel = ValueChannel.ACTUAL) -> LinearModel:
    """Least-squares fit of comparable values on encoded attributes.

    With fewer comparables than features + 1 the tiny ridge yields the
    minimum-norm solution (single comparable: zero weights, bias = value).
    """
    xs = std.transform_batch(c.instance for c in cset.comparables)
    ys = cset.values(use)
    w, b = _ridge_fit(xs, ys)
    fitted = xs @ w + b
    rmse = float(np.sqrt(np.mean((fitted - ys) ** 2)))
    return LinearModel(
        weights=w, bias=b, residual_rmse=rmse, regularized=len(ys) < xs.shape[1] + 1
    )


def regression_estimate(
    model: LinearModel, cset: ComparableSet, std: Standardizer
) -> ReconciledEstimate:
    """Model value at the subject; bounds span the fitted values at the comparables."""
    z_subject = std.transform(cset.subject)
    point = float(model.predict(z_subject)[0])
    fitted = model.predict(std.transform_batch(c.instance for c in cset.comparables))
    low, high = uncertainty_bounds(fitted)
    return ReconciledEstimate(
        point_estimate=point, bounds=(low, high), method_tag=Method.LINEAR_REGRESSION
    )


def fit_local_linear(
    p: Predictor,
    anchor: np.ndarray,
    radius: float = 1.0,
    n: int = 512,
    seed: int = 0,
) -> LocalLinearModel:
    """Weighted least squares of the predictor on perturbations around the anchor.

    Perturbations are uniform in an L-inf ball of the given radius; samples
    are weighted by a Gaussian kernel with bandwidth equal to the radius.
    """
    anchor = np.asarray(anchor, dtype=float)
    d = anchor.shape[0]
    if n < d + 1:
        raise TooFewSamples(f"need at least dim+1={d + 1} samples, got {n}")
    rng = np.random.default_rng(seed)
    xs = anchor + rng.uniform(-radius, radius, size=(n, d))
    xs[0] = anchor  # anchor itself always supervises the fit
    ys = predict(p, xs)
    dist = np.linalg.norm(xs - anchor, axis=1)
    kernel = np.exp(-(dist**2) / (2.0 * radius**2))
    w, b = _ridge_fit(xs, ys, sample_weight=kernel)
    return LocalLinearModel(
        anchor=anchor, weights=w, bias=b, sampling_radius=radius, n_samples=n, seed=seed
    )


def linear_adjust(
    model: LocalLinearModel,
    comparable: Comparable,
    subject_instance,
    std: Standardizer,
    prediction_anchored: bool = False,
) -> AdjustmentBreakdown:
    """Per-attribute money deltas w_c^(r) * (x_s^(r) - x_c^(r)), one row per attribute.

    Categorical one-hot blocks contribute a single named delta. The adjusted
    value anchors at the comparable's actual value unless prediction_anchored.
    """
    z_c = std.transform(comparable.instance)
    z_s = std.transform(subject_instance)
    if z_c.shape != model.weights.shape:
        raise DimensionMismatch("comparable does not match the fitted model dimension")
    diff = z_s - z_c
    contrib = model.weights * diff

    deltas = []
    for (attr, sl), raw_c, raw_s in zip(
        std.blocks(), comparable.instance.values, subject_instance.values
    ):
        money = float(contrib[sl].sum())
        deltas.append(
            AttributeDelta(attribute=attr.name, value_change=(raw_c, raw_s), money_delta=money)
        )
    total = float(sum(d.money_delta for d in deltas))
    anchor_value = comparable.ai_prediction if prediction_anchored else comparable.actual_value
    return AdjustmentBreakdown(
        deltas=tuple(deltas),
        total_adjustment=total,
        adjusted_value=anchor_value + total,
        anchor_value=anchor_value,
    )


def linear_adjusted_estimate(
    breakdowns: list[AdjustmentBreakdown], cset: ComparableSet
) -> ReconciledEstimate:
    """Reconcile per-comparable adjusted values with the similarity-weighted average."""
    adjusted = np.array([b.adjusted_value for b in breakdowns])
    rho = np.asarray(cset.similarities)
    point = float(np.dot(rho, adjusted) / rho.sum())
    low, high = uncertainty_bounds(adjusted)
    return ReconciledEstimate(
        point_estimate=point, bounds=(low, high), method_tag=Method.LINEAR_ADJUSTMENTS
    )
