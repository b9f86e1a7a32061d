"""End-to-end explanation pipeline: select comparables, run a method, build documents.

Every method yields two reconciliations: the presentation estimate anchored
at actual values, and a prediction-space estimate used for unfaithfulness
measurement (adjustments applied to the AI's own predictions).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property
from typing import Sequence

import numpy as np

from .baselines import (
    AdjustmentBreakdown,
    fit_local_linear,
    fit_regression,
    linear_adjust,
    linear_adjusted_estimate,
    regression_estimate,
)
from .errors import ConfigError
from .predictors import Predictor, predict
from .schema import Dataset, Instance, Standardizer, fit_standardizer, target_stats
from .selection import (
    Comparable,
    ComparableSet,
    Method,
    ReconciledEstimate,
    ValueChannel,
    select_comparables,
    weighted_average,
)
from .trace import (
    DesiderataConfig,
    TraceModel,
    TraceSpace,
    extract_steps,
    fit_trace,
    trace_adjusted_estimate,
)

LOCAL_LINEAR_RADIUS = 1.0
LOCAL_LINEAR_SAMPLES = 512


@dataclass(frozen=True)
class ExplainContext:
    """Fitted artifacts shared by every explanation over one dataset/predictor pair."""

    dataset: Dataset
    std: Standardizer
    predictor: Predictor
    target_mean: float
    target_std: float

    @property
    def space(self) -> TraceSpace:
        return TraceSpace.from_standardizer(self.std)

    @property
    def target_scale(self) -> tuple[float, float]:
        return (self.target_mean, self.target_std)

    @cached_property
    def z_rows(self) -> np.ndarray:
        return self.std.transform_batch(inst for inst, _ in self.dataset.rows)

    def select(self, subject: Instance, k: int) -> ComparableSet:
        return select_comparables(
            self.dataset, self.std, subject, k, predictor=self.predictor, z_rows=self.z_rows
        )


def build_context(dataset: Dataset, predictor: Predictor) -> ExplainContext:
    std = fit_standardizer(dataset)
    mean, scale = target_stats(dataset)
    return ExplainContext(
        dataset=dataset, std=std, predictor=predictor, target_mean=mean, target_std=scale
    )


@dataclass(frozen=True)
class MethodResult:
    method: Method
    estimate: ReconciledEstimate  # presentation channel, anchored at actual values
    prediction_estimate: ReconciledEstimate  # prediction channel, for unfaithfulness
    detail: dict


def _child_seeds(seed: int, n: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def run_comparables_only(cset: ComparableSet) -> MethodResult:
    est = weighted_average(cset, ValueChannel.ACTUAL)
    est_pred = weighted_average(cset, ValueChannel.PREDICTION)
    detail = {
        "weights": list(cset.similarities),
        "values": [c.actual_value for c in cset.comparables],
        "weighted_terms": [
            rho * c.actual_value for rho, c in zip(cset.similarities, cset.comparables)
        ],
    }
    return MethodResult(Method.COMPARABLES_ONLY, est, est_pred, detail)


def run_regression(cset: ComparableSet, std: Standardizer) -> MethodResult:
    model = fit_regression(cset, std, ValueChannel.ACTUAL)
    est = regression_estimate(model, cset, std)
    model_pred = fit_regression(cset, std, ValueChannel.PREDICTION)
    est_pred = regression_estimate(model_pred, cset, std)

    z_subject = std.transform(cset.subject)
    factors = []
    for attr, sl in std.blocks():
        contribution = float((model.weights[sl] * z_subject[sl]).sum())
        factors.append(
            {
                "attribute": attr.name,
                "weight": [float(w) for w in model.weights[sl]],
                "contribution": contribution,
            }
        )
    detail = {
        "factors": factors,
        "bias": model.bias,
        "residual_rmse": model.residual_rmse,
        "regularized": model.regularized,
    }
    return MethodResult(Method.LINEAR_REGRESSION, est, est_pred, detail)


def _breakdown_dict(br: AdjustmentBreakdown) -> dict:
    return {
        "deltas": [
            {
                "attribute": d.attribute,
                "from": d.value_change[0],
                "to": d.value_change[1],
                "money_delta": d.money_delta,
            }
            for d in br.deltas
        ],
        "total_adjustment": br.total_adjustment,
        "adjusted_value": br.adjusted_value,
        "anchor_value": br.anchor_value,
    }


def run_linear_adjustments(
    cset: ComparableSet, std: Standardizer, predictor: Predictor, seed: int
) -> MethodResult:
    seeds = _child_seeds(seed, len(cset.comparables))
    breakdowns, breakdowns_pred = [], []
    for comp, s in zip(cset.comparables, seeds):
        anchor = std.transform(comp.instance)
        local = fit_local_linear(
            predictor, anchor, radius=LOCAL_LINEAR_RADIUS, n=LOCAL_LINEAR_SAMPLES, seed=s
        )
        breakdowns.append(linear_adjust(local, comp, cset.subject, std))
        breakdowns_pred.append(
            linear_adjust(local, comp, cset.subject, std, prediction_anchored=True)
        )
    est = linear_adjusted_estimate(breakdowns, cset)
    est_pred = linear_adjusted_estimate(breakdowns_pred, cset)
    est_pred = replace(est_pred, method_tag=Method.LINEAR_ADJUSTMENTS)
    detail = {"breakdowns": [_breakdown_dict(b) for b in breakdowns]}
    return MethodResult(Method.LINEAR_ADJUSTMENTS, est, est_pred, detail)


def run_trace_adjustments(
    cset: ComparableSet,
    ctx: ExplainContext,
    cfg: DesiderataConfig,
    seed: int,
) -> tuple[MethodResult, list[TraceModel]]:
    z_subject = ctx.std.transform(cset.subject)
    seeds = _child_seeds(seed, len(cset.comparables))
    traces, steps_docs = [], []
    for comp, s in zip(cset.comparables, seeds):
        z_comp = ctx.std.transform(comp.instance)
        model, breakdown = fit_trace(
            ctx.predictor,
            z_comp,
            z_subject,
            replace(cfg, seed=s),
            space=ctx.space,
            target_scale=ctx.target_scale,
            comparable_instance=comp.instance,
            subject_instance=cset.subject,
        )
        traces.append(model)
        steps = extract_steps(model, comp, std=ctx.std)
        steps_docs.append(
            {
                "steps": steps.to_dict(),
                "loss": breakdown.to_dict(),
                "trace": model.to_dict(),
            }
        )
    est = trace_adjusted_estimate(traces, cset)
    est_pred = trace_adjusted_estimate(traces, cset, prediction_anchored=True)
    detail = {"traces": steps_docs}
    return MethodResult(Method.TRACE_ADJUSTMENTS, est, est_pred, detail), traces


def run_method(
    ctx: ExplainContext,
    cset: ComparableSet,
    method: Method,
    cfg: DesiderataConfig | None = None,
    seed: int = 0,
) -> MethodResult:
    if method == Method.COMPARABLES_ONLY:
        return run_comparables_only(cset)
    if method == Method.LINEAR_REGRESSION:
        return run_regression(cset, ctx.std)
    if method == Method.LINEAR_ADJUSTMENTS:
        return run_linear_adjustments(cset, ctx.std, ctx.predictor, seed)
    if method == Method.TRACE_ADJUSTMENTS:
        result, _ = run_trace_adjustments(cset, ctx, cfg or DesiderataConfig(), seed)
        return result
    raise ConfigError(f"unknown method {method!r}")


def signed_relative_error(prediction: float, actual: float) -> str:
    """Percent wording used next to AI predictions, e.g. '7.6% lower'."""
    if actual == 0:
        return "n/a"
    pct = (prediction - actual) / abs(actual) * 100.0
    if round(abs(pct), 1) == 0.0:
        return "matches"
    direction = "higher" if pct > 0 else "lower"
    return f"{abs(pct):.1f}% {direction}"


def explain_document(
    ctx: ExplainContext,
    subject: Instance,
    method: Method,
    k: int,
    cfg: DesiderataConfig | None = None,
    seed: int = 0,
    subject_actual: float | None = None,
) -> dict:
    """The full JSON-ready explanation the decision grid renders."""
    cset = ctx.select(subject, k)
    result = run_method(ctx, cset, method, cfg=cfg, seed=seed)
    z_subject = ctx.std.transform(subject)
    subject_prediction = float(predict(ctx.predictor, z_subject[None, :])[0])

    schema = ctx.dataset.schema
    comparables_doc = []
    for comp, rho, dist in zip(cset.comparables, cset.similarities, cset.distances):
        comparables_doc.append(
            {
                "id": comp.instance.id,
                "attributes": {
                    name: value
                    for name, value in zip(schema.names, comp.instance.values)
                },
                "actual_value": comp.actual_value,
                "ai_prediction": comp.ai_prediction,
                "prediction_error": signed_relative_error(
                    comp.ai_prediction, comp.actual_value
                ),
                "similarity": rho,
                "distance": dist,
            }
        )

    return {
        "method": result.method.value,
        "seed": seed,
        "k": k,
        "schema": {
            "attributes": [
                {
                    "name": a.name,
                    "kind": a.kind,
                    "unit": a.unit,
                    "levels": list(a.levels),
                    "display_precision": a.display_precision,
                }
                for a in schema.attributes
            ],
            "target_name": schema.target_name,
            "target_unit": schema.target_unit,
        },
        "subject": {
            "id": subject.id,
            "attributes": {
                name: value for name, value in zip(schema.names, subject.values)
            },
            "actual_value": subject_actual,
            "ai_prediction": subject_prediction,
        },
        "comparables": comparables_doc,
        "estimate": {
            "value": result.estimate.point_estimate,
            "bounds": [result.estimate.bounds[0], result.estimate.bounds[1]],
            "approximate": True,
        },
        "prediction_estimate": {
            "value": result.prediction_estimate.point_estimate,
            "bounds": [
                result.prediction_estimate.bounds[0],
                result.prediction_estimate.bounds[1],
            ],
        },
        "detail": result.detail,
    }
