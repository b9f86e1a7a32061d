"""Evaluation harnesses: comparables/distance sweeps, desiderata sensitivity, decision metrics.

Reports are long-format rows (method, axis, metric, value, seed) plus
per-cell means, written as CSV and JSON with a versioned schema.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import norm

from .errors import ConfigError, EmptyInput, ZeroWidthInterval
from .explain import ExplainContext, build_context, run_method
from .predictors import Predictor, SinusoidLinearPredictor, predict
from .schema import AttributeDef, AttributeSchema, Dataset, Instance
from .selection import ComparableSet, Method
from .trace import DesiderataConfig, LossBreakdown, fit_trace

REPORT_FORMAT_VERSION = 1

LOG_FLOOR = 1e-9  # applied before log transforms to keep aggregates finite

# z_0.95 - z_0.05 for the 90% credible interval of a Gaussian belief
Z_RANGE_90 = float(norm.ppf(0.95) - norm.ppf(0.05))


# ---------------------------------------------------------------------------
# decision metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecisionResponse:
    y_min: float
    y_max: float
    actual: float

    def __post_init__(self):
        if self.y_min > self.y_max:
            raise ConfigError("interval must satisfy y_min <= y_max")

    @property
    def y_mean(self) -> float:
        return (self.y_min + self.y_max) / 2.0


def correctness_probability_density(r: DecisionResponse) -> float:
    """Gaussian density of the actual value under the belief implied by the interval."""
    width = r.y_max - r.y_min
    if width <= 0:
        raise ZeroWidthInterval("credible interval has zero width")
    sigma = width / Z_RANGE_90
    return float(norm.pdf(r.actual, loc=r.y_mean, scale=sigma))


def decision_metrics(r: DecisionResponse) -> dict:
    """The three decision DVs: log mean error, log interval width, density."""
    width = r.y_max - r.y_min
    if width <= 0:
        raise ZeroWidthInterval("credible interval has zero width")
    err = abs(r.y_mean - r.actual)
    zero_error = err < LOG_FLOOR
    return {
        "mean_error_log": math.log(max(err, LOG_FLOOR)),
        "credible_interval_log": math.log(max(width, LOG_FLOOR)),
        "density": correctness_probability_density(r),
        "zero_error_floored": zero_error,
    }


# ---------------------------------------------------------------------------
# synthetic tasks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticTask:
    name: str
    predictor: Predictor
    dim: int
    n_rows: int = 400
    noise_std: float = 0.1

    def schema(self) -> AttributeSchema:
        return AttributeSchema(
            attributes=tuple(AttributeDef(f"x{r}", "numeric") for r in range(self.dim)),
            target_name="y",
        )

    def sample_dataset(self, rng: np.random.Generator) -> Dataset:
        xs = rng.normal(size=(self.n_rows, self.dim))
        ys = predict(self.predictor, xs) + rng.normal(0.0, self.noise_std, size=self.n_rows)
        rows = tuple(
            (Instance(values=tuple(float(v) for v in x), id=str(i)), float(y))
            for i, (x, y) in enumerate(zip(xs, ys))
        )
        return Dataset(schema=self.schema(), rows=rows, provenance=f"synthetic:{self.name}")

    def sample_subject(self, rng: np.random.Generator) -> tuple[Instance, float]:
        # subjects stay in the well-covered core so every k finds near comparables
        x = np.clip(rng.normal(size=self.dim), -1.2, 1.2)
        y = float(predict(self.predictor, x[None, :])[0]) + float(
            rng.normal(0.0, self.noise_std)
        )
        return Instance(values=tuple(float(v) for v in x), id="subject"), y


def make_task(name: str, n_rows: int = 400, noise_std: float = 0.1) -> SyntheticTask:
    """Registry of fixed synthetic evaluation tasks."""
    if name == "sinlin3":
        predictor = SinusoidLinearPredictor(
            amplitude=(1.2, 0.9, 0.7),
            frequency=(1.5, 2.2, 1.1),
            phase=(0.3, 1.1, 2.0),
            weights=(2.0, 1.5, -1.8),
            bias=2.0,
        )
        return SyntheticTask(name, predictor, dim=3, n_rows=n_rows, noise_std=noise_std)
    if name == "curvy2":
        predictor = SinusoidLinearPredictor(
            amplitude=(1.5, 1.0),
            frequency=(2.0, 2.6),
            phase=(0.0, 0.7),
            weights=(0.8, -0.5),
            bias=0.0,
        )
        return SyntheticTask(name, predictor, dim=2, n_rows=n_rows, noise_std=noise_std)
    if name == "sin1":
        predictor = SinusoidLinearPredictor(
            amplitude=(1.5,), frequency=(2.0,), weights=(0.5,), bias=0.0
        )
        return SyntheticTask(name, predictor, dim=1, n_rows=n_rows, noise_std=noise_std)
    if name == "ridge3":
        predictor = SinusoidLinearPredictor(
            amplitude=(1.2, 1.4, 1.1),
            frequency=(2.6, 3.0, 3.4),
            phase=(0.2, 1.0, 2.1),
            weights=(0.6, -0.4, 0.5),
            bias=0.0,
        )
        return SyntheticTask(name, predictor, dim=3, n_rows=n_rows, noise_std=noise_std)
    raise ConfigError(
        f"unknown synthetic task {name!r}; valid: sinlin3, curvy2, ridge3, sin1"
    )


# ---------------------------------------------------------------------------
# sweeps (comparables count and average distance axes)
# ---------------------------------------------------------------------------

AXIS_COMPARABLES = "comparables"
AXIS_DISTANCE = "distance"


@dataclass(frozen=True)
class SweepSpec:
    task: str = "sinlin3"
    methods: tuple[Method, ...] = (
        Method.COMPARABLES_ONLY,
        Method.LINEAR_REGRESSION,
        Method.LINEAR_ADJUSTMENTS,
        Method.TRACE_ADJUSTMENTS,
    )
    axis: str = AXIS_COMPARABLES
    ks: tuple[int, ...] = (2, 4, 8)
    distance_k: int = 4
    distance_bins: int = 3
    n_subjects: int = 8
    seeds: tuple[int, ...] = (0,)
    n_rows: int = 400
    noise_std: float = 0.1
    trace_config: DesiderataConfig = field(default_factory=DesiderataConfig)

    def __post_init__(self):
        if self.axis not in (AXIS_COMPARABLES, AXIS_DISTANCE):
            raise ConfigError(f"unknown axis {self.axis!r}")
        if self.axis == AXIS_COMPARABLES:
            if not self.ks:
                raise ConfigError("comparables axis needs at least one k")
            if any(k < 1 or k > 8 for k in self.ks):
                raise ConfigError("comparable counts must lie in [1, 8]")
        if self.n_subjects < 1:
            raise ConfigError("n_subjects must be >= 1")
        if not self.seeds:
            raise ConfigError("at least one seed required")


@dataclass(frozen=True)
class EvalRow:
    method: str
    axis: str
    axis_value: float
    metric: str
    value: float
    seed: int


@dataclass(frozen=True)
class EvalReport:
    spec_summary: dict
    rows: tuple[EvalRow, ...]

    def mean(self, method: Method | str, axis_value: float, metric: str) -> float:
        name = method.value if isinstance(method, Method) else method
        vals = [
            r.value
            for r in self.rows
            if r.method == name and r.axis_value == axis_value and r.metric == metric
        ]
        if not vals:
            raise EmptyInput(f"no rows for {name}/{axis_value}/{metric}")
        return float(np.mean(vals))

    def axis_values(self) -> list[float]:
        return sorted({r.axis_value for r in self.rows})

    def to_dict(self) -> dict:
        cells: dict = {}
        for r in self.rows:
            key = (r.method, r.axis_value, r.metric)
            cells.setdefault(key, []).append(r.value)
        aggregated = [
            {
                "method": m,
                "axis_value": av,
                "metric": metric,
                "mean": float(np.mean(vs)),
                "n": len(vs),
            }
            for (m, av, metric), vs in sorted(cells.items())
        ]
        return {
            "format_version": REPORT_FORMAT_VERSION,
            "spec": self.spec_summary,
            "aggregated": aggregated,
            "rows": [
                {
                    "method": r.method,
                    "axis": r.axis,
                    "axis_value": r.axis_value,
                    "metric": r.metric,
                    "value": r.value,
                    "seed": r.seed,
                }
                for r in self.rows
            ],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["method", "axis", "axis_value", "metric", "value", "seed"])
        for r in self.rows:
            writer.writerow([r.method, r.axis, repr(r.axis_value), r.metric, repr(r.value), r.seed])
        return buf.getvalue()


def _case_metrics(
    ctx: ExplainContext,
    cset: ComparableSet,
    subject_actual: float,
    subject_prediction: float,
    method: Method,
    cfg: DesiderataConfig,
    seed: int,
) -> dict[str, float]:
    result = run_method(ctx, cset, method, cfg=cfg, seed=seed)
    return {
        "prediction_error": abs(result.estimate.point_estimate - subject_actual),
        "unfaithfulness": abs(
            result.prediction_estimate.point_estimate - subject_prediction
        ),
        "bounds_width": result.estimate.width,
    }


def run_sweep(spec: SweepSpec) -> EvalReport:
    """Sample subjects, run each requested method at each axis value, collect metrics."""
    rows: list[EvalRow] = []
    for seed in spec.seeds:
        rng = np.random.default_rng(np.random.SeedSequence((seed, 0xC0FFEE)))
        task = make_task(spec.task, n_rows=spec.n_rows, noise_std=spec.noise_std)
        dataset = task.sample_dataset(rng)
        ctx = build_context(dataset, task.predictor)

        subjects = [task.sample_subject(rng) for _ in range(spec.n_subjects)]
        if spec.axis == AXIS_COMPARABLES:
            for subject, y_s in subjects:
                z = ctx.std.transform(subject)
                yhat_s = float(predict(ctx.predictor, z[None, :])[0])
                for k in spec.ks:
                    cset = ctx.select(subject, k)
                    for method in spec.methods:
                        metrics = _case_metrics(
                            ctx, cset, y_s, yhat_s, method, spec.trace_config, seed
                        )
                        rows.extend(
                            EvalRow(method.value, spec.axis, float(k), name, val, seed)
                            for name, val in metrics.items()
                        )
        else:
            cases = []
            for subject, y_s in subjects:
                z = ctx.std.transform(subject)
                yhat_s = float(predict(ctx.predictor, z[None, :])[0])
                cset = ctx.select(subject, spec.distance_k)
                cases.append((subject, y_s, yhat_s, cset, float(np.mean(cset.distances))))
            dists = np.array([c[4] for c in cases])
            edges = np.linspace(dists.min(), dists.max() + 1e-12, spec.distance_bins + 1)
            for subject, y_s, yhat_s, cset, d in cases:
                bin_idx = int(np.clip(np.searchsorted(edges, d, side="right") - 1, 0, spec.distance_bins - 1))
                for method in spec.methods:
                    metrics = _case_metrics(
                        ctx, cset, y_s, yhat_s, method, spec.trace_config, seed
                    )
                    rows.extend(
                        EvalRow(method.value, spec.axis, float(bin_idx), name, val, seed)
                        for name, val in metrics.items()
                    )
    summary = {
        "task": spec.task,
        "axis": spec.axis,
        "methods": [m.value for m in spec.methods],
        "ks": list(spec.ks),
        "distance_k": spec.distance_k,
        "distance_bins": spec.distance_bins,
        "n_subjects": spec.n_subjects,
        "seeds": list(spec.seeds),
        "n_rows": spec.n_rows,
        "noise_std": spec.noise_std,
    }
    return EvalReport(spec_summary=summary, rows=tuple(rows))


# ---------------------------------------------------------------------------
# desiderata sensitivity
# ---------------------------------------------------------------------------

VARIABLE_LAMBDAS = ("lambda_s", "lambda_d", "lambda_m", "lambda_e")


@dataclass(frozen=True)
class SensitivityRow:
    lambda_name: str
    lambda_value: float
    seed: int
    unfaithfulness: float
    n_adjustments: int
    n_reversals: int
    unevenness: float


@dataclass(frozen=True)
class SensitivityReport:
    spec_summary: dict
    rows: tuple[SensitivityRow, ...]

    def mean(self, lambda_value: float, metric: str) -> float:
        vals = [getattr(r, metric) for r in self.rows if r.lambda_value == lambda_value]
        if not vals:
            raise EmptyInput(f"no rows at lambda={lambda_value}")
        return float(np.mean(vals))

    def to_dict(self) -> dict:
        return {
            "format_version": REPORT_FORMAT_VERSION,
            "spec": self.spec_summary,
            "rows": [
                {
                    "lambda_name": r.lambda_name,
                    "lambda_value": r.lambda_value,
                    "seed": r.seed,
                    "unfaithfulness": r.unfaithfulness,
                    "n_adjustments": r.n_adjustments,
                    "n_reversals": r.n_reversals,
                    "unevenness": r.unevenness,
                }
                for r in self.rows
            ],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["lambda_name", "lambda_value", "seed", "unfaithfulness", "n_adjustments", "n_reversals", "unevenness"]
        )
        for r in self.rows:
            writer.writerow(
                [r.lambda_name, repr(r.lambda_value), r.seed, repr(r.unfaithfulness), r.n_adjustments, r.n_reversals, repr(r.unevenness)]
            )
        return buf.getvalue()


def sensitivity_metrics(breakdown: LossBreakdown) -> dict:
    """Exact discrete sensitivity measures from a trained trace's breakdown."""
    n_segments = max(len(breakdown.segment_deltas), 1)
    return {
        "unfaithfulness": breakdown.faithfulness,
        "n_adjustments": breakdown.n_adjustments,
        "n_reversals": breakdown.reversals,
        "unevenness": breakdown.evenness / n_segments,  # Var of the segment deltas
    }


def run_sensitivity(
    base_cfg: DesiderataConfig,
    vary: str,
    values: tuple[float, ...] | list[float],
    task: str = "curvy2",
    seeds: tuple[int, ...] | list[int] = tuple(range(20)),
    endpoint_span: float = 2.0,
    moving_attributes: int = 1,
) -> SensitivityReport:
    """Re-train the fixed task's trace at each lambda value and measure the desiderata."""
    if vary not in VARIABLE_LAMBDAS:
        raise ConfigError(f"vary must be one of {VARIABLE_LAMBDAS}")
    if not values:
        raise ConfigError("values must be nonempty")
    synthetic = make_task(task)
    # fixed explanation task: the first `moving_attributes` attributes differ
    # between comparable and subject, the rest agree (those are free to
    # wander and show what the desiderata suppress)
    n_moving = min(max(moving_attributes, 1), synthetic.dim)
    x_c = np.full(synthetic.dim, 0.3)
    x_s = np.full(synthetic.dim, 0.3)
    x_c[:n_moving] = -endpoint_span / 2.0
    x_s[:n_moving] = endpoint_span / 2.0
    rows = []
    # continuation along the regularization path: sweep each seed from the
    # most constrained value down, warm-starting from the previous solution
    # so every cell is searched at least as well as its stricter neighbor
    for seed in seeds:
        warm = None
        for value in sorted(values, reverse=True):
            cfg = replace(base_cfg, **{vary: float(value), "seed": int(seed)})
            model, breakdown = fit_trace(
                synthetic.predictor, x_c, x_s, cfg, warm_start=warm
            )
            warm = model
            m = sensitivity_metrics(breakdown)
            rows.append(
                SensitivityRow(
                    lambda_name=vary,
                    lambda_value=float(value),
                    seed=int(seed),
                    unfaithfulness=m["unfaithfulness"],
                    n_adjustments=m["n_adjustments"],
                    n_reversals=m["n_reversals"],
                    unevenness=m["unevenness"],
                )
            )
    rows.sort(key=lambda r: (r.lambda_value, r.seed))
    summary = {
        "task": task,
        "vary": vary,
        "moving_attributes": n_moving,
        "values": [float(v) for v in values],
        "seeds": [int(s) for s in seeds],
        "base_config": {
            "lambda_f": base_cfg.lambda_f,
            "lambda_s": base_cfg.lambda_s,
            "lambda_d": base_cfg.lambda_d,
            "lambda_m": base_cfg.lambda_m,
            "lambda_e": base_cfg.lambda_e,
            "delta": base_cfg.delta,
            "max_epochs": base_cfg.max_epochs,
        },
    }
    return SensitivityReport(spec_summary=summary, rows=tuple(rows))


def write_report(report: EvalReport | SensitivityReport, out_base: str) -> list[str]:
    """Write CSV and JSON next to each other; returns the paths written."""
    csv_path, json_path = f"{out_base}.csv", f"{out_base}.json"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(report.to_csv())
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return [csv_path, json_path]
