"""Piecewise-linear counterfactual traces from a comparable to the subject.

A trace is a polyline of knots in encoded standardized space, endpoints
pinned to the comparable and subject, with one affine value segment per
leg. Only the first segment's bias is free; later biases derive from knot
continuity, so the value function is continuous by construction. The free
parameters (segment weights, interior knots, first bias) are trained with
Adam against batch predictions of the black-box model, regularized by
faithfulness, sparsity, disjointness, monotonicity, and evenness terms.

Evaluation anchors each segment at its left knot,
``y_seg(x) = v[j] + w[j] . (x - knots[j])``, which makes the two segment
values at a shared knot bit-identical.

Indicator and max terms are replaced by sigmoid and log-sum-exp surrogates
inside gradients; reported loss components always use the exact discrete
definitions.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import (
    ConfigError,
    DimensionMismatch,
    Diverged,
    NoDifference,
    OutOfDomain,
)
from .baselines import fit_local_linear
from .predictors import Predictor, predict
from .schema import Instance, Standardizer
from .selection import (
    Comparable,
    ComparableSet,
    Method,
    ReconciledEstimate,
    uncertainty_bounds,
)

TRACE_FORMAT_VERSION = 1

MAX_AUTO_SEGMENTS = 8
# learning-rate ladder: geometric decay over fixed stages, each stage
# restarting from the best iterate so exploration cannot lose ground
LR_STAGES = 12
LR_END = 1e-4
# surrogate sharpness for the disjointness indicator and max
INDICATOR_SHARPNESS = 0.1  # sigmoid((|dx| - delta) / (0.1 * delta))
LSE_TEMPERATURE = 0.1
# pseudo-Huber width for faithfulness residuals inside gradients; reported
# losses keep the exact absolute value
FAITHFULNESS_HUBER_EPS = 0.05
WARMSTART_SAMPLES = 256


@dataclass(frozen=True)
class DesiderataConfig:
    """Loss weights and optimizer settings for trace training."""

    lambda_f: float = 1.0
    lambda_s: float = 10.0
    lambda_d: float = 10.0
    lambda_m: float = 1.0
    lambda_e: float = 1.0
    delta: float = 0.01
    segments: int | None = None  # None: one segment per differing attribute, capped
    samples_per_segment: int = 8
    max_epochs: int = 2000
    learning_rate: float = 0.8
    init_std: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.lambda_f <= 0:
            raise ConfigError("lambda_f must be positive")
        for name in ("lambda_s", "lambda_d", "lambda_m", "lambda_e"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")
        if self.delta <= 0:
            raise ConfigError("delta must be positive")
        if self.segments is not None and self.segments < 1:
            raise ConfigError("segments must be >= 1")
        if self.samples_per_segment < 1:
            raise ConfigError("samples_per_segment must be >= 1")


@dataclass(frozen=True)
class AttributeBlock:
    name: str
    start: int
    stop: int
    is_numeric: bool

    @property
    def sl(self) -> slice:
        return slice(self.start, self.stop)


@dataclass(frozen=True)
class TraceSpace:
    """Coordinate layout: which encoded columns belong to which attribute."""

    dim: int
    blocks: tuple[AttributeBlock, ...]

    @classmethod
    def from_standardizer(cls, std: Standardizer) -> "TraceSpace":
        blocks = tuple(
            AttributeBlock(a.name, sl.start, sl.stop, a.is_numeric)
            for a, sl in std.blocks()
        )
        return cls(dim=std.dim, blocks=blocks)

    @classmethod
    def numeric(cls, dim: int) -> "TraceSpace":
        return cls(
            dim=dim,
            blocks=tuple(AttributeBlock(f"x{r}", r, r + 1, True) for r in range(dim)),
        )

    def attribute_magnitudes(self, deltas: np.ndarray) -> np.ndarray:
        """Attribute-level |change| per segment; categorical blocks count 0.5 * L1."""
        deltas = np.atleast_2d(deltas)
        out = np.empty((deltas.shape[0], len(self.blocks)))
        for r, blk in enumerate(self.blocks):
            mag = np.abs(deltas[:, blk.sl]).sum(axis=1)
            out[:, r] = mag if blk.is_numeric else 0.5 * mag
        return out

    def attribute_signed(self, deltas: np.ndarray, direction: np.ndarray) -> np.ndarray:
        """Signed attribute-level change; categorical blocks project on their switch direction."""
        deltas = np.atleast_2d(deltas)
        out = np.empty((deltas.shape[0], len(self.blocks)))
        for r, blk in enumerate(self.blocks):
            if blk.is_numeric:
                out[:, r] = deltas[:, blk.sl][:, 0]
            else:
                out[:, r] = 0.5 * deltas[:, blk.sl] @ direction[blk.sl]
        return out


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    faithfulness: float
    sparsity: float
    disjointness: float
    monotonicity: float
    evenness: float
    n_changes: dict[str, int]  # per-attribute change counts over the trace
    value_reversals: int
    attribute_reversals: int
    segment_deltas: tuple[float, ...]
    mean_delta: float

    @property
    def reversals(self) -> int:
        return self.value_reversals + self.attribute_reversals

    @property
    def n_adjustments(self) -> int:
        return int(sum(self.n_changes.values()))

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "faithfulness": self.faithfulness,
            "sparsity": self.sparsity,
            "disjointness": self.disjointness,
            "monotonicity": self.monotonicity,
            "evenness": self.evenness,
            "n_changes": dict(self.n_changes),
            "value_reversals": self.value_reversals,
            "attribute_reversals": self.attribute_reversals,
            "segment_deltas": list(self.segment_deltas),
            "mean_delta": self.mean_delta,
        }


@dataclass(frozen=True)
class TraceModel:
    """Trained trace: knots chi_0..chi_T, segment weights, and the base bias.

    knots[0] and knots[-1] are the comparable and subject encodings and are
    never updated by the optimizer. Biases of later segments derive from
    continuity and are exposed via `biases`.
    """

    knots: np.ndarray  # (T+1, dim)
    weights: np.ndarray  # (T, dim); zero on coordinates frozen along the trace
    base_bias: float
    space: TraceSpace
    config: DesiderataConfig
    target_scale: tuple[float, float] = (0.0, 1.0)
    comparable_instance: Instance | None = None
    subject_instance: Instance | None = None

    @property
    def n_segments(self) -> int:
        return self.weights.shape[0]

    def segment_deltas(self) -> np.ndarray:
        return self.knots[1:] - self.knots[:-1]

    def value_deltas(self) -> np.ndarray:
        """Per-segment value change g[j] = w[j] . (knots[j+1] - knots[j])."""
        d = self.segment_deltas()
        return np.array([self.weights[j] @ d[j] for j in range(self.n_segments)])

    def knot_values(self) -> np.ndarray:
        """Standardized trace value at every knot, sequential accumulation."""
        v0 = self.base_bias + self.weights[0] @ self.knots[0]
        return np.cumsum(np.concatenate([[v0], self.value_deltas()]))

    @property
    def biases(self) -> np.ndarray:
        """Derived per-segment biases b_tau (b_1 is the free parameter)."""
        v = self.knot_values()
        return np.array(
            [v[j] - self.weights[j] @ self.knots[j] for j in range(self.n_segments)]
        )

    def segment_value(self, j: int, x: np.ndarray) -> float:
        v = self.knot_values()
        return float(v[j] + self.weights[j] @ (np.asarray(x) - self.knots[j]))

    def value_at_param(self, t: float) -> float:
        """Trace value at arc parameter t in [0, 1], knots at multiples of 1/T."""
        if not 0.0 <= t <= 1.0:
            raise OutOfDomain(f"arc parameter {t} outside [0, 1]")
        T = self.n_segments
        j = min(int(t * T), T - 1)
        s = t * T - j
        v = self.knot_values()
        g = self.value_deltas()
        return float(v[j] + s * g[j])

    def point_at_param(self, t: float) -> np.ndarray:
        if not 0.0 <= t <= 1.0:
            raise OutOfDomain(f"arc parameter {t} outside [0, 1]")
        T = self.n_segments
        j = min(int(t * T), T - 1)
        s = t * T - j
        return self.knots[j] + s * (self.knots[j + 1] - self.knots[j])

    def to_dict(self) -> dict:
        return {
            "format_version": TRACE_FORMAT_VERSION,
            "knots": self.knots.tolist(),
            "weights": self.weights.tolist(),
            "base_bias": self.base_bias,
            "target_scale": list(self.target_scale),
            "space": [
                {
                    "name": b.name,
                    "start": b.start,
                    "stop": b.stop,
                    "is_numeric": b.is_numeric,
                }
                for b in self.space.blocks
            ],
            "config": {
                "lambda_f": self.config.lambda_f,
                "lambda_s": self.config.lambda_s,
                "lambda_d": self.config.lambda_d,
                "lambda_m": self.config.lambda_m,
                "lambda_e": self.config.lambda_e,
                "delta": self.config.delta,
                "segments": self.config.segments,
                "samples_per_segment": self.config.samples_per_segment,
                "max_epochs": self.config.max_epochs,
                "learning_rate": self.config.learning_rate,
                "init_std": self.config.init_std,
                "seed": self.config.seed,
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TraceModel":
        if doc.get("format_version") != TRACE_FORMAT_VERSION:
            raise ConfigError(f"unsupported trace format: {doc.get('format_version')!r}")
        blocks = tuple(
            AttributeBlock(b["name"], b["start"], b["stop"], b["is_numeric"])
            for b in doc["space"]
        )
        knots = np.asarray(doc["knots"], dtype=float)
        return cls(
            knots=knots,
            weights=np.asarray(doc["weights"], dtype=float),
            base_bias=float(doc["base_bias"]),
            space=TraceSpace(dim=knots.shape[1], blocks=blocks),
            config=DesiderataConfig(**doc["config"]),
            target_scale=tuple(doc["target_scale"]),
        )


def evaluate_trace(m: TraceModel, x: np.ndarray, tol: float = 1e-8) -> float:
    """Value of the active segment at a point lying on the polyline."""
    x = np.asarray(x, dtype=float)
    if x.shape != (m.knots.shape[1],):
        raise DimensionMismatch(f"expected dim {m.knots.shape[1]}, got {x.shape}")
    v = m.knot_values()
    g = m.value_deltas()
    deltas = m.segment_deltas()
    for j in range(m.n_segments):
        d = deltas[j]
        dd = float(d @ d)
        if dd == 0.0:
            if np.max(np.abs(x - m.knots[j])) <= tol:
                return float(v[j])
            continue
        s = float((x - m.knots[j]) @ d / dd)
        if -tol <= s <= 1.0 + tol:
            s = min(max(s, 0.0), 1.0)
            if np.max(np.abs(m.knots[j] + s * d - x)) <= tol:
                return float(v[j] + s * g[j])
    raise OutOfDomain("point does not lie on the trace polyline")


# ---------------------------------------------------------------------------
# free-parameter layout
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Geometry:
    """Fixed data tying the flat parameter vector to encoded knots and weights."""

    space: TraceSpace
    x_start: np.ndarray
    x_end: np.ndarray
    n_segments: int
    numeric_idx: np.ndarray  # always-free coordinates
    moving_blocks: tuple[AttributeBlock, ...]  # categorical blocks whose level differs
    active_idx: np.ndarray  # numeric + moving-block coordinates, sorted

    @property
    def n_interior(self) -> int:
        return self.n_segments - 1

    @property
    def n_params(self) -> int:
        T, A = self.n_segments, len(self.active_idx)
        return T * A + self.n_interior * (len(self.numeric_idx) + len(self.moving_blocks)) + 1

    def split(self, theta: np.ndarray):
        T, A = self.n_segments, len(self.active_idx)
        n_num, n_blk = len(self.numeric_idx), len(self.moving_blocks)
        W = theta[: T * A].reshape(T, A)
        ofs = T * A
        K = theta[ofs : ofs + self.n_interior * n_num].reshape(self.n_interior, n_num)
        ofs += self.n_interior * n_num
        Alpha = theta[ofs : ofs + self.n_interior * n_blk].reshape(self.n_interior, n_blk)
        ofs += self.n_interior * n_blk
        return W, K, Alpha, float(theta[ofs])

    def join(self, W, K, Alpha, b1) -> np.ndarray:
        return np.concatenate([W.ravel(), K.ravel(), Alpha.ravel(), [b1]])

    def assemble(self, theta: np.ndarray):
        """(knots (T+1,D), weights_full (T,D), b1) from the flat parameter vector."""
        W, K, Alpha, b1 = self.split(theta)
        T, D = self.n_segments, self.space.dim
        knots = np.tile(self.x_start, (T + 1, 1))
        knots[T] = self.x_end
        for u in range(1, T):
            knots[u, self.numeric_idx] = K[u - 1]
            for bi, blk in enumerate(self.moving_blocks):
                a = Alpha[u - 1, bi]
                knots[u, blk.sl] = (1 - a) * self.x_start[blk.sl] + a * self.x_end[blk.sl]
        weights = np.zeros((T, D))
        weights[:, self.active_idx] = W
        return knots, weights, b1

    def knot_gradient_to_params(self, g_knots: np.ndarray):
        """Map encoded interior-knot gradients (T-1, D) to (K grad, Alpha grad)."""
        gK = g_knots[:, self.numeric_idx].copy()
        gA = np.zeros((self.n_interior, len(self.moving_blocks)))
        for bi, blk in enumerate(self.moving_blocks):
            direction = self.x_end[blk.sl] - self.x_start[blk.sl]
            gA[:, bi] = g_knots[:, blk.sl] @ direction
        return gK, gA


def _make_geometry(space: TraceSpace, x_start: np.ndarray, x_end: np.ndarray, T: int) -> _Geometry:
    numeric_idx, active, moving = [], [], []
    for blk in space.blocks:
        if blk.is_numeric:
            numeric_idx.extend(range(blk.start, blk.stop))
            active.extend(range(blk.start, blk.stop))
        elif np.any(x_start[blk.sl] != x_end[blk.sl]):
            moving.append(blk)
            active.extend(range(blk.start, blk.stop))
    return _Geometry(
        space=space,
        x_start=np.asarray(x_start, dtype=float),
        x_end=np.asarray(x_end, dtype=float),
        n_segments=T,
        numeric_idx=np.array(numeric_idx, dtype=int),
        moving_blocks=tuple(moving),
        active_idx=np.array(sorted(active), dtype=int),
    )


# ---------------------------------------------------------------------------
# supervision and losses
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Supervision:
    """Per-epoch frozen supervision: a first-order model of the predictor.

    Targets are predictor values at the sampled polyline points; `slopes`
    carries the estimated directional derivative of the predictor along each
    sample's segment (finite-differenced from the same batch), expressed per
    encoded coordinate. The faithfulness target for a perturbed geometry is
    ``targets + slopes . (x(theta) - x0)``, so knot motion feels how the
    model surface changes along the path, while the predictor itself stays
    a constant black box within the epoch.
    """

    seg: np.ndarray  # 0-based segment index per sample
    frac: np.ndarray  # position within the segment, 0..1
    targets: np.ndarray  # standardized predictor values at the sampled points
    x0: np.ndarray  # sample positions at the epoch's geometry
    slopes: np.ndarray  # d target / d x along the segment, (n, dim)


def _sample_positions(T: int, per_segment: int) -> tuple[np.ndarray, np.ndarray]:
    """Every knot plus `per_segment` evenly spaced interior points per segment."""
    seg, frac = [0], [0.0]
    inner = np.arange(1, per_segment + 1) / (per_segment + 1)
    for j in range(T):
        seg.extend([j] * per_segment)
        frac.extend(inner)
        seg.append(j)
        frac.append(1.0)
    return np.array(seg, dtype=int), np.array(frac, dtype=float)


def _points_on_polyline(knots: np.ndarray, seg: np.ndarray, frac: np.ndarray) -> np.ndarray:
    return knots[seg] + frac[:, None] * (knots[seg + 1] - knots[seg])


def _supervise(
    p: Predictor, knots: np.ndarray, T: int, per_segment: int, scale: tuple[float, float]
) -> _Supervision:
    seg, frac = _sample_positions(T, per_segment)
    xs = _points_on_polyline(knots, seg, frac)
    mean, std = scale
    targets = (predict(p, xs) - mean) / std

    slopes = np.zeros_like(xs)
    deltas = knots[1:] - knots[:-1]
    for j in range(T):
        mask = seg == j
        d = deltas[j]
        dd = float(d @ d)
        if dd == 0.0:
            continue
        fr = frac[mask]
        order = np.argsort(fr, kind="stable")
        if j > 0:
            # borrow the shared knot value from the previous segment's end
            prev_end = np.flatnonzero((seg == j - 1) & (frac == 1.0))[0]
            fr_full = np.concatenate([[0.0], fr[order]])
            val_full = np.concatenate([[targets[prev_end]], targets[mask][order]])
        else:
            fr_full = fr[order]
            val_full = targets[mask][order]
        dyds = np.gradient(val_full, fr_full)
        if j > 0:
            dyds = dyds[1:]
        per_sample = np.empty(mask.sum())
        per_sample[order] = dyds
        # derivative per fraction becomes derivative per coordinate along d
        slopes[mask] = per_sample[:, None] * d[None, :] / dd
    return _Supervision(seg=seg, frac=frac, targets=targets, x0=xs, slopes=slopes)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _smooth_loss_and_grad(theta: np.ndarray, geom: _Geometry, cfg: DesiderataConfig, sup: _Supervision):
    """Surrogate total loss and its analytic gradient in the flat parameters.

    Faithfulness residuals compare the trace against the supervision's
    first-order target model and pass through a pseudo-Huber derivative;
    the disjointness indicator and max use sigmoid and log-sum-exp.
    """
    knots, weights, b1 = geom.assemble(theta)
    T, D = geom.n_segments, geom.space.dim
    deltas = knots[1:] - knots[:-1]
    g = np.einsum("ij,ij->i", weights, deltas)
    v0 = b1 + weights[0] @ knots[0]
    v = np.cumsum(np.concatenate([[v0], g]))

    n = len(sup.targets)
    xs = _points_on_polyline(knots, sup.seg, sup.frac)
    shift = np.einsum("ij,ij->i", sup.slopes, xs - sup.x0)
    pred = v[sup.seg] + sup.frac * g[sup.seg]
    resid = pred - (sup.targets + shift)
    loss_f = float(np.sqrt(resid**2 + FAITHFULNESS_HUBER_EPS**2).mean())
    dr = resid / np.sqrt(resid**2 + FAITHFULNESS_HUBER_EPS**2) / n

    # supervision-weighted per-segment coefficients: A[j] collects d pred / d g[j]
    full = np.bincount(sup.seg, weights=dr, minlength=T)
    partial = np.bincount(sup.seg, weights=dr * sup.frac, minlength=T)
    suffix = np.concatenate([np.cumsum(full[::-1])[::-1][1:], [0.0]])
    A = suffix + partial
    gb1 = float(dr.sum())

    # accumulated d loss / d g[j] across faithfulness, evenness, value monotonicity
    e = cfg.lambda_f * A
    mu = g.mean()
    loss_e = float(((g - mu) ** 2).sum())
    e = e + cfg.lambda_e * 2.0 * (g - mu)

    loss_m = 0.0
    if T >= 2:
        prod_v = -g[1:] * g[:-1]
        act_v = prod_v > 0
        loss_m += float(prod_v[act_v].sum())
        dm = np.zeros(T)
        dm[1:] += np.where(act_v, -g[:-1], 0.0)
        dm[:-1] += np.where(act_v, -g[1:], 0.0)
        e = e + cfg.lambda_m * dm

    # d loss / d deltas[j] for the knot-geometry terms
    d_deltas = np.zeros((T, D))

    loss_s = float(np.abs(deltas).sum())
    d_deltas += cfg.lambda_s * np.sign(deltas)

    if T >= 2:
        prod_x = -deltas[1:] * deltas[:-1]
        act_x = prod_x > 0
        loss_m += float(prod_x[act_x].sum())
        d_deltas[1:] += cfg.lambda_m * np.where(act_x, -deltas[:-1], 0.0)
        d_deltas[:-1] += cfg.lambda_m * np.where(act_x, -deltas[1:], 0.0)

    # disjointness surrogate: sigmoid change indicators, log-sum-exp over attributes
    mags = geom.space.attribute_magnitudes(deltas)
    width = INDICATOR_SHARPNESS * cfg.delta
    z = (mags - cfg.delta) / width
    sig = _sigmoid(z)
    counts = sig.sum(axis=0)
    shifted = counts / LSE_TEMPERATURE
    shifted = shifted - shifted.max()
    expn = np.exp(shifted)
    loss_d = float(LSE_TEMPERATURE * (np.log(expn.sum()) + counts.max() / LSE_TEMPERATURE))
    softmax = expn / expn.sum()
    d_mag = (sig * (1.0 - sig) / width) * softmax[None, :]
    for r, blk in enumerate(geom.space.blocks):
        scale = 1.0 if blk.is_numeric else 0.5
        d_deltas[:, blk.sl] += (
            cfg.lambda_d * scale * d_mag[:, r : r + 1] * np.sign(deltas[:, blk.sl])
        )

    total = (
        cfg.lambda_f * loss_f
        + cfg.lambda_s * loss_s
        + cfg.lambda_d * loss_d
        + cfg.lambda_m * loss_m
        + cfg.lambda_e * loss_e
    )

    # back out gradients in the flat parameters
    act = geom.active_idx
    gW = e[:, None] * deltas[:, act]
    gW[0] += cfg.lambda_f * gb1 * knots[0, act]

    g_knots = np.zeros((geom.n_interior, D))
    if geom.n_interior:
        # through g[j] = w[j] . deltas[j]
        g_knots += e[:-1, None] * weights[:-1] - e[1:, None] * weights[1:]
        # through deltas[j] = knots[j+1] - knots[j]
        g_knots += d_deltas[:-1] - d_deltas[1:]
        # target-model motion: samples drag their linearized targets along
        move = cfg.lambda_f * dr[:, None] * sup.slopes
        left = np.zeros((T, D))
        right = np.zeros((T, D))
        np.add.at(left, sup.seg, move * (1.0 - sup.frac)[:, None])
        np.add.at(right, sup.seg, move * sup.frac[:, None])
        # sample on segment j moves with knots j (weight 1-s) and j+1 (weight s)
        g_knots -= left[1:]  # left-knot roles of interior knots 1..T-1
        g_knots -= right[:-1]  # right-knot roles of interior knots 1..T-1
    gK, gA = geom.knot_gradient_to_params(g_knots)

    grad = geom.join(gW, gK, gA, cfg.lambda_f * gb1)
    return float(total), grad


def _exact_components(
    knots: np.ndarray,
    weights: np.ndarray,
    b1: float,
    space: TraceSpace,
    cfg: DesiderataConfig,
    sup: _Supervision,
    x_start: np.ndarray,
    x_end: np.ndarray,
) -> LossBreakdown:
    T = weights.shape[0]
    deltas = knots[1:] - knots[:-1]
    g = np.einsum("ij,ij->i", weights, deltas)
    v0 = b1 + weights[0] @ knots[0]
    v = np.cumsum(np.concatenate([[v0], g]))

    pred = v[sup.seg] + sup.frac * g[sup.seg]
    loss_f = float(np.abs(pred - sup.targets).mean())
    loss_s = float(np.abs(deltas).sum())

    mags = space.attribute_magnitudes(deltas)
    changed = mags > cfg.delta
    n_per_attr = changed.sum(axis=0)
    loss_d = float(n_per_attr.max()) if len(n_per_attr) else 0.0

    loss_m = 0.0
    value_rev = 0
    attr_rev = 0
    if T >= 2:
        prod_v = -g[1:] * g[:-1]
        loss_m += float(np.clip(prod_v, 0.0, None).sum())
        prod_x = -deltas[1:] * deltas[:-1]
        loss_m += float(np.clip(prod_x, 0.0, None).sum())
        big = np.abs(g) > cfg.delta
        value_rev = int(np.sum((g[1:] * g[:-1] < 0) & big[1:] & big[:-1]))
        signed = space.attribute_signed(deltas, x_end - x_start)
        big_a = np.abs(signed) > cfg.delta
        attr_rev = int(np.sum((signed[1:] * signed[:-1] < 0) & big_a[1:] & big_a[:-1]))

    mu = float(g.mean())
    loss_e = float(((g - mu) ** 2).sum())

    total = (
        cfg.lambda_f * loss_f
        + cfg.lambda_s * loss_s
        + cfg.lambda_d * loss_d
        + cfg.lambda_m * loss_m
        + cfg.lambda_e * loss_e
    )
    return LossBreakdown(
        total=float(total),
        faithfulness=loss_f,
        sparsity=loss_s,
        disjointness=loss_d,
        monotonicity=loss_m,
        evenness=loss_e,
        n_changes={
            blk.name: int(c) for blk, c in zip(space.blocks, n_per_attr)
        },
        value_reversals=value_rev,
        attribute_reversals=attr_rev,
        segment_deltas=tuple(float(x) for x in g),
        mean_delta=mu,
    )


def loss(m: TraceModel, p: Predictor, cfg: DesiderataConfig | None = None) -> LossBreakdown:
    """Exact desiderata breakdown of a trace against the predictor."""
    cfg = cfg or m.config
    sup = _supervise(p, m.knots, m.n_segments, cfg.samples_per_segment, m.target_scale)
    return _exact_components(
        m.knots, m.weights, m.base_bias, m.space, cfg, sup, m.knots[0], m.knots[-1]
    )


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


class _Adam:
    """Plain Adam on a flat parameter vector; the learning rate is mutable."""

    def __init__(self, n: int, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.t = 0

    def step(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad**2
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return theta - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def default_segment_count(
    x_start: np.ndarray, x_end: np.ndarray, space: TraceSpace, delta: float
) -> int:
    """One segment per attribute differing by more than delta, capped."""
    mags = space.attribute_magnitudes((x_end - x_start)[None, :])[0]
    return int(min(max(int((mags > delta).sum()), 1), MAX_AUTO_SEGMENTS))


def _warm_parts(
    geom: _Geometry, p: Predictor, cfg: DesiderataConfig, scale: tuple[float, float]
) -> tuple[np.ndarray, float]:
    """Locally-fit segment weights and matching first bias, in standardized units."""
    ss = np.random.SeedSequence(cfg.seed)
    lime_seed = int(ss.spawn(1)[0].generate_state(1)[0])
    local = fit_local_linear(
        p, geom.x_start, radius=1.0, n=max(WARMSTART_SAMPLES, geom.space.dim + 1), seed=lime_seed
    )
    mean, std = scale
    w0 = local.weights[geom.active_idx] / std
    y_c = float((predict(p, geom.x_start[None, :])[0] - mean) / std)
    b1 = y_c - float(w0 @ geom.x_start[geom.active_idx])
    return w0, b1


def _straight_theta(geom: _Geometry, w0: np.ndarray, b1: float) -> np.ndarray:
    """Evenly spaced knots on the comparable -> subject line, constant weights."""
    T = geom.n_segments
    W = np.tile(w0, (T, 1))
    ts = np.arange(1, T)[:, None] / T
    K = (1 - ts) * geom.x_start[geom.numeric_idx] + ts * geom.x_end[geom.numeric_idx]
    Alpha = np.tile(ts, (1, len(geom.moving_blocks)))
    return geom.join(W, K, Alpha, b1)


def _staircase_theta(geom: _Geometry, w0: np.ndarray, b1: float) -> np.ndarray:
    """Axis-aligned knots changing one attribute at a time, larger spans first
    getting extra segments; the disjoint arrangement the step view presents."""
    T = geom.n_segments
    x_c, x_s = geom.x_start, geom.x_end
    spans = geom.space.attribute_magnitudes((x_s - x_c)[None, :])[0]
    moving = [r for r, s in enumerate(spans) if s > 0]
    if not moving:
        return _straight_theta(geom, w0, b1)
    # proportional segment allocation with at least one segment per attribute
    # while segments remain (largest spans keep extras)
    order = sorted(moving, key=lambda r: -spans[r])
    alloc = {r: 0 for r in moving}
    for i, r in enumerate(order):
        if i < T:
            alloc[r] = 1
    remaining = T - sum(alloc.values())
    if remaining > 0:
        total_span = sum(spans[r] for r in moving)
        extras = [
            (r, spans[r] / total_span * remaining) for r in order
        ]
        for r, share in extras:
            take = int(share)
            alloc[r] += take
            remaining -= take
        for r, _ in sorted(extras, key=lambda t: -(t[1] - int(t[1]))):
            if remaining == 0:
                break
            alloc[r] += 1
            remaining -= 1
    if sum(alloc.values()) < T:  # fewer moving attributes than segments leftover
        alloc[order[0]] += T - sum(alloc.values())

    # walk attributes in schema order, moving each across its allocated segments
    knots = [x_c.copy()]
    current = x_c.copy()
    for r, blk in enumerate(geom.space.blocks):
        m = alloc.get(r, 0)
        if m == 0:
            continue
        for step in range(1, m + 1):
            current = current.copy()
            frac = step / m
            current[blk.sl] = (1 - frac) * x_c[blk.sl] + frac * x_s[blk.sl]
            knots.append(current)
    knots[-1] = x_s.copy()
    interior = np.stack(knots[1:-1]) if T > 1 else np.zeros((0, geom.space.dim))

    W = np.tile(w0, (T, 1))
    K = interior[:, geom.numeric_idx] if T > 1 else np.zeros((0, len(geom.numeric_idx)))
    Alpha = np.zeros((geom.n_interior, len(geom.moving_blocks)))
    for bi, blk in enumerate(geom.moving_blocks):
        direction = geom.x_end[blk.sl] - geom.x_start[blk.sl]
        dd = float(direction @ direction)
        for u in range(geom.n_interior):
            Alpha[u, bi] = float((interior[u, blk.sl] - geom.x_start[blk.sl]) @ direction / dd)
    return geom.join(W, K, Alpha, b1)


def _initial_theta(
    geom: _Geometry,
    p: Predictor,
    cfg: DesiderataConfig,
    scale: tuple[float, float],
    w0: np.ndarray,
    b1: float,
) -> np.ndarray:
    """Straight-line knots and locally-fit weights, both perturbed by init noise."""
    ss = np.random.SeedSequence(cfg.seed)
    noise_seed = int(ss.spawn(2)[1].generate_state(1)[0])
    rng = np.random.default_rng(noise_seed)
    theta = _straight_theta(geom, w0, b1)
    W, K, Alpha, b = geom.split(theta)
    W = W + rng.normal(0.0, cfg.init_std, size=W.shape)
    K = K + rng.normal(0.0, cfg.init_std, size=K.shape)
    if Alpha.size:
        Alpha = np.clip(Alpha + rng.normal(0.0, cfg.init_std, size=Alpha.shape), 0.0, 1.0)
    b = b + rng.normal(0.0, cfg.init_std)
    return geom.join(W, K, Alpha, b)


def _clip_alpha(theta: np.ndarray, geom: _Geometry) -> np.ndarray:
    if not geom.moving_blocks or geom.n_interior == 0:
        return theta
    W, K, Alpha, b1 = geom.split(theta)
    return geom.join(W, K, np.clip(Alpha, 0.0, 1.0), b1)


def _theta_from_arrays(
    geom: _Geometry, knots: np.ndarray, weights: np.ndarray, b1: float
) -> np.ndarray:
    """Flat parameters reproducing the given trace arrays (same segment count)."""
    if knots.shape != (geom.n_segments + 1, geom.space.dim):
        raise DimensionMismatch("warm-start knots do not match the trace geometry")
    W = weights[:, geom.active_idx]
    K = knots[1:-1, geom.numeric_idx] if geom.n_interior else np.zeros((0, len(geom.numeric_idx)))
    Alpha = np.zeros((geom.n_interior, len(geom.moving_blocks)))
    for bi, blk in enumerate(geom.moving_blocks):
        direction = geom.x_end[blk.sl] - geom.x_start[blk.sl]
        dd = float(direction @ direction)
        for u in range(geom.n_interior):
            Alpha[u, bi] = float(
                np.clip((knots[u + 1, blk.sl] - geom.x_start[blk.sl]) @ direction / dd, 0.0, 1.0)
            )
    return geom.join(W, K, Alpha, b1)


def fit_trace(
    p: Predictor,
    x_comparable: np.ndarray,
    x_subject: np.ndarray,
    cfg: DesiderataConfig | None = None,
    space: TraceSpace | None = None,
    target_scale: tuple[float, float] = (0.0, 1.0),
    comparable_instance: Instance | None = None,
    subject_instance: Instance | None = None,
    warm_start: TraceModel | None = None,
) -> tuple[TraceModel, LossBreakdown]:
    """Train a trace from the comparable to the subject against the predictor.

    Endpoints stay pinned. Adam runs a geometric learning-rate ladder from
    cfg.learning_rate down to LR_END over LR_STAGES stages within
    cfg.max_epochs, restarting each stage from the best iterate so the noisy
    high-rate exploration cannot lose the best basin found; the noise-free
    warm start is scored as candidate zero. Supervision is re-queried from
    the predictor each epoch at the current knots and frozen as a
    first-order model within the epoch's gradient. Returns the best-loss
    iterate by the exact desiderata total.
    """
    cfg = cfg or DesiderataConfig()
    x_c = np.asarray(x_comparable, dtype=float)
    x_s = np.asarray(x_subject, dtype=float)
    if x_c.shape != x_s.shape or x_c.ndim != 1:
        raise DimensionMismatch("comparable and subject must be same-dim vectors")
    if np.array_equal(x_c, x_s):
        raise NoDifference("comparable and subject are identical")
    space = space or TraceSpace.numeric(len(x_c))
    if space.dim != len(x_c):
        raise DimensionMismatch("space does not match vector dimension")

    T = cfg.segments or default_segment_count(x_c, x_s, space, cfg.delta)
    geom = _make_geometry(space, x_c, x_s, T)

    def evaluate(th: np.ndarray) -> float:
        knots, weights, b1 = geom.assemble(th)
        sup = _supervise(p, knots, T, cfg.samples_per_segment, target_scale)
        return _exact_components(knots, weights, b1, space, cfg, sup, x_c, x_s).total

    # candidate 0: the noise-free straight warm start (the locally-linear
    # incumbent); exploration restarts only from this lineage
    w0, b1_init = _warm_parts(geom, p, cfg, target_scale)
    best_theta = _straight_theta(geom, w0, b1_init)
    best_loss = evaluate(best_theta)
    if warm_start is not None:
        candidate = _theta_from_arrays(
            geom, warm_start.knots, warm_start.weights, warm_start.base_bias
        )
        candidate_loss = evaluate(candidate)
        if candidate_loss < best_loss:
            best_theta, best_loss = candidate, candidate_loss

    theta = (
        _initial_theta(geom, p, cfg, target_scale, w0, b1_init)
        if cfg.init_std > 0
        else best_theta.copy()
    )
    factor = (LR_END / cfg.learning_rate) ** (1.0 / max(LR_STAGES - 1, 1))
    stage_len = max(cfg.max_epochs // LR_STAGES, 1)
    epoch = 0
    for stage in range(LR_STAGES):
        if epoch >= cfg.max_epochs:
            break
        adam = _Adam(len(theta), cfg.learning_rate * factor**stage)
        if stage > 0:
            theta = best_theta.copy()
        for _ in range(stage_len):
            if epoch >= cfg.max_epochs:
                break
            knots, weights, b1 = geom.assemble(theta)
            sup = _supervise(p, knots, T, cfg.samples_per_segment, target_scale)
            exact = _exact_components(knots, weights, b1, space, cfg, sup, x_c, x_s)
            if not np.isfinite(exact.total):
                raise Diverged(f"non-finite loss at epoch {epoch}")
            if exact.total < best_loss:
                best_loss = exact.total
                best_theta = theta.copy()
            _, grad = _smooth_loss_and_grad(theta, geom, cfg, sup)
            theta = _clip_alpha(adam.step(theta, grad), geom)
            epoch += 1

    # the disjoint staircase rearrangement of the warm start competes only in
    # the final selection, never as a restart basin
    stair = _staircase_theta(geom, w0, b1_init)
    if evaluate(stair) < best_loss:
        best_theta = stair

    knots, weights, b1 = geom.assemble(best_theta)
    model = TraceModel(
        knots=knots,
        weights=weights,
        base_bias=b1,
        space=space,
        config=cfg,
        target_scale=target_scale,
        comparable_instance=comparable_instance,
        subject_instance=subject_instance,
    )
    return model, loss(model, p, cfg)


# ---------------------------------------------------------------------------
# presentation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Step:
    changed_attributes: tuple[tuple[str, object, object], ...]  # (name, from, to)
    money_delta: float
    running_value: float


@dataclass(frozen=True)
class TraceSteps:
    steps: tuple[Step, ...]
    final_adjusted_value: float
    anchor_value: float

    def to_dict(self) -> dict:
        return {
            "steps": [
                {
                    "changed_attributes": [
                        {"attribute": name, "from": frm, "to": to}
                        for name, frm, to in s.changed_attributes
                    ],
                    "money_delta": s.money_delta,
                    "running_value": s.running_value,
                }
                for s in self.steps
            ],
            "final_adjusted_value": self.final_adjusted_value,
            "anchor_value": self.anchor_value,
        }


def extract_steps(
    m: TraceModel,
    comparable: Comparable,
    std: Standardizer | None = None,
    delta: float | None = None,
    prediction_anchored: bool = False,
) -> TraceSteps:
    """Human-readable one-step-per-segment adjustments in raw units.

    Attributes moving by at most delta are reported unchanged; categorical
    blocks snap to the nearer endpoint level and report the switch in the
    segment where the relaxed coordinate crosses 0.5. The final state snaps
    exactly to the subject.
    """
    delta = m.config.delta if delta is None else delta
    T = m.n_segments
    g = m.value_deltas()
    _, y_std = m.target_scale
    anchor = comparable.ai_prediction if prediction_anchored else comparable.actual_value

    deltas = m.segment_deltas()
    mags = m.space.attribute_magnitudes(deltas)

    subj = m.subject_instance
    comp = comparable.instance

    def raw_value(blk_index: int, blk: AttributeBlock, knot_index: int):
        knot = m.knots[knot_index]
        if blk.is_numeric:
            if knot_index == T and subj is not None:
                return subj.values[blk_index]
            if knot_index == 0 and comp is not None:
                return comp.values[blk_index]
            if std is not None:
                a = std.schema.attributes[blk_index]
                return float(knot[blk.start]) * std.stds[a.name] + std.means[a.name]
            return float(knot[blk.start])
        # categorical: nearer endpoint wins
        toward_subject = float(
            np.abs(knot[blk.sl] - m.knots[0][blk.sl]).sum()
        ) >= float(np.abs(knot[blk.sl] - m.knots[T][blk.sl]).sum())
        source = subj if toward_subject else comp
        if source is not None:
            return source.values[blk_index]
        return "subject-level" if toward_subject else "comparable-level"

    steps = []
    running = anchor
    for j in range(T):
        changed = []
        for r, blk in enumerate(m.space.blocks):
            if blk.is_numeric:
                if mags[j, r] > delta:
                    changed.append((blk.name, raw_value(r, blk, j), raw_value(r, blk, j + 1)))
            else:
                frm, to = raw_value(r, blk, j), raw_value(r, blk, j + 1)
                if frm != to:
                    changed.append((blk.name, frm, to))
        money = float(g[j] * y_std)
        running = running + money
        steps.append(
            Step(changed_attributes=tuple(changed), money_delta=money, running_value=running)
        )
    return TraceSteps(steps=tuple(steps), final_adjusted_value=running, anchor_value=anchor)


def trace_adjusted_value(
    m: TraceModel, comparable: Comparable, prediction_anchored: bool = False
) -> float:
    """Comparable value plus the trace's total standardized delta, in target units."""
    v = m.knot_values()
    _, y_std = m.target_scale
    anchor = comparable.ai_prediction if prediction_anchored else comparable.actual_value
    return float(anchor + (v[-1] - v[0]) * y_std)


def trace_adjusted_estimate(
    traces: Sequence[TraceModel],
    cset: ComparableSet,
    prediction_anchored: bool = False,
) -> ReconciledEstimate:
    """Reconcile per-comparable trace-adjusted values with the weighted average."""
    if len(traces) != len(cset.comparables):
        raise DimensionMismatch("need exactly one trained trace per comparable")
    adjusted = np.array(
        [
            trace_adjusted_value(m, c, prediction_anchored)
            for m, c in zip(traces, cset.comparables)
        ]
    )
    rho = np.asarray(cset.similarities)
    point = float(np.dot(rho, adjusted) / rho.sum())
    low, high = uncertainty_bounds(adjusted)
    return ReconciledEstimate(
        point_estimate=point, bounds=(low, high), method_tag=Method.TRACE_ADJUSTMENTS
    )
