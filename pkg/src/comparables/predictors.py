"""Black-box regression predictors: built-in test functions, kNN, and a remote client.

Every predictor maps a batch of encoded standardized vectors to one finite
prediction per row. Batch evaluation is the primary interface because trace
training queries many points per optimization step.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import numpy as np
import requests

from .errors import ConfigError, DimensionMismatch, KTooLarge, RemoteUnavailable
from .schema import Dataset, Standardizer

EPS_WEIGHT = 1e-6  # inverse-distance floor, shared with comparable similarities

PREDICTOR_URL_ENV = "COMPARABLES_PREDICTOR_URL"


@runtime_checkable
class Predictor(Protocol):
    description: str

    def predict(self, xs: np.ndarray) -> np.ndarray: ...


def _as_batch(xs: np.ndarray, dim: int | None) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    if xs.ndim == 1:
        xs = xs[None, :]
    if xs.ndim != 2:
        raise DimensionMismatch(f"expected a batch of vectors, got shape {xs.shape}")
    if dim is not None and xs.shape[1] != dim:
        raise DimensionMismatch(f"predictor expects dim {dim}, got {xs.shape[1]}")
    return xs


@dataclass(frozen=True)
class LinearPredictor:
    weights: tuple[float, ...]
    bias: float = 0.0
    description: str = "linear"

    def predict(self, xs: np.ndarray) -> np.ndarray:
        xs = _as_batch(xs, len(self.weights))
        return xs @ np.asarray(self.weights) + self.bias


@dataclass(frozen=True)
class QuadraticPredictor:
    """f(x) = sum_r q_r x_r^2 + w.x + b (diagonal quadratic)."""

    quad: tuple[float, ...]
    weights: tuple[float, ...] = ()
    bias: float = 0.0
    description: str = "quadratic"

    def predict(self, xs: np.ndarray) -> np.ndarray:
        xs = _as_batch(xs, len(self.quad))
        w = np.asarray(self.weights) if self.weights else np.zeros(len(self.quad))
        return (xs**2) @ np.asarray(self.quad) + xs @ w + self.bias


@dataclass(frozen=True)
class SinusoidLinearPredictor:
    """f(x) = sum_r a_r sin(omega_r x_r + phi_r) + w.x + b."""

    amplitude: tuple[float, ...]
    frequency: tuple[float, ...]
    phase: tuple[float, ...] = ()
    weights: tuple[float, ...] = ()
    bias: float = 0.0
    description: str = "sinusoid-plus-linear"

    def predict(self, xs: np.ndarray) -> np.ndarray:
        d = len(self.amplitude)
        xs = _as_batch(xs, d)
        phase = np.asarray(self.phase) if self.phase else np.zeros(d)
        w = np.asarray(self.weights) if self.weights else np.zeros(d)
        sin_part = np.sin(xs * np.asarray(self.frequency) + phase) @ np.asarray(self.amplitude)
        return sin_part + xs @ w + self.bias


@dataclass(frozen=True)
class PlateauPredictor:
    """f(x) = sum_r a_r floor((x_r - c_r) / width_r): flat plateaus with jumps."""

    amplitude: tuple[float, ...]
    width: tuple[float, ...]
    offset: tuple[float, ...] = ()
    bias: float = 0.0
    description: str = "piecewise-plateau"

    def predict(self, xs: np.ndarray) -> np.ndarray:
        d = len(self.amplitude)
        xs = _as_batch(xs, d)
        offset = np.asarray(self.offset) if self.offset else np.zeros(d)
        steps = np.floor((xs - offset) / np.asarray(self.width))
        return steps @ np.asarray(self.amplitude) + self.bias


@dataclass(frozen=True)
class KnnRegressor:
    """Inverse-distance-weighted mean of the k nearest training targets.

    Distances are Manhattan in the encoded standardized space, with the
    standardizer's categorical block weights applied.
    """

    train_x: np.ndarray
    train_y: np.ndarray
    k: int
    coord_weights: np.ndarray
    description: str = "knn"

    def __post_init__(self):
        if self.k < 1 or self.k > len(self.train_y):
            raise KTooLarge(f"k={self.k} with {len(self.train_y)} training rows")

    def predict(self, xs: np.ndarray) -> np.ndarray:
        xs = _as_batch(xs, self.train_x.shape[1])
        out = np.empty(len(xs))
        for i, x in enumerate(xs):
            d = np.abs(self.train_x - x) @ self.coord_weights
            idx = np.argsort(d, kind="stable")[: self.k]
            w = 1.0 / (d[idx] + EPS_WEIGHT)
            out[i] = float(np.dot(w, self.train_y[idx]) / w.sum())
        return out


def fit_knn(dataset: Dataset, std: Standardizer, k: int) -> KnnRegressor:
    if k > len(dataset):
        raise KTooLarge(f"k={k} exceeds dataset size {len(dataset)}")
    xs = std.transform_batch(inst for inst, _ in dataset.rows)
    return KnnRegressor(
        train_x=xs,
        train_y=dataset.actual_values,
        k=k,
        coord_weights=std.coord_weights,
        description=f"knn(k={k})",
    )


@dataclass
class RemotePredictor:
    """HTTP client for an external model service.

    POSTs {"inputs": [[...], ...]} and expects {"predictions": [...]}.
    Connection failures and timeouts are retried up to `retries` times; a
    well-formed response is never retried.
    """

    url: str
    timeout: float = 10.0
    retries: int = 2
    description: str = "remote"
    _session: requests.Session = field(default_factory=requests.Session, repr=False)

    def predict(self, xs: np.ndarray) -> np.ndarray:
        xs = _as_batch(xs, None)
        payload = {"inputs": xs.tolist()}
        last_err: Exception | None = None
        for _ in range(self.retries + 1):
            try:
                resp = self._session.post(self.url, json=payload, timeout=self.timeout)
            except requests.RequestException as exc:
                last_err = exc
                continue
            if resp.status_code != 200:
                raise RemoteUnavailable(
                    f"predictor endpoint returned {resp.status_code}: {resp.text[:200]}"
                )
            try:
                preds = resp.json()["predictions"]
            except (ValueError, KeyError) as exc:
                raise RemoteUnavailable(f"malformed predictor response: {exc}") from exc
            arr = np.asarray(preds, dtype=float)
            if arr.shape != (len(xs),):
                raise RemoteUnavailable(
                    f"expected {len(xs)} predictions, got shape {arr.shape}"
                )
            return arr
        raise RemoteUnavailable(f"predictor at {self.url} unreachable: {last_err}")


def predict(p: Predictor, xs: np.ndarray) -> np.ndarray:
    """Order-preserving batch prediction with finiteness checking."""
    out = np.asarray(p.predict(np.asarray(xs, dtype=float)), dtype=float)
    if not np.all(np.isfinite(out)):
        raise RemoteUnavailable(f"predictor {p.description!r} produced non-finite values")
    return out


def _parse_params(spec: str) -> dict[str, str]:
    params: dict[str, str] = {}
    for part in spec.split(","):
        if not part:
            continue
        if "=" not in part:
            raise ConfigError(f"bad predictor parameter {part!r} (expected key=value)")
        key, val = part.split("=", 1)
        params[key.strip()] = val.strip()
    return params


def _floats(val: str) -> tuple[float, ...]:
    return tuple(float(v) for v in val.split(";") if v != "")


def build_predictor(
    spec: str,
    dataset: Dataset | None = None,
    std: Standardizer | None = None,
) -> Predictor:
    """Build a predictor from a CLI-style spec string.

    Formats: "linear:w=1;2;3,b=0.5", "quadratic:q=1;1,w=0;0,b=0",
    "sinlin:a=1;1,f=2;2,w=0.5;0.5,b=0", "plateau:a=1,width=0.5",
    "knn:k=5" (needs a dataset), "remote:URL" or "remote" with the
    COMPARABLES_PREDICTOR_URL environment variable set.
    """
    name, _, rest = spec.partition(":")
    name = name.strip().lower()
    if name == "remote":
        url = rest.strip() or os.environ.get(PREDICTOR_URL_ENV, "")
        if not url:
            raise ConfigError(
                f"remote predictor needs a URL (inline or ${PREDICTOR_URL_ENV})"
            )
        return RemotePredictor(url=url, description=f"remote({url})")
    if name == "knn":
        if dataset is None or std is None:
            raise ConfigError("knn predictor needs a dataset and standardizer")
        params = _parse_params(rest)
        return fit_knn(dataset, std, k=int(params.get("k", "5")))

    params = _parse_params(rest)
    if name == "linear":
        return LinearPredictor(weights=_floats(params["w"]), bias=float(params.get("b", 0)))
    if name == "quadratic":
        q = _floats(params["q"])
        return QuadraticPredictor(
            quad=q,
            weights=_floats(params["w"]) if "w" in params else (0.0,) * len(q),
            bias=float(params.get("b", 0)),
        )
    if name == "sinlin":
        a = _floats(params["a"])
        return SinusoidLinearPredictor(
            amplitude=a,
            frequency=_floats(params["f"]),
            phase=_floats(params["phi"]) if "phi" in params else (0.0,) * len(a),
            weights=_floats(params["w"]) if "w" in params else (0.0,) * len(a),
            bias=float(params.get("b", 0)),
        )
    if name == "plateau":
        a = _floats(params["a"])
        return PlateauPredictor(
            amplitude=a,
            width=_floats(params["width"]) if "width" in params else (1.0,) * len(a),
            offset=_floats(params["c"]) if "c" in params else (0.0,) * len(a),
            bias=float(params.get("b", 0)),
        )
    raise ConfigError(
        f"unknown predictor {name!r}; valid: linear, quadratic, sinlin, plateau, knn, remote"
    )
