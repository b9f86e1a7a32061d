"""HTTP API backing the decision grid: browsing, explanations, decision scoring.

All endpoints speak JSON, carry the X-CXAI-Version header, and return
error bodies shaped {error, code, detail}. Explanations are cached by
(dataset, subject, method, k, config hash, seed) so expanding a trace in
the UI never retrains; responses are canonical JSON, byte-identical for a
fixed seed.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response

from . import errors
from .evaluation import DecisionResponse, decision_metrics
from .explain import ExplainContext, build_context, explain_document
from .predictors import Predictor
from .schema import Dataset
from .selection import Method
from .trace import DesiderataConfig

API_VERSION = "1"
TOO_WIDE_FRACTION = 0.10  # interval counts as too wide beyond +/-10% of actual

METHOD_NAMES = {m.value: m for m in Method}


def _error_body(code: int, error: str, detail: str) -> dict:
    return {"error": error, "code": code, "detail": detail}


@dataclass
class SessionRecord:
    session_id: str
    mode: str  # "practice" or "main"
    responses: list = field(default_factory=list)  # append-only


@dataclass
class _DatasetEntry:
    dataset: Dataset
    ctx: ExplainContext

    def candidates_for(self, subject_index: int) -> ExplainContext:
        rest = tuple(
            r for i, r in enumerate(self.dataset.rows) if i != subject_index
        )
        pared = Dataset(
            schema=self.dataset.schema, rows=rest, provenance=self.dataset.provenance
        )
        ctx = ExplainContext(
            dataset=pared,
            std=self.ctx.std,
            predictor=self.ctx.predictor,
            target_mean=self.ctx.target_mean,
            target_std=self.ctx.target_std,
        )
        import numpy as np

        keep = [i for i in range(len(self.dataset.rows)) if i != subject_index]
        ctx.__dict__["z_rows"] = self.ctx.z_rows[np.array(keep)]
        return ctx


def _config_key(cfg: DesiderataConfig) -> str:
    return json.dumps(
        {
            "lambda_f": cfg.lambda_f,
            "lambda_s": cfg.lambda_s,
            "lambda_d": cfg.lambda_d,
            "lambda_m": cfg.lambda_m,
            "lambda_e": cfg.lambda_e,
            "delta": cfg.delta,
            "segments": cfg.segments,
            "samples_per_segment": cfg.samples_per_segment,
            "max_epochs": cfg.max_epochs,
            "learning_rate": cfg.learning_rate,
            "init_std": cfg.init_std,
        },
        sort_keys=True,
    )


def build_app(
    datasets: dict[str, tuple[Dataset, Predictor]],
    trace_config: DesiderataConfig | None = None,
    session_log: str | None = None,
) -> FastAPI:
    app = FastAPI(title="comparables", docs_url=None, redoc_url=None)
    base_cfg = trace_config or DesiderataConfig(max_epochs=600)

    entries = {
        name: _DatasetEntry(dataset=ds, ctx=build_context(ds, pred))
        for name, (ds, pred) in datasets.items()
    }
    sessions: dict[str, SessionRecord] = {}
    session_lock = threading.Lock()
    explain_cache: dict[str, bytes] = {}
    cache_lock = threading.Lock()
    counter = {"next_session": 1}

    log_path = Path(session_log) if session_log else None

    @app.middleware("http")
    async def version_header(request: Request, call_next):
        response = await call_next(request)
        response.headers["X-CXAI-Version"] = API_VERSION
        return response

    def _json_error(status: int, error: str, detail: str) -> JSONResponse:
        return JSONResponse(status_code=status, content=_error_body(status, error, detail))

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/datasets")
    def list_datasets():
        return {
            "datasets": [
                {
                    "id": name,
                    "rows": len(entry.dataset),
                    "target_name": entry.dataset.schema.target_name,
                    "target_unit": entry.dataset.schema.target_unit,
                    "attributes": entry.dataset.schema.names,
                    "predictor": entry.ctx.predictor.description,
                }
                for name, entry in sorted(entries.items())
            ]
        }

    @app.get("/datasets/{dataset_id}/subjects")
    def list_subjects(dataset_id: str):
        entry = entries.get(dataset_id)
        if entry is None:
            return _json_error(404, "unknown_dataset", f"no dataset {dataset_id!r}")
        names = entry.dataset.schema.names
        return {
            "subjects": [
                {
                    "id": inst.id,
                    "attributes": {n: v for n, v in zip(names, inst.values)},
                }
                for inst, _ in entry.dataset.rows
            ]
        }

    @app.post("/explain")
    async def explain(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _json_error(400, "bad_json", "request body is not valid JSON")
        dataset_id = body.get("dataset", "default")
        entry = entries.get(dataset_id)
        if entry is None:
            return _json_error(404, "unknown_dataset", f"no dataset {dataset_id!r}")
        method_name = body.get("method", "comparables")
        if method_name not in METHOD_NAMES:
            return _json_error(
                400,
                "bad_method",
                f"unknown method {method_name!r}; valid: {sorted(METHOD_NAMES)}",
            )
        try:
            k = int(body.get("k", 2))
        except (TypeError, ValueError):
            return _json_error(400, "bad_k", "k must be an integer")
        if k < 1:
            return _json_error(400, "bad_k", "k must be >= 1")
        seed = int(body.get("seed", 0))
        overrides = body.get("config", {})
        try:
            cfg = replace(base_cfg, **overrides) if overrides else base_cfg
        except (TypeError, errors.ConfigError) as exc:
            return _json_error(400, "bad_config", str(exc))

        subject_id = str(body.get("subject", ""))
        index = next(
            (
                i
                for i, (inst, _) in enumerate(entry.dataset.rows)
                if inst.id == subject_id
            ),
            None,
        )
        if index is None:
            return _json_error(404, "unknown_subject", f"no subject {subject_id!r}")

        cache_key = json.dumps(
            [dataset_id, subject_id, method_name, k, _config_key(cfg), seed]
        )
        with cache_lock:
            cached = explain_cache.get(cache_key)
        if cached is None:
            subject, actual = entry.dataset.rows[index]
            ctx = entry.candidates_for(index)
            if k > len(ctx.dataset):
                return _json_error(400, "bad_k", f"k={k} exceeds {len(ctx.dataset)} candidates")
            try:
                doc = explain_document(
                    ctx,
                    subject,
                    METHOD_NAMES[method_name],
                    k=k,
                    cfg=cfg,
                    seed=seed,
                    subject_actual=actual,
                )
            except errors.NoDifference as exc:
                return _json_error(400, "no_difference", str(exc))
            except errors.RemoteUnavailable as exc:
                return _json_error(502, "predictor_unavailable", str(exc))
            except errors.ComparablesError as exc:
                return _json_error(400, "bad_request", str(exc))
            cached = json.dumps(doc, sort_keys=True).encode()
            with cache_lock:
                explain_cache[cache_key] = cached
        return Response(content=cached, media_type="application/json")

    @app.post("/sessions")
    async def create_session(request: Request):
        try:
            body = await request.json()
        except Exception:
            body = {}
        mode = body.get("mode", "main")
        if mode not in ("practice", "main"):
            return _json_error(400, "bad_mode", "mode must be 'practice' or 'main'")
        with session_lock:
            session_id = f"s{counter['next_session']}"
            counter["next_session"] += 1
            sessions[session_id] = SessionRecord(session_id=session_id, mode=mode)
        return {"session": session_id, "mode": mode}

    @app.post("/sessions/{session_id}/responses")
    async def record_response(session_id: str, request: Request):
        record = sessions.get(session_id)
        if record is None:
            return _json_error(404, "unknown_session", f"no session {session_id!r}")
        try:
            body = await request.json()
        except Exception:
            return _json_error(400, "bad_json", "request body is not valid JSON")
        for key in ("case", "y_min", "y_max"):
            if key not in body:
                return _json_error(400, "missing_field", f"{key!r} is required")
        dataset_id = body.get("dataset", "default")
        entry = entries.get(dataset_id)
        if entry is None:
            return _json_error(404, "unknown_dataset", f"no dataset {dataset_id!r}")
        case_id = str(body["case"])
        row = next(
            ((inst, y) for inst, y in entry.dataset.rows if inst.id == case_id), None
        )
        if row is None:
            return _json_error(404, "unknown_case", f"no case {case_id!r}")
        try:
            y_min, y_max = float(body["y_min"]), float(body["y_max"])
        except (TypeError, ValueError):
            return _json_error(400, "bad_interval", "y_min/y_max must be numbers")
        if y_min > y_max:
            return _json_error(400, "bad_interval", "y_min must not exceed y_max")
        actual = row[1]
        try:
            response = DecisionResponse(y_min=y_min, y_max=y_max, actual=actual)
            metrics = decision_metrics(response)
        except errors.ZeroWidthInterval as exc:
            return _json_error(400, "bad_interval", str(exc))

        payload = {
            "session": session_id,
            "case": case_id,
            "y_min": y_min,
            "y_max": y_max,
            "metrics": metrics,
        }
        if record.mode == "practice":
            width = y_max - y_min
            payload["feedback"] = {
                "actual": actual,
                "within": y_min <= actual <= y_max,
                "too_wide": width > 2 * TOO_WIDE_FRACTION * abs(actual),
            }
        with session_lock:
            record.responses.append(payload)
            if log_path is not None:
                with log_path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(payload, sort_keys=True) + "\n")
        return payload

    return app
