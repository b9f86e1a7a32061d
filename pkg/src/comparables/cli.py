"""Command-line front end: explain a subject, run sweeps and sensitivity, serve HTTP.

stdout carries only machine-readable payload (JSON or CSV); diagnostics go
to stderr. Exit codes: 2 config error, 3 data error, 4 predictor error,
5 bind failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import errors
from .evaluation import SweepSpec, run_sensitivity, run_sweep, write_report
from .explain import build_context, explain_document
from .predictors import PREDICTOR_URL_ENV, build_predictor
from .schema import Dataset, Instance, fit_standardizer, load_csv, load_schema_json
from .selection import Method
from .trace import DesiderataConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_PREDICTOR = 4
EXIT_BIND = 5

METHOD_NAMES = {m.value: m for m in Method}


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _add_common_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", required=True, help="CSV file with the training rows")
    p.add_argument("--schema", required=True, help="JSON schema file")
    p.add_argument(
        "--predictor",
        default="knn:k=5",
        help="builtin spec (e.g. knn:k=5, linear:w=1;2,b=0) or remote[:URL] "
        f"(URL may come from ${PREDICTOR_URL_ENV})",
    )


def _add_desiderata_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lambda-f", type=float, default=None)
    p.add_argument("--lambda-s", type=float, default=None)
    p.add_argument("--lambda-d", type=float, default=None)
    p.add_argument("--lambda-m", type=float, default=None)
    p.add_argument("--lambda-e", type=float, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--segments", type=int, default=None)
    p.add_argument("--max-epochs", type=int, default=None)


def _desiderata_from_args(args, base: DesiderataConfig | None = None) -> DesiderataConfig:
    cfg = base or DesiderataConfig()
    overrides = {}
    for flag, field in [
        ("lambda_f", "lambda_f"),
        ("lambda_s", "lambda_s"),
        ("lambda_d", "lambda_d"),
        ("lambda_m", "lambda_m"),
        ("lambda_e", "lambda_e"),
        ("delta", "delta"),
        ("segments", "segments"),
        ("max_epochs", "max_epochs"),
    ]:
        value = getattr(args, flag, None)
        if value is not None:
            overrides[field] = value
    if "seed" not in overrides and getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    return replace(cfg, **overrides) if overrides else cfg


def _parse_inline_subject(text: str, schema) -> Instance:
    values_by_name = {}
    for part in text.split(","):
        if "=" not in part:
            raise errors.ConfigError(
                f"inline subject needs name=value pairs, got {part!r}"
            )
        name, value = part.split("=", 1)
        values_by_name[name.strip()] = value.strip()
    values = []
    for attr in schema.attributes:
        if attr.name not in values_by_name:
            raise errors.ConfigError(f"inline subject is missing {attr.name!r}")
        raw = values_by_name[attr.name]
        values.append(float(raw) if attr.is_numeric else raw)
    return Instance(values=tuple(values), id="inline")


def _load_case(args):
    schema = load_schema_json(args.schema)
    dataset = load_csv(args.dataset, schema)
    if args.subject_inline:
        subject, actual = _parse_inline_subject(args.subject_inline, schema), None
        candidates = dataset
    else:
        if args.subject is None:
            raise errors.ConfigError("provide --subject <row-id> or --subject-inline")
        matches = [i for i, (inst, _) in enumerate(dataset.rows) if inst.id == args.subject]
        if not matches:
            raise errors.SchemaError(f"no row with id {args.subject!r}")
        idx = matches[0]
        subject, actual = dataset.rows[idx][0], dataset.rows[idx][1]
        rest = tuple(r for i, r in enumerate(dataset.rows) if i != idx)
        candidates = Dataset(schema=schema, rows=rest, provenance=dataset.provenance)
    return candidates, subject, actual


def _emit(payload: str, out: str | None) -> None:
    sys.stdout.write(payload)
    if not payload.endswith("\n"):
        sys.stdout.write("\n")
    if out:
        Path(out).write_text(payload if payload.endswith("\n") else payload + "\n", encoding="utf-8")


def _explain_csv(doc: dict) -> str:
    import csv as _csv
    import io

    buf = io.StringIO()
    writer = _csv.writer(buf, lineterminator="\n")
    writer.writerow(["record", "id", "field", "value"])
    writer.writerow(["estimate", "", "value", repr(doc["estimate"]["value"])])
    writer.writerow(["estimate", "", "low", repr(doc["estimate"]["bounds"][0])])
    writer.writerow(["estimate", "", "high", repr(doc["estimate"]["bounds"][1])])
    writer.writerow(["subject", doc["subject"]["id"] or "", "ai_prediction", repr(doc["subject"]["ai_prediction"])])
    for comp in doc["comparables"]:
        for field in ("actual_value", "ai_prediction", "similarity", "distance"):
            writer.writerow(["comparable", comp["id"] or "", field, repr(comp[field])])
    return buf.getvalue()


def cmd_explain(args) -> int:
    if args.method not in METHOD_NAMES:
        return _fail(
            EXIT_CONFIG,
            f"unknown method {args.method!r}; valid methods: {', '.join(sorted(METHOD_NAMES))}",
        )
    try:
        candidates, subject, actual = _load_case(args)
    except errors.ConfigError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    except (errors.ComparablesError, OSError) as exc:
        return _fail(EXIT_DATA, str(exc))
    try:
        std = fit_standardizer(candidates)
        predictor = build_predictor(args.predictor, dataset=candidates, std=std)
    except errors.ConfigError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    except errors.ComparablesError as exc:
        return _fail(EXIT_DATA, str(exc))
    cfg = _desiderata_from_args(args)
    try:
        ctx = build_context(candidates, predictor)
        doc = explain_document(
            ctx,
            subject,
            METHOD_NAMES[args.method],
            k=args.k,
            cfg=cfg,
            seed=args.seed,
            subject_actual=actual,
        )
    except (errors.RemoteUnavailable,) as exc:
        return _fail(EXIT_PREDICTOR, str(exc))
    except errors.NoDifference as exc:
        return _fail(EXIT_DATA, str(exc))
    except errors.ComparablesError as exc:
        return _fail(EXIT_DATA, str(exc))
    if args.format == "csv":
        _emit(_explain_csv(doc), args.out)
    else:
        _emit(json.dumps(doc, sort_keys=True, indent=2), args.out)
    return EXIT_OK


def _sweep_spec_from_file(path: str, args) -> SweepSpec:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    methods = tuple(
        METHOD_NAMES[m] for m in doc.get("methods", list(METHOD_NAMES))
    )
    trace_doc = doc.get("trace", {})
    trace_cfg = DesiderataConfig(**trace_doc) if trace_doc else DesiderataConfig()
    trace_cfg = _desiderata_from_args(args, trace_cfg)
    seeds = doc.get("seeds")
    if seeds is None:
        base = doc.get("seed", 0)
        seeds = list(range(base, base + doc.get("n_seeds", 1)))
    if getattr(args, "seed", None) is not None:
        seeds = [args.seed]
    return SweepSpec(
        task=doc.get("task", "sinlin3"),
        methods=methods,
        axis=doc.get("axis", "comparables"),
        ks=tuple(doc.get("ks", (2, 4, 8))),
        distance_k=doc.get("distance_k", 4),
        distance_bins=doc.get("distance_bins", 3),
        n_subjects=doc.get("n_subjects", 8),
        seeds=tuple(seeds),
        n_rows=doc.get("n_rows", 400),
        noise_std=doc.get("noise_std", 0.1),
        trace_config=trace_cfg,
    )


def cmd_evaluate(args) -> int:
    try:
        spec = _sweep_spec_from_file(args.spec, args)
    except (OSError, json.JSONDecodeError, KeyError, TypeError, errors.ConfigError) as exc:
        return _fail(EXIT_CONFIG, f"bad sweep spec: {exc}")
    try:
        report = run_sweep(spec)
    except errors.RemoteUnavailable as exc:
        return _fail(EXIT_PREDICTOR, str(exc))
    except errors.ComparablesError as exc:
        return _fail(EXIT_DATA, str(exc))
    out_base = args.out or "eval_report"
    paths = write_report(report, out_base)
    print(f"wrote {', '.join(paths)}", file=sys.stderr)
    sys.stdout.write(report.to_csv())
    return EXIT_OK


def cmd_sensitivity(args) -> int:
    try:
        with open(args.spec, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        values = doc["values"]
        if not values:
            raise errors.ConfigError("values must be nonempty")
        base_doc = doc.get("base", {})
        base = DesiderataConfig(**base_doc) if base_doc else DesiderataConfig()
        base = _desiderata_from_args(args, base)
        seeds = doc.get("seeds", list(range(20)))
        if getattr(args, "seed", None) is not None:
            seeds = [args.seed]
        report = run_sensitivity(
            base,
            vary=doc["vary"],
            values=values,
            task=doc.get("task", "curvy2"),
            seeds=seeds,
        )
    except (OSError, json.JSONDecodeError, KeyError, TypeError, errors.ConfigError) as exc:
        return _fail(EXIT_CONFIG, f"bad sensitivity spec: {exc}")
    except errors.ComparablesError as exc:
        return _fail(EXIT_DATA, str(exc))
    out_base = args.out or "sensitivity_report"
    paths = write_report(report, out_base)
    print(f"wrote {', '.join(paths)}", file=sys.stderr)
    sys.stdout.write(report.to_csv())
    return EXIT_OK


def cmd_serve(args) -> int:
    try:
        schema = load_schema_json(args.schema)
        dataset = load_csv(args.dataset, schema)
        std = fit_standardizer(dataset)
        predictor = build_predictor(args.predictor, dataset=dataset, std=std)
    except errors.ConfigError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    except (errors.ComparablesError, OSError) as exc:
        return _fail(EXIT_DATA, str(exc))
    from .service import build_app

    cfg = _desiderata_from_args(args)
    app = build_app(
        {"default": (dataset, predictor)},
        trace_config=cfg,
        session_log=args.session_log,
    )
    import uvicorn

    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    except SystemExit as exc:  # uvicorn raises on bind failure
        if exc.code not in (0, None):
            return _fail(EXIT_BIND, f"could not bind port {args.port}")
    except OSError as exc:
        return _fail(EXIT_BIND, f"could not bind port {args.port}: {exc}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="comparables",
        description="Comparable-based explanations for tabular regression models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_explain = sub.add_parser("explain", help="explain one subject")
    _add_common_data_flags(p_explain)
    p_explain.add_argument("--method", default="comparables")
    p_explain.add_argument("--k", type=int, default=3)
    p_explain.add_argument("--subject", default=None, help="row id of the subject")
    p_explain.add_argument(
        "--subject-inline", default=None, help="inline attributes, e.g. 'a=1,b=x'"
    )
    p_explain.add_argument("--seed", type=int, default=0)
    p_explain.add_argument("--out", default=None)
    p_explain.add_argument("--format", choices=("json", "csv"), default="json")
    _add_desiderata_flags(p_explain)

    p_eval = sub.add_parser("evaluate", help="run a sweep from a spec file")
    p_eval.add_argument("--spec", required=True)
    p_eval.add_argument("--out", default=None, help="output base path (.csv/.json added)")
    p_eval.add_argument("--seed", type=int, default=None, help="override spec seeds")
    _add_desiderata_flags(p_eval)

    p_sens = sub.add_parser("sensitivity", help="run a desiderata sensitivity analysis")
    p_sens.add_argument("--spec", required=True)
    p_sens.add_argument("--out", default=None)
    p_sens.add_argument("--seed", type=int, default=None)
    _add_desiderata_flags(p_sens)

    p_serve = sub.add_parser("serve", help="serve the explanation HTTP API")
    _add_common_data_flags(p_serve)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8787)
    p_serve.add_argument("--seed", type=int, default=0)
    p_serve.add_argument("--session-log", default=None, help="JSONL session store path")
    _add_desiderata_flags(p_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0
    handlers = {
        "explain": cmd_explain,
        "evaluate": cmd_evaluate,
        "sensitivity": cmd_sensitivity,
        "serve": cmd_serve,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
