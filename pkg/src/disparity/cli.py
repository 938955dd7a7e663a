"""Command-line interface mirroring the HTTP API.

Subcommands: ingest, fixture, cohort, analyze, report, evaluate, summarize,
serve. Results go to stdout as canonical JSON (identical bytes to the HTTP
payload for the same inputs). Failures print one machine-readable JSON
object to stderr and exit with the failing exception's class-specific code.

A JSON config file (--config before the subcommand, or DISPARITY_CONFIG)
supplies defaults for common options; explicit flags always win.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import ConfigurationError, DisparityError, QueryError
from .evaluation import (
    aggregate,
    compare_to_human,
    default_rubric,
    ingest_human_scores,
    run_trials,
    trial_set_from_json_dict,
    write_comparison_csv,
    write_distribution_csv,
    write_trial_artifact,
    DeterministicJudgeClient,
)
from .fixtures import FixtureSpec, generate_fixture
from .llm import client_from_env
from .query import FilterQuery, apply_filter, parse_expr, split_by_ethnicity
from .records import export_store, ingest_tables, load_store
from .report import assemble_prompt, synthesize_report
from .service import run_pipeline
from .stats import BiasAnalysis, DEFAULT_ALPHA
from .util import canonical_json

CONFIG_ENV = "DISPARITY_CONFIG"

# Option defaults a config file may supply, keyed by argparse dest.
_CONFIG_KEYS = frozenset(
    {
        "data",
        "jobs",
        "host",
        "port",
        "cors",
        "alpha",
        "judge",
        "seed",
        "trials_n",
        "label",
        "source",
        "hash_seed",
        "snapshot",
    }
)


def load_config(path: str | None) -> dict:
    """Read the JSON config file; unknown keys fail fast."""
    if path is None:
        path = os.environ.get(CONFIG_ENV) or None
    if path is None:
        return {}
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path!r}")
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config file {path!r} is not valid JSON: {exc}")
    if not isinstance(obj, dict):
        raise ConfigurationError(f"config file {path!r} must hold a JSON object")
    unknown = sorted(set(obj) - _CONFIG_KEYS)
    if unknown:
        raise ConfigurationError(
            f"unknown config key(s): {', '.join(unknown)}; "
            f"known: {', '.join(sorted(_CONFIG_KEYS))}"
        )
    return obj


def _emit(obj: dict) -> None:
    sys.stdout.write(canonical_json(obj) + "\n")


def _load_json_arg(text: str, what: str):
    """Inline JSON, or @path to a JSON file."""
    try:
        if text.startswith("@"):
            return json.loads(Path(text[1:]).read_text(encoding="utf-8"))
        return json.loads(text)
    except FileNotFoundError:
        raise ConfigurationError(f"{what}: file not found: {text[1:]!r}")
    except json.JSONDecodeError as exc:
        raise QueryError(f"{what}: invalid JSON: {exc}")


def _filter_from_args(args) -> FilterQuery:
    obj: dict = {}
    if getattr(args, "filter", None):
        parsed = _load_json_arg(args.filter, "--filter")
        if not isinstance(parsed, dict):
            raise QueryError("--filter must be a JSON object")
        obj.update(parsed)
    if getattr(args, "county", None):
        obj["county"] = args.county
    if getattr(args, "require", None):
        parse_expr(args.require)  # fail fast with a clear message
        obj["code_expr"] = args.require
    if getattr(args, "sentence_type", None):
        obj["sentence_types"] = list(args.sentence_type)
    return FilterQuery.from_json_dict(obj)


def _pipeline_payload(args) -> dict:
    payload: dict = {
        "filter": _filter_from_args(args).to_json_dict(),
        "comparison": args.comparison,
        "reference": args.reference,
        "outcome": args.outcome,
        "alpha": args.alpha,
        "zero_cell_correction": not args.no_correction,
    }
    if getattr(args, "table", None):
        try:
            a, b, c, d = (int(x) for x in args.table.split(","))
        except ValueError:
            raise QueryError("--table wants four comma-separated integers a,b,c,d")
        payload["table"] = {"a": a, "b": b, "c": c, "d": d}
        payload["comparison"] = args.comparison or "comparison"
        payload["reference"] = args.reference or "reference"
        payload["outcome_label"] = args.outcome or "outcome"
    return payload


def _write_or_emit(obj: dict, out: str | None) -> None:
    text = canonical_json(obj)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
        _emit({"written": out})
    else:
        sys.stdout.write(text + "\n")


# Subcommands ------------------------------------------------------------------

def cmd_ingest(args) -> int:
    if args.data:
        store = load_store(args.data, snapshot_date=args.snapshot)
    else:
        for name in ("demographics", "current", "prior"):
            if not getattr(args, name):
                raise ConfigurationError(
                    "ingest needs --data DIR or all of --demographics, "
                    "--current, --prior"
                )
        store = ingest_tables(
            args.demographics, args.current, args.prior, snapshot_date=args.snapshot
        )
    summary = {
        "row_counts": store.row_counts(),
        "n_rejects": len(store.rejects),
        "rejects": [
            {"table": r.table, "row_index": r.row_index, "reason": r.reason}
            for r in store.rejects
        ],
        "provenance": {
            "sources": dict(store.provenance.sources),
            "row_counts": dict(store.provenance.row_counts),
            "snapshot_date": store.provenance.snapshot_date,
        },
        "counties": store.counties(),
        "ethnicities": store.ethnicities(),
    }
    if args.out:
        paths = export_store(store, args.out)
        summary["exported"] = {k: str(v) for k, v in paths.items()}
    _emit(summary)
    return 0


def cmd_fixture(args) -> int:
    spec = FixtureSpec(
        n_people=args.n,
        outcome_tilt=args.tilt,
        hash_seed=args.hash_seed,
        prior_record_rate=args.prior_rate,
    )
    paths = generate_fixture(spec, args.out, seed=args.seed)
    _emit(
        {
            "written": {k: str(v) for k, v in paths.items()},
            "n_people": args.n,
            "seed": args.seed,
        }
    )
    return 0


def cmd_cohort(args) -> int:
    store = load_store(args.data)
    query = _filter_from_args(args)
    cohort = apply_filter(store, query)
    out = cohort.to_json_dict()
    if args.comparison and args.reference:
        pair = split_by_ethnicity(store, cohort, args.comparison, args.reference)
        out["pair"] = pair.to_json_dict()
    _write_or_emit(out, args.out)
    return 0


def cmd_analyze(args) -> int:
    payload = _pipeline_payload(args)
    if "table" in payload:
        from .stats import ContingencyTable, run_analysis

        t = payload["table"]
        analysis = run_analysis(
            ContingencyTable(t["a"], t["b"], t["c"], t["d"]),
            comparison_label=payload["comparison"],
            reference_label=payload["reference"],
            outcome_label=payload["outcome_label"],
            alpha=payload["alpha"],
            zero_cell_correction=payload["zero_cell_correction"],
        )
    else:
        if not args.data:
            raise ConfigurationError("analyze needs --data DIR (or --table)")
        store = load_store(args.data)
        analysis = run_pipeline(store, payload)
    _write_or_emit(analysis.to_json_dict(), args.out)
    return 0


def cmd_report(args) -> int:
    if args.analysis:
        obj = _load_json_arg(args.analysis, "--analysis")
        analysis = BiasAnalysis.from_json_dict(obj)
    else:
        if not args.data:
            raise ConfigurationError("report needs --analysis FILE or --data DIR")
        store = load_store(args.data)
        analysis = run_pipeline(store, _pipeline_payload(args))
    context = tuple(
        Path(path).read_text(encoding="utf-8") for path in (args.context or ())
    )
    bundle = assemble_prompt(analysis, context=context)
    client = client_from_env() if args.source == "model" else None
    report = synthesize_report(bundle, client)
    _write_or_emit(
        {"analysis": analysis.to_json_dict(), "report": report.to_json_dict()},
        args.out,
    )
    return 0


def _report_payload_from_file(path: str) -> tuple[str, BiasAnalysis | None, str]:
    """(text, analysis, generator model) from an artifact or plain text file."""
    raw = Path(path).read_text(encoding="utf-8")
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError:
        return raw, None, ""
    if isinstance(obj, dict):
        analysis = (
            BiasAnalysis.from_json_dict(obj["analysis"])
            if isinstance(obj.get("analysis"), dict)
            else None
        )
        if isinstance(obj.get("report"), dict):
            rep = obj["report"]
            return rep.get("text", ""), analysis, rep.get("model", "")
        if "text" in obj:
            return obj["text"], analysis, obj.get("model", "")
    raise ConfigurationError(f"cannot find report text in {path!r}")


def cmd_evaluate(args) -> int:
    text, analysis, generator_model = _report_payload_from_file(args.report)
    if not text.strip():
        raise ConfigurationError(f"empty report text in {args.report!r}")
    if args.judge == "deterministic":
        judge = DeterministicJudgeClient(seed=args.seed)
    elif args.judge == "env":
        judge = client_from_env()
    else:
        raise ConfigurationError(f"unknown judge {args.judge!r}")
    trial_set = run_trials(
        text,
        judge,
        default_rubric(),
        n_trials=args.trials_n,
        label=args.label,
        analysis=analysis,
        generator_model=generator_model,
    )
    if args.out:
        write_trial_artifact(trial_set, args.out)
        _emit({"written": args.out, "failures": trial_set.failures})
    else:
        sys.stdout.write(canonical_json(trial_set.to_json_dict()) + "\n")
    return 0


def cmd_summarize(args) -> int:
    trial_sets = []
    for path in args.trials:
        obj = _load_json_arg("@" + path, "--trials")
        trial_sets.append(trial_set_from_json_dict(obj))
    summary = aggregate(trial_sets)
    if args.distributions:
        write_distribution_csv(summary, args.distributions)
    result = summary.to_json_dict()
    if args.human:
        human = ingest_human_scores(args.human)
        rows = compare_to_human(summary, human)
        result["comparison"] = [r.to_json_dict() for r in rows]
        if human.warnings:
            result["human_warnings"] = list(human.warnings)
        if args.comparison_csv:
            write_comparison_csv(rows, args.comparison_csv)
    _write_or_emit(result, args.out)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(
        data_dir=args.data,
        job_dir=args.jobs,
        cors_origins=args.cors or None,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# Parser -----------------------------------------------------------------------

def _add_filter_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--filter", help="filter query as inline JSON or @file")
    p.add_argument("--county", help="restrict to one sentencing county")
    p.add_argument(
        "--require",
        "--expr",
        dest="require",
        help="code expression the cases must satisfy, "
        "e.g. 'PC12022 AND (PC211 OR PC212)'",
    )
    p.add_argument(
        "--sentence-type", action="append", help="restrict sentence types (repeatable)"
    )


def _add_pipeline_args(p: argparse.ArgumentParser, cfg: dict) -> None:
    _add_filter_args(p)
    p.add_argument("--comparison", help="comparison group ethnicity")
    p.add_argument("--reference", help="reference group ethnicity")
    p.add_argument(
        "--outcome", help="outcome: sentence type, 'kind=value', or JSON object"
    )
    p.add_argument("--alpha", type=float, default=cfg.get("alpha", DEFAULT_ALPHA))
    p.add_argument(
        "--no-correction",
        action="store_true",
        help="disable the zero-cell continuity correction",
    )
    p.add_argument("--table", help="skip the pipeline: four cells a,b,c,d")


def build_parser(cfg: dict | None = None) -> argparse.ArgumentParser:
    cfg = cfg or {}
    parser = argparse.ArgumentParser(
        prog="disparity",
        description="Sentencing-disparity analysis toolkit",
    )
    parser.add_argument(
        "--config", help="JSON file of option defaults (also DISPARITY_CONFIG)"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load and validate the three record tables")
    p.add_argument("--data", default=cfg.get("data"), help="directory holding the three canonical CSVs")
    p.add_argument("--demographics")
    p.add_argument("--current")
    p.add_argument("--prior")
    p.add_argument(
        "--snapshot", default=cfg.get("snapshot", ""), help="snapshot date for provenance"
    )
    p.add_argument("--out", help="export canonical CSVs (plus rejects) here")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("fixture", help="generate synthetic record tables")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--tilt", type=float, default=2.2)
    p.add_argument("--prior-rate", type=float, default=0.55)
    p.add_argument("--hash-seed", default=cfg.get("hash_seed", "fixture-seed"))
    p.set_defaults(func=cmd_fixture)

    p = sub.add_parser("cohort", help="build a cohort from a filter query")
    p.add_argument("--data", default=cfg.get("data"), required="data" not in cfg)
    _add_filter_args(p)
    p.add_argument("--comparison")
    p.add_argument("--reference")
    p.add_argument("--out")
    p.set_defaults(func=cmd_cohort)

    p = sub.add_parser("analyze", help="run the full disparity analysis")
    p.add_argument("--data", default=cfg.get("data"))
    _add_pipeline_args(p, cfg)
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("report", help="synthesize an evidence report")
    p.add_argument("--data", default=cfg.get("data"))
    p.add_argument("--analysis", help="analysis artifact as inline JSON or @file")
    _add_pipeline_args(p, cfg)
    p.add_argument(
        "--source",
        choices=("fallback", "model"),
        default=cfg.get("source", "fallback"),
        help="deterministic template or provider model",
    )
    p.add_argument(
        "--context",
        action="append",
        help="reference document file for the prompt (repeatable)",
    )
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("evaluate", help="score a report with a judge")
    p.add_argument("--report", required=True, help="report artifact or plain text file")
    p.add_argument(
        "--trials", dest="trials_n", type=int, default=cfg.get("trials_n", 15)
    )
    p.add_argument(
        "--judge",
        choices=("deterministic", "env"),
        default=cfg.get("judge", "deterministic"),
    )
    p.add_argument("--seed", default=cfg.get("seed", "judge-seed"))
    p.add_argument("--label", default=cfg.get("label", "report"))
    p.add_argument("--out", help="write the trial artifact here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("summarize", help="aggregate trial artifacts")
    p.add_argument("--trials", nargs="+", required=True, help="trial artifact files")
    p.add_argument("--distributions", help="write the per-dimension CSV here")
    p.add_argument(
        "--human", help="human panel CSV (report plus one column per dimension)"
    )
    p.add_argument("--comparison-csv", help="write the model-vs-human CSV here")
    p.add_argument("--out")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("serve", help="run the HTTP API")
    p.add_argument("--data", default=cfg.get("data"), required="data" not in cfg)
    p.add_argument("--host", default=cfg.get("host", "127.0.0.1"))
    p.add_argument("--port", type=int, default=cfg.get("port", 8000))
    p.add_argument("--jobs", default=cfg.get("jobs", "jobs"))
    p.add_argument(
        "--cors",
        action="append",
        default=cfg.get("cors"),
        help="allowed CORS origin (repeatable)",
    )
    p.set_defaults(func=cmd_serve)

    return parser


def _peek_config_path(argv: list[str]) -> str | None:
    for i, token in enumerate(argv):
        if token == "--config":
            if i + 1 >= len(argv):
                raise ConfigurationError("--config needs a file path")
            return argv[i + 1]
        if token.startswith("--config="):
            return token.split("=", 1)[1]
    return None


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        cfg = load_config(_peek_config_path(argv))
        args = build_parser(cfg).parse_args(argv)
        return args.func(args)
    except DisparityError as exc:
        body = {"error": type(exc).__name__, "message": str(exc)}
        body.update(exc.payload())
        sys.stderr.write(canonical_json(body) + "\n")
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
