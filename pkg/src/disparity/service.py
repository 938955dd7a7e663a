"""HTTP API over the analysis pipeline.

All endpoints live under /v1. Cohort building, similarity ranking, and
analyses answer inline; report synthesis and judge evaluations run as
background jobs polled via /v1/jobs/{id}. Analysis payloads are serialized
with the package-wide canonical JSON so the HTTP body is byte-identical to
the CLI's output for the same inputs.

Domain errors map to 4xx/5xx responses carrying the exception class name,
message, and any structured payload (field names, cells, counts), so
clients can react without parsing prose.
"""

from __future__ import annotations

import os
import threading
import uuid
from pathlib import Path

from fastapi import Body, FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import __version__
from .errors import (
    AssemblyError,
    BudgetError,
    ConfigurationError,
    DegenerateGroupError,
    DegenerateTableError,
    DisparityError,
    HarnessError,
    IntegrityError,
    NotFoundError,
    QueryError,
    RowError,
    SchemaError,
    ScoringError,
    StructureError,
    TransportError,
    UndefinedEstimateError,
    UndefinedSimilarityError,
    FeaturizationError,
)
from .evaluation import DeterministicJudgeClient, default_rubric, run_trials
from .llm import client_from_env
from .query import FilterQuery, apply_filter, parse_outcome, split_by_ethnicity
from .records import RecordStore, data_dictionary, load_store
from .report import assemble_prompt, synthesize_report
from .stats import (
    DEFAULT_ALPHA,
    BiasAnalysis,
    ContingencyTable,
    analyze_pair,
    run_analysis,
)
from .util import canonical_json, now_iso
from .vectors import default_feature_config, featurize_store, find_similar

_STATUS_BY_ERROR = (
    (NotFoundError, 404),
    (IntegrityError, 409),
    (BudgetError, 429),
    (DegenerateTableError, 422),
    (DegenerateGroupError, 422),
    (UndefinedEstimateError, 422),
    (UndefinedSimilarityError, 422),
    (AssemblyError, 422),
    (StructureError, 422),
    (TransportError, 502),
    (ScoringError, 502),
    (HarnessError, 500),
    (SchemaError, 400),
    (RowError, 400),
    (FeaturizationError, 400),
    (QueryError, 400),
    (ConfigurationError, 400),
)


def _status_for(exc: DisparityError) -> int:
    for klass, status in _STATUS_BY_ERROR:
        if isinstance(exc, klass):
            return status
    return 400


class JobStore:
    """File-backed job records; terminal jobs are immutable.

    One canonical-JSON file per job. Transitions: pending -> running ->
    done | failed. Any write against a job already in a terminal state
    raises IntegrityError.
    """

    TERMINAL = ("done", "failed")

    def __init__(self, directory: str | Path):
        self._dir = Path(directory)
        self._dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, job_id: str) -> Path:
        return self._dir / f"{job_id}.json"

    def _write(self, record: dict) -> None:
        # Atomic replace so a concurrent poll never sees a torn file.
        path = self._path(record["job_id"])
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(canonical_json(record) + "\n", encoding="utf-8")
        os.replace(tmp, path)

    def create(self, kind: str, params: dict) -> dict:
        record = {
            "job_id": uuid.uuid4().hex,
            "kind": kind,
            "status": "pending",
            "params": params,
            "result": None,
            "error": None,
            "created_at": now_iso(),
            "updated_at": now_iso(),
        }
        with self._lock:
            self._write(record)
        return record

    def get(self, job_id: str) -> dict:
        path = self._path(job_id)
        if not path.exists():
            raise NotFoundError(f"unknown job {job_id!r}")
        import json

        return json.loads(path.read_text(encoding="utf-8"))

    def list_ids(self) -> list[str]:
        return sorted(p.stem for p in self._dir.glob("*.json") if not p.name.endswith(".tmp"))

    def _transition(self, job_id: str, **updates) -> dict:
        with self._lock:
            record = self.get(job_id)
            if record["status"] in self.TERMINAL:
                raise IntegrityError(
                    f"job {job_id} is {record['status']} and cannot change"
                )
            record.update(updates)
            record["updated_at"] = now_iso()
            self._write(record)
            return record

    def mark_running(self, job_id: str) -> dict:
        return self._transition(job_id, status="running")

    def finish(self, job_id: str, result: dict) -> dict:
        return self._transition(job_id, status="done", result=result)

    def fail(self, job_id: str, error: str) -> dict:
        return self._transition(job_id, status="failed", error=error)


def run_pipeline(store: RecordStore, payload: dict) -> BiasAnalysis:
    """Shared cohort -> split -> table -> analysis path.

    Either a prebuilt table {'table': {a,b,c,d}} or the full pipeline
    fields (filter, comparison, reference, outcome) drive the analysis.
    Unknown ethnicity labels are rejected up front, by name.
    """
    alpha = float(payload.get("alpha", DEFAULT_ALPHA))
    correction = bool(payload.get("zero_cell_correction", True))
    if "table" in payload:
        t = payload["table"]
        try:
            table = ContingencyTable(a=t["a"], b=t["b"], c=t["c"], d=t["d"])
        except (KeyError, TypeError):
            raise QueryError("table needs integer cells a, b, c, d")
        return run_analysis(
            table,
            comparison_label=payload.get("comparison", "comparison"),
            reference_label=payload.get("reference", "reference"),
            outcome_label=payload.get("outcome_label", "outcome"),
            alpha=alpha,
            zero_cell_correction=correction,
        )
    for name in ("comparison", "reference", "outcome"):
        if name not in payload:
            raise QueryError(f"missing required field '{name}'")
    known = store.ethnicities()
    for side in ("comparison", "reference"):
        if payload[side] not in known:
            raise QueryError(
                f"unknown ethnicity label {payload[side]!r}; "
                f"store has: {', '.join(known)}"
            )
    query = FilterQuery.from_json_dict(payload.get("filter", {}))
    outcome = parse_outcome(payload["outcome"])
    cohort = apply_filter(store, query)
    pair = split_by_ethnicity(store, cohort, payload["comparison"], payload["reference"])
    return analyze_pair(
        store,
        pair,
        outcome,
        alpha=alpha,
        zero_cell_correction=correction,
        excluded_counts=cohort.excluded_counts,
    )


def _judge_for(payload: dict):
    kind = payload.get("judge", "deterministic")
    if kind == "deterministic":
        return DeterministicJudgeClient(seed=payload.get("seed", "judge-seed"))
    if kind == "env":
        return client_from_env()
    raise ConfigurationError(f"unknown judge kind {kind!r}")


ENDPOINTS = (
    ("POST", "/v1/cohorts", "build a cohort from a filter query"),
    ("POST", "/v1/similar", "rank cases similar to a target case"),
    ("POST", "/v1/analyses", "run the full disparity analysis (synchronous)"),
    ("POST", "/v1/reports", "start a report synthesis job (asynchronous)"),
    ("POST", "/v1/evaluations", "start a judge evaluation job (asynchronous)"),
    ("GET", "/v1/jobs/{job_id}", "poll a job"),
    ("GET", "/v1/data_dictionary", "column dictionary for the record tables"),
    ("GET", "/v1/health", "service liveness, version, and snapshot date"),
    ("GET", "/v1/spec", "this endpoint listing"),
)


def create_app(
    store: RecordStore | None = None,
    *,
    data_dir: str | Path | None = None,
    job_dir: str | Path | None = None,
    cors_origins: list[str] | None = None,
    judge_factory=None,
) -> FastAPI:
    """Build the service around one record store.

    ``judge_factory`` (payload -> client) exists for tests; the default
    supports 'deterministic' and 'env' judges.
    """
    if store is None:
        if data_dir is None:
            raise ConfigurationError("create_app needs a store or a data_dir")
        store = load_store(data_dir)
    app = FastAPI(title="disparity", version=__version__, docs_url="/v1/docs")
    if cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=cors_origins,
            allow_methods=["*"],
            allow_headers=["*"],
        )
    jobs = JobStore(job_dir if job_dir is not None else Path(".") / "jobs")
    app.state.store = store
    app.state.jobs = jobs
    app.state.judge_factory = judge_factory or _judge_for

    @app.exception_handler(DisparityError)
    async def _domain_error(request: Request, exc: DisparityError):
        body = {"error": type(exc).__name__, "message": str(exc)}
        body.update(exc.payload())
        return JSONResponse(status_code=_status_for(exc), content=body)

    def _canonical(obj: dict, status_code: int = 200) -> Response:
        # Trailing newline matches the CLI artifact bytes exactly.
        return Response(
            content=canonical_json(obj) + "\n",
            media_type="application/json",
            status_code=status_code,
        )

    @app.get("/v1/health")
    def health():
        return {
            "status": "ok",
            "version": __version__,
            "snapshot_date": store.provenance.snapshot_date,
            "n_people": len(store),
            "counties": store.counties(),
            "ethnicities": store.ethnicities(),
        }

    @app.get("/v1/spec")
    def spec():
        return {
            "service": "disparity",
            "version": __version__,
            "endpoints": [
                {"method": m, "path": p, "description": d} for m, p, d in ENDPOINTS
            ],
        }

    @app.get("/v1/data_dictionary")
    def dictionary():
        return data_dictionary()

    @app.post("/v1/cohorts")
    def cohorts(payload: dict = Body(...)):
        query = FilterQuery.from_json_dict(payload.get("filter", payload))
        cohort = apply_filter(store, query)
        return _canonical(cohort.to_json_dict())

    @app.post("/v1/similar")
    def similar(payload: dict = Body(...)):
        target = payload.get("target_id")
        if not target:
            raise QueryError("missing required field 'target_id'")
        ids = None
        if "filter" in payload:
            query = FilterQuery.from_json_dict(payload["filter"])
            ids = apply_filter(store, query).hashed_ids
            if target not in ids:
                ids = tuple(ids) + (target,)
        vectors = featurize_store(store, default_feature_config(), ids=ids)
        ranked = find_similar(
            vectors,
            target,
            metric=payload.get("metric", "cosine"),
            k=int(payload.get("k", 10)),
            threshold=payload.get("threshold"),
        )
        return _canonical(
            {
                "target_id": target,
                "metric": payload.get("metric", "cosine"),
                "results": [r.to_json_dict() for r in ranked],
            }
        )

    @app.post("/v1/analyses")
    def analyses(payload: dict = Body(...)):
        analysis = run_pipeline(store, payload)
        return _canonical(analysis.to_json_dict())

    def _run_report(job_id: str, payload: dict) -> None:
        try:
            jobs.mark_running(job_id)
            analysis = run_pipeline(store, payload)
            context = tuple(payload.get("context", ()))
            bundle = assemble_prompt(analysis, context=context)
            source = payload.get("source", "fallback")
            if source == "fallback":
                report = synthesize_report(bundle, None)
            elif source == "model":
                report = synthesize_report(bundle, client_from_env())
            else:
                raise ConfigurationError(f"unknown report source {source!r}")
            jobs.finish(
                job_id,
                {"analysis": analysis.to_json_dict(), "report": report.to_json_dict()},
            )
        except Exception as exc:  # job failures land in the record, not the log
            try:
                jobs.fail(job_id, f"{type(exc).__name__}: {exc}")
            except IntegrityError:
                pass

    @app.post("/v1/reports", status_code=202)
    def reports(payload: dict = Body(...)):
        source = payload.get("source", "fallback")
        if source not in ("fallback", "model"):
            raise ConfigurationError(f"unknown report source {source!r}")
        record = jobs.create("report", dict(payload))
        thread = threading.Thread(
            target=_run_report, args=(record["job_id"], payload), daemon=True
        )
        thread.start()
        return {"job_id": record["job_id"], "status": record["status"]}

    def _run_evaluation(job_id: str, payload: dict) -> None:
        try:
            jobs.mark_running(job_id)
            judge = app.state.judge_factory(payload)
            analysis = (
                BiasAnalysis.from_json_dict(payload["analysis"])
                if payload.get("analysis")
                else None
            )
            trial_set = run_trials(
                payload["report_text"],
                judge,
                default_rubric(),
                n_trials=int(payload.get("n_trials", 15)),
                label=payload.get("label", "report"),
                analysis=analysis,
                generator_model=payload.get("generator_model", ""),
            )
            jobs.finish(job_id, {"trial_set": trial_set.to_json_dict()})
        except Exception as exc:
            try:
                jobs.fail(job_id, f"{type(exc).__name__}: {exc}")
            except IntegrityError:
                pass

    @app.post("/v1/evaluations", status_code=202)
    def evaluations(payload: dict = Body(...)):
        if not payload.get("report_text"):
            raise QueryError("missing required field 'report_text'")
        record = jobs.create("evaluation", dict(payload))
        thread = threading.Thread(
            target=_run_evaluation, args=(record["job_id"], payload), daemon=True
        )
        thread.start()
        return {"job_id": record["job_id"], "status": record["status"]}

    @app.get("/v1/jobs/{job_id}")
    def job(job_id: str):
        return _canonical(jobs.get(job_id))

    return app
