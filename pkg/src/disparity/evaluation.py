"""Rubric-based report scoring with a judge model.

A report is scored against nine rubric dimensions, one judge call per
dimension, each call cache-busted so repeated trials cannot be served from
a provider prompt cache. The judge answers in a one-line grammar
("SCORE: <value>"); whatever else it says is retained as the justification.
The overall score is always computed locally as the unweighted mean of the
dimension scores, never taken from the judge.

Repeated trials yield per-dimension score distributions (population
standard deviation); distributions aggregate across reports and compare
against human panel scores with the convention D = model - human.
"""

from __future__ import annotations

import csv
import hashlib
import json
import re
import statistics
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import (
    ConfigurationError,
    HarnessError,
    RowError,
    SchemaError,
    ScoringError,
    TransportError,
)
from .llm import CompletionRequest, CompletionResponse
from .report import statistics_block
from .util import canonical_json, now_iso, sha256_hex

DIMENSION_KEYS = (
    "or_ci",
    "rr_ci",
    "or_smp",
    "rr_smp",
    "cmp",
    "chi_smp",
    "p_ctx",
    "lim",
    "att",
)

DEFAULT_N_TRIALS = 15

# A run aborts when more than this fraction of trials fail outright.
MAX_FAILURE_FRACTION = 1 / 3

_SCORE_RE = re.compile(
    r"SCORE\s*:\s*(-?[0-9]*\.?[0-9]+)\s*(?:/\s*1(?:\.0*)?)?", re.IGNORECASE
)

_DIMENSION_MARKER_RE = re.compile(r"DIMENSION:\s*(\w+)")


@dataclass(frozen=True)
class RubricDimension:
    key: str
    title: str
    criterion: str


@dataclass(frozen=True)
class Rubric:
    dimensions: tuple[RubricDimension, ...]

    def __post_init__(self):
        keys = [d.key for d in self.dimensions]
        if len(set(keys)) != len(keys):
            raise ConfigurationError("duplicate rubric dimension keys")
        if not keys:
            raise ConfigurationError("rubric needs at least one dimension")

    @property
    def keys(self) -> tuple[str, ...]:
        return tuple(d.key for d in self.dimensions)


def default_rubric() -> Rubric:
    text = resources.files("disparity.data").joinpath("rubric.json").read_text(
        encoding="utf-8"
    )
    entries = json.loads(text)
    return Rubric(
        dimensions=tuple(
            RubricDimension(key=e["key"], title=e["title"], criterion=e["criterion"])
            for e in entries
        )
    )


def judge_prompt(
    report_text: str, dimension: RubricDimension, digest: str = ""
) -> str:
    """One-dimension scoring prompt; ``digest`` is optional ground truth."""
    parts = [
        "You are scoring one evidence report against one rubric dimension.",
        f"DIMENSION: {dimension.key}",
        f"CRITERION: {dimension.title}. {dimension.criterion}",
    ]
    if digest:
        parts.append(f"\nGROUND TRUTH STATISTICS\n{digest}")
    parts.append(f"\nREPORT\n{report_text}")
    parts.append(
        "\nReply with exactly one line of the form 'SCORE: <value>' where "
        "<value> is a number between 0 and 1, then a one-sentence "
        "justification."
    )
    return "\n".join(parts)


@dataclass(frozen=True)
class ParsedScore:
    value: float
    justification: str
    note: str = ""  # non-empty when the raw score was clamped into [0, 1]


def parse_score(text: str, dimension: str) -> ParsedScore:
    """Extract the judge's score; tolerant of '0.75/1' style answers.

    A reply without a SCORE line is a ScoringError. A numeric score outside
    [0, 1] is clamped to the nearer bound and annotated, never dropped.
    Everything in the reply other than the SCORE line is kept as the
    justification.
    """
    m = _SCORE_RE.search(text)
    if not m:
        raise ScoringError(
            f"no SCORE line in judge reply for {dimension}",
            dimension=dimension,
            raw_text=text,
        )
    value = float(m.group(1))
    note = ""
    if not (0.0 <= value <= 1.0):
        clamped = min(1.0, max(0.0, value))
        note = f"raw score {value} outside [0, 1]; clamped to {clamped}"
        value = clamped
    justification = (text[: m.start()] + text[m.end():]).strip()
    return ParsedScore(value=value, justification=justification, note=note)


@dataclass(frozen=True)
class DimensionScore:
    key: str
    score: float
    justification: str = ""
    note: str = ""


@dataclass(frozen=True)
class RubricScores:
    """One trial's scores in rubric order, with judge provenance."""

    scores: tuple[DimensionScore, ...]
    judge_model: str = ""

    @property
    def overall(self) -> float:
        """Unweighted mean of the dimension scores, computed here."""
        return sum(d.score for d in self.scores) / len(self.scores)

    @property
    def keys(self) -> tuple[str, ...]:
        return tuple(d.key for d in self.scores)

    def as_dict(self) -> dict[str, float]:
        return {d.key: d.score for d in self.scores}

    def to_json_dict(self) -> dict:
        out = {"scores": self.as_dict(), "overall": self.overall}
        justifications = {d.key: d.justification for d in self.scores if d.justification}
        notes = {d.key: d.note for d in self.scores if d.note}
        if justifications:
            out["justifications"] = justifications
        if notes:
            out["notes"] = notes
        return out


def score_report(
    report_text: str,
    client,
    rubric: Rubric | None = None,
    analysis=None,
) -> RubricScores:
    """One scoring pass: one cache-busted judge call per dimension.

    When the analysis behind the report is supplied, its statistics render
    into every judge prompt as ground truth. ScoringError propagates with
    the offending dimension and raw reply.
    """
    if rubric is None:
        rubric = default_rubric()
    digest = statistics_block(analysis) if analysis is not None else ""
    scores: list[DimensionScore] = []
    judge_model = ""
    for dimension in rubric.dimensions:
        request = CompletionRequest(
            prompt=judge_prompt(report_text, dimension, digest)
        ).with_cache_busting()
        response = client.complete(request)
        judge_model = response.model or judge_model
        parsed = parse_score(response.text, dimension.key)
        scores.append(
            DimensionScore(
                key=dimension.key,
                score=parsed.value,
                justification=parsed.justification,
                note=parsed.note,
            )
        )
    return RubricScores(scores=tuple(scores), judge_model=judge_model)


@dataclass(frozen=True)
class ScoreDistribution:
    dimension: str
    mean: float
    std: float  # population standard deviation
    min: float
    max: float
    n: int

    def to_json_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "mean": self.mean,
            "std": self.std,
            "min": self.min,
            "max": self.max,
            "n": self.n,
        }


def _distribution(dimension: str, values: list[float]) -> ScoreDistribution:
    return ScoreDistribution(
        dimension=dimension,
        mean=statistics.fmean(values),
        std=statistics.pstdev(values),
        min=min(values),
        max=max(values),
        n=len(values),
    )


@dataclass(frozen=True)
class TrialSet:
    """All successful trials for one report, plus failure bookkeeping."""

    label: str
    trials: tuple[RubricScores, ...]
    failures: int
    n_requested: int
    created_at: str
    judge_model: str = ""
    generator_model: str = ""
    failure_reasons: tuple[str, ...] = ()

    def dimension_values(self, key: str) -> list[float]:
        return [t.as_dict()[key] for t in self.trials]

    def keys(self) -> tuple[str, ...]:
        return self.trials[0].keys if self.trials else ()

    def distributions(self) -> dict[str, ScoreDistribution]:
        return {k: _distribution(k, self.dimension_values(k)) for k in self.keys()}

    def overall_values(self) -> list[float]:
        return [t.overall for t in self.trials]

    def overall_distribution(self) -> ScoreDistribution:
        return _distribution("overall", self.overall_values())

    def to_json_dict(self) -> dict:
        return {
            "label": self.label,
            "n_requested": self.n_requested,
            "failures": self.failures,
            "failure_reasons": list(self.failure_reasons),
            "judge_model": self.judge_model,
            "generator_model": self.generator_model,
            "trials": [t.to_json_dict() for t in self.trials],
            "distributions": {
                k: d.to_json_dict() for k, d in self.distributions().items()
            },
            "overall": self.overall_distribution().to_json_dict(),
            "created_at": self.created_at,
        }


def run_trials(
    report_text: str,
    client,
    rubric: Rubric | None = None,
    *,
    n_trials: int = DEFAULT_N_TRIALS,
    label: str = "report",
    analysis=None,
    generator_model: str = "",
) -> TrialSet:
    """Score a report repeatedly; sequential, so a given judge is replayable.

    A trial that fails with a scoring or transport error is recorded and
    skipped; when more than a third of trials fail the whole run raises
    HarnessError. Budget exhaustion always propagates.
    """
    if n_trials < 1:
        raise ConfigurationError("n_trials must be >= 1")
    if rubric is None:
        rubric = default_rubric()
    trials: list[RubricScores] = []
    failures = 0
    reasons: list[str] = []
    for _ in range(n_trials):
        try:
            trials.append(score_report(report_text, client, rubric, analysis))
        except (ScoringError, TransportError) as exc:
            failures += 1
            reasons.append(str(exc))
    if failures * 3 > n_trials:
        raise HarnessError(
            f"{failures}/{n_trials} trials failed (limit is one third); "
            f"first failure: {reasons[0] if reasons else 'n/a'}"
        )
    return TrialSet(
        label=label,
        trials=tuple(trials),
        failures=failures,
        n_requested=n_trials,
        created_at=now_iso(),
        judge_model=trials[0].judge_model if trials else "",
        generator_model=generator_model,
        failure_reasons=tuple(reasons),
    )


def trial_set_from_json_dict(obj: dict) -> TrialSet:
    """Rebuild a TrialSet from a trial artifact (inverse of to_json_dict)."""
    try:
        trials = []
        for t in obj["trials"]:
            justs = t.get("justifications", {})
            notes = t.get("notes", {})
            trials.append(
                RubricScores(
                    scores=tuple(
                        DimensionScore(
                            key=k,
                            score=v,
                            justification=justs.get(k, ""),
                            note=notes.get(k, ""),
                        )
                        for k, v in sorted_scores(t["scores"])
                    ),
                    judge_model=obj.get("judge_model", ""),
                )
            )
        return TrialSet(
            label=obj["label"],
            trials=tuple(trials),
            failures=obj["failures"],
            n_requested=obj["n_requested"],
            created_at=obj.get("created_at", ""),
            judge_model=obj.get("judge_model", ""),
            generator_model=obj.get("generator_model", ""),
            failure_reasons=tuple(obj.get("failure_reasons", ())),
        )
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"malformed trial artifact: {exc}")


def sorted_scores(scores: dict[str, float]) -> list[tuple[str, float]]:
    """Dimension scores in canonical rubric order (unknown keys last)."""
    order = {k: i for i, k in enumerate(DIMENSION_KEYS)}
    return sorted(scores.items(), key=lambda kv: (order.get(kv[0], len(order)), kv[0]))


# Aggregation across reports ---------------------------------------------------

@dataclass(frozen=True)
class AggregateRow:
    """One dimension aggregated across reports.

    mean averages the per-report means; std averages the per-report
    population stds; min and max range over the per-report means.
    """

    dimension: str
    mean: float
    std: float
    min: float
    max: float

    def to_json_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "mean": self.mean,
            "std": self.std,
            "min": self.min,
            "max": self.max,
        }


@dataclass(frozen=True)
class EvaluationSummary:
    rows: tuple[AggregateRow, ...]
    overall: AggregateRow
    n_reports: int
    created_at: str
    judge_models: tuple[str, ...] = ()
    generator_models: tuple[str, ...] = ()

    def row(self, dimension: str) -> AggregateRow:
        for r in self.rows:
            if r.dimension == dimension:
                return r
        raise KeyError(dimension)

    def to_json_dict(self) -> dict:
        return {
            "rows": [r.to_json_dict() for r in self.rows],
            "overall": self.overall.to_json_dict(),
            "n_reports": self.n_reports,
            "judge_models": list(self.judge_models),
            "generator_models": list(self.generator_models),
            "created_at": self.created_at,
        }


def aggregate(trial_sets: list[TrialSet]) -> EvaluationSummary:
    """Pool trial sets dimension-wise; every set must share one schema."""
    if not trial_sets:
        raise HarnessError("nothing to aggregate: no trial sets")
    keys = trial_sets[0].keys()
    for ts in trial_sets[1:]:
        if ts.keys() != keys:
            raise SchemaError(
                f"trial set '{ts.label}' scores dimensions {ts.keys()}, "
                f"expected {keys}"
            )
    rows: list[AggregateRow] = []
    for key in keys:
        dists = [ts.distributions()[key] for ts in trial_sets]
        means = [d.mean for d in dists]
        rows.append(
            AggregateRow(
                dimension=key,
                mean=statistics.fmean(means),
                std=statistics.fmean(d.std for d in dists),
                min=min(means),
                max=max(means),
            )
        )
    overall_dists = [ts.overall_distribution() for ts in trial_sets]
    overall_means = [d.mean for d in overall_dists]
    overall = AggregateRow(
        dimension="overall",
        mean=statistics.fmean(overall_means),
        std=statistics.fmean(d.std for d in overall_dists),
        min=min(overall_means),
        max=max(overall_means),
    )
    return EvaluationSummary(
        rows=tuple(rows),
        overall=overall,
        n_reports=len(trial_sets),
        created_at=now_iso(),
        judge_models=tuple(sorted({ts.judge_model for ts in trial_sets if ts.judge_model})),
        generator_models=tuple(
            sorted({ts.generator_model for ts in trial_sets if ts.generator_model})
        ),
    )


# Human comparison -------------------------------------------------------------

@dataclass(frozen=True)
class HumanScores:
    """Panel scores, one row per report, averaged per dimension."""

    rows: tuple[tuple[str, tuple[tuple[str, float], ...]], ...]
    warnings: tuple[str, ...] = ()

    def dimension_means(self) -> dict[str, float]:
        buckets: dict[str, list[float]] = {}
        for _, scores in self.rows:
            for key, value in scores:
                buckets.setdefault(key, []).append(value)
        return {k: statistics.fmean(v) for k, v in buckets.items()}


def ingest_human_scores(source: str | Path) -> HumanScores:
    """Read panel scores from a per-report CSV.

    Expected columns: ``report`` plus the nine dimension keys, optionally
    ``overall``. A malformed or out-of-range cell raises RowError naming
    the dimension and 1-based data row. A stated overall that disagrees
    with the mean of the dimensions by more than 1e-6 is kept but flagged
    as a warning; the recomputed mean wins downstream.
    """
    path = Path(source)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        fields = set(reader.fieldnames or ())
        if "report" not in fields:
            raise SchemaError("human score CSV needs a 'report' column")
        missing = [k for k in DIMENSION_KEYS if k not in fields]
        if missing:
            raise SchemaError(
                f"human score CSV lacks dimension column(s): {', '.join(missing)}"
            )
        has_overall = "overall" in fields
        rows: list[tuple[str, tuple[tuple[str, float], ...]]] = []
        warnings: list[str] = []
        for index, row in enumerate(reader, start=1):
            scores: list[tuple[str, float]] = []
            for key in DIMENSION_KEYS:
                raw = (row.get(key) or "").strip()
                try:
                    value = float(raw)
                except ValueError:
                    raise RowError(
                        f"unparseable human score {raw!r} for dimension "
                        f"'{key}' in row {index}",
                        row_index=index,
                    )
                if not (0.0 <= value <= 1.0):
                    raise RowError(
                        f"human score {value} outside [0, 1] for dimension "
                        f"'{key}' in row {index}",
                        row_index=index,
                    )
                scores.append((key, value))
            local_overall = statistics.fmean(v for _, v in scores)
            if has_overall and (row.get("overall") or "").strip():
                try:
                    stated = float(row["overall"])
                except ValueError:
                    raise RowError(
                        f"unparseable overall {row['overall']!r} in row {index}",
                        row_index=index,
                    )
                if abs(stated - local_overall) > 1e-6:
                    warnings.append(
                        f"row {index} ({row['report']}): stated overall "
                        f"{stated} differs from dimension mean "
                        f"{local_overall:.6f}; using the mean"
                    )
            rows.append((row["report"].strip(), tuple(scores)))
    if not rows:
        raise SchemaError("human score CSV has no data rows")
    return HumanScores(rows=tuple(rows), warnings=tuple(warnings))


@dataclass(frozen=True)
class ComparisonRow:
    """Model-vs-human gap for one dimension; delta = model - human."""

    dimension: str
    model_mean: float
    model_std: float
    human_mean: float
    delta: float

    def to_json_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "model_mean": self.model_mean,
            "model_std": self.model_std,
            "human_mean": self.human_mean,
            "delta": self.delta,
        }


def compare_to_human(
    summary: EvaluationSummary, human: HumanScores | dict[str, float]
) -> tuple[ComparisonRow, ...]:
    """Line the aggregate up against human means, dimension by dimension.

    Only dimensions present on both sides appear; the human overall is the
    mean of the shared dimension means.
    """
    human_means = (
        human.dimension_means() if isinstance(human, HumanScores) else dict(human)
    )
    rows: list[ComparisonRow] = []
    shared_human: list[float] = []
    for row in summary.rows:
        if row.dimension not in human_means:
            continue
        h = human_means[row.dimension]
        shared_human.append(h)
        rows.append(
            ComparisonRow(
                dimension=row.dimension,
                model_mean=row.mean,
                model_std=row.std,
                human_mean=h,
                delta=row.mean - h,
            )
        )
    if not rows:
        raise SchemaError("no shared dimensions between model and human scores")
    human_overall = human_means.get("overall")
    if human_overall is None:
        human_overall = statistics.fmean(shared_human)
    rows.append(
        ComparisonRow(
            dimension="overall",
            model_mean=summary.overall.mean,
            model_std=summary.overall.std,
            human_mean=human_overall,
            delta=summary.overall.mean - human_overall,
        )
    )
    return tuple(rows)


# CSV and artifact writers -----------------------------------------------------

def write_distribution_csv(summary: EvaluationSummary, path: str | Path) -> Path:
    """Per-dimension aggregate table: dimension, mean, std, min, max."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("dimension", "mean", "std", "min", "max"))
        for row in (*summary.rows, summary.overall):
            writer.writerow(
                (
                    row.dimension,
                    f"{row.mean:.4f}",
                    f"{row.std:.4f}",
                    f"{row.min:.4f}",
                    f"{row.max:.4f}",
                )
            )
    return path


def write_comparison_csv(rows: tuple[ComparisonRow, ...], path: str | Path) -> Path:
    """Model-vs-human table with the fixed header (dimension, L, L*, H, D).

    L is the model mean, L* the mean per-run spread, H the human mean, and
    D = L - H.
    """
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("dimension", "L", "L*", "H", "D"))
        for row in rows:
            writer.writerow(
                (
                    row.dimension,
                    f"{row.model_mean:.4f}",
                    f"{row.model_std:.4f}",
                    f"{row.human_mean:.4f}",
                    f"{row.delta:+.4f}",
                )
            )
    return path


def write_trial_artifact(trial_set: TrialSet, path: str | Path) -> Path:
    """Canonical-JSON trial record. Carries no request routing keys."""
    path = Path(path)
    path.write_text(canonical_json(trial_set.to_json_dict()) + "\n", encoding="utf-8")
    return path


# Test and replay judges -------------------------------------------------------

class DeterministicJudgeClient:
    """Judge whose scores are a pure function of (seed, prompt, call index).

    Each distinct prompt keeps its own call counter, so repeated trials on
    the same report walk a stable pseudo-random score sequence in
    {0, 0.25, 0.5, 0.75, 1}. Useful for replayable end-to-end runs without
    a provider.
    """

    def __init__(self, seed: str = "judge-seed"):
        self._seed = seed
        self._counters: dict[str, int] = {}

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        prompt_hash = sha256_hex(request.prompt)[:16]
        count = self._counters.get(prompt_hash, 0)
        self._counters[prompt_hash] = count + 1
        digest = hashlib.md5(
            f"{self._seed}:{prompt_hash}:{count}".encode("utf-8")
        ).hexdigest()
        score = (int(digest[:8], 16) % 5) / 4.0
        return CompletionResponse(text=f"SCORE: {score}", model="deterministic-judge")


class ScriptedJudgeClient:
    """Judge driven by per-dimension scripts, for harness tests.

    The dimension is recovered from the prompt's DIMENSION marker. Script
    entries: a float becomes 'SCORE: <v>', a string is returned verbatim
    (e.g. malformed output), an exception is raised. A dry script repeats
    its last entry. Calls are recorded as (dimension, prompt) pairs only.
    """

    def __init__(self, scripts: dict[str, list], default: float = 1.0):
        self._scripts = {k: list(v) for k, v in scripts.items()}
        self._cursors: dict[str, int] = {}
        self._default = default
        self.calls: list[tuple[str, str]] = []

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        m = _DIMENSION_MARKER_RE.search(request.prompt)
        dimension = m.group(1) if m else ""
        self.calls.append((dimension, request.prompt))
        script = self._scripts.get(dimension)
        if not script:
            return CompletionResponse(
                text=f"SCORE: {self._default}", model="scripted-judge"
            )
        cursor = self._cursors.get(dimension, 0)
        step = script[min(cursor, len(script) - 1)]
        self._cursors[dimension] = cursor + 1
        if isinstance(step, Exception):
            raise step
        if isinstance(step, str):
            return CompletionResponse(text=step, model="scripted-judge")
        return CompletionResponse(text=f"SCORE: {step}", model="scripted-judge")
