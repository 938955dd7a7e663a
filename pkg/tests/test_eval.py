"""Judge parsing, rubric scoring, trial aggregation, and human comparison."""

import json

import pytest

from disparity import (
    DeterministicJudgeClient,
    LlmClient,
    MockTransport,
    Rubric,
    ScriptedJudgeClient,
    aggregate,
    compare_to_human,
    default_rubric,
    ingest_human_scores,
    parse_score,
    run_trials,
    score_report,
)
from disparity.errors import (
    BudgetError,
    ConfigurationError,
    HarnessError,
    RowError,
    SchemaError,
    ScoringError,
    TransportError,
)
from disparity.evaluation import (
    DIMENSION_KEYS,
    AggregateRow,
    EvaluationSummary,
    RubricDimension,
    judge_prompt,
    trial_set_from_json_dict,
    write_comparison_csv,
    write_distribution_csv,
    write_trial_artifact,
)

REPORT_TEXT = "Executive Summary\n\nA short stand-in report body."


def no_sleep(_):
    pass


def alternating_scripts(n=15):
    # every dimension alternates 1.0, 0.5 per trial, starting at 1.0
    return {k: [1.0 if t % 2 == 0 else 0.5 for t in range(n)] for k in DIMENSION_KEYS}


class TestParseScore:
    @pytest.mark.parametrize(
        "text,value",
        [
            ("SCORE: 0.75", 0.75),
            ("SCORE: 1", 1.0),
            ("SCORE:0", 0.0),
            ("score: 0.5", 0.5),
            ("SCORE : .25", 0.25),
            ("SCORE: 0.75/1", 0.75),
            ("SCORE: 0.75 / 1.0", 0.75),
        ],
    )
    def test_grammar(self, text, value):
        assert parse_score(text, "cmp").value == value

    def test_justification_is_everything_else(self):
        parsed = parse_score(
            "The intervals are stated plainly.\nSCORE: 0.75\nGood report.", "or_ci"
        )
        assert parsed.value == 0.75
        assert "intervals are stated plainly" in parsed.justification
        assert "Good report." in parsed.justification
        assert "SCORE" not in parsed.justification
        assert parsed.note == ""

    def test_clamps_high(self):
        parsed = parse_score("SCORE: 1.5", "cmp")
        assert parsed.value == 1.0
        assert parsed.note == "raw score 1.5 outside [0, 1]; clamped to 1.0"

    def test_clamps_negative(self):
        parsed = parse_score("SCORE: -0.25", "cmp")
        assert parsed.value == 0.0
        assert parsed.note == "raw score -0.25 outside [0, 1]; clamped to 0.0"

    def test_missing_score_line(self):
        with pytest.raises(ScoringError) as err:
            parse_score("I decline to assign a number.", "lim")
        assert err.value.dimension == "lim"
        assert err.value.raw_text == "I decline to assign a number."

    def test_plain_number_without_marker_rejected(self):
        with pytest.raises(ScoringError):
            parse_score("0.75", "cmp")


class TestRubricAndPrompt:
    def test_default_rubric_matches_dimension_keys(self):
        assert default_rubric().keys == DIMENSION_KEYS

    def test_duplicate_keys_rejected(self):
        dim = RubricDimension(key="cmp", title="t", criterion="c")
        with pytest.raises(ConfigurationError):
            Rubric(dimensions=(dim, dim))
        with pytest.raises(ConfigurationError):
            Rubric(dimensions=())

    def test_prompt_carries_marker_and_criterion(self):
        dim = default_rubric().dimensions[0]
        prompt = judge_prompt(REPORT_TEXT, dim)
        assert f"DIMENSION: {dim.key}" in prompt
        assert dim.criterion in prompt
        assert REPORT_TEXT in prompt
        assert "SCORE: <value>" in prompt
        assert "GROUND TRUTH STATISTICS" not in prompt

    def test_prompt_with_digest(self, recorded_analysis):
        from disparity.report import statistics_block

        dim = default_rubric().dimensions[0]
        prompt = judge_prompt(REPORT_TEXT, dim, statistics_block(recorded_analysis))
        assert "GROUND TRUTH STATISTICS" in prompt
        assert "Odds ratio: 0.521" in prompt


class TestScoreReport:
    def test_judge_fixture_overall(self, oracles):
        # (1, 1, .75, .75, 1, 1, 1, 1, .75) over the nine dimensions
        judge = ScriptedJudgeClient(
            {"or_smp": [0.75], "rr_smp": [0.75], "att": [0.75]}
        )
        scores = score_report(REPORT_TEXT, judge)
        assert scores.overall == oracles["judge_overall_fixture"]
        assert scores.keys == DIMENSION_KEYS
        assert scores.judge_model == "scripted-judge"

    def test_one_call_per_dimension_with_digest(self, recorded_analysis):
        judge = ScriptedJudgeClient({})
        score_report(REPORT_TEXT, judge, analysis=recorded_analysis)
        assert [dim for dim, _ in judge.calls] == list(DIMENSION_KEYS)
        assert all("GROUND TRUTH STATISTICS" in p for _, p in judge.calls)
        assert all("Odds ratio: 0.521" in p for _, p in judge.calls)

    def test_requests_are_cache_busted(self):
        transport = MockTransport(["SCORE: 1.0"])
        client = LlmClient(transport, sleeper=no_sleep)
        score_report(REPORT_TEXT, client)
        keys = [(r.user_key, r.cache_key) for r in transport.requests]
        assert len(keys) == len(DIMENSION_KEYS)
        assert len(set(keys)) == len(keys)

    def test_scoring_error_names_dimension(self):
        judge = ScriptedJudgeClient({"cmp": ["I refuse to answer."]})
        with pytest.raises(ScoringError) as err:
            score_report(REPORT_TEXT, judge)
        assert err.value.dimension == "cmp"
        assert err.value.raw_text == "I refuse to answer."

    def test_clamp_note_retained(self):
        judge = ScriptedJudgeClient({"att": ["SCORE: 2.0 overenthusiastic"]})
        scores = score_report(REPORT_TEXT, judge)
        att = dict(zip(scores.keys, scores.scores))["att"]
        assert att.score == 1.0
        assert "clamped" in att.note
        assert att.justification == "overenthusiastic"


class TestRunTrials:
    def test_alternating_fixture(self, oracles, pinned_clock):
        judge = ScriptedJudgeClient(alternating_scripts())
        ts = run_trials(REPORT_TEXT, judge, label="alternating")
        assert ts.n_requested == 15
        assert len(ts.trials) == 15
        assert ts.failures == 0
        assert ts.created_at == pinned_clock
        dist = ts.overall_distribution()
        assert dist.mean == oracles["alternating_trials"]["mean"]
        assert dist.std == pytest.approx(
            oracles["alternating_trials"]["pstd"], rel=1e-12
        )
        for key, d in ts.distributions().items():
            assert d.mean == oracles["alternating_trials"]["mean"]
            assert d.n == 15

    def test_failed_trials_recorded(self):
        judge = ScriptedJudgeClient({"att": [1.0, "no number here", 1.0]})
        ts = run_trials(REPORT_TEXT, judge, n_trials=3)
        assert ts.failures == 1
        assert len(ts.trials) == 2
        assert len(ts.failure_reasons) == 1
        assert "att" in ts.failure_reasons[0]

    def test_transport_failures_count(self):
        judge = ScriptedJudgeClient(
            {"or_ci": [1.0, TransportError("judge offline"), 1.0]}
        )
        ts = run_trials(REPORT_TEXT, judge, n_trials=3)
        assert ts.failures == 1
        assert "judge offline" in ts.failure_reasons[0]

    def test_too_many_failures_abort(self):
        judge = ScriptedJudgeClient({"att": ["bad", "bad", 1.0]})
        with pytest.raises(HarnessError) as err:
            run_trials(REPORT_TEXT, judge, n_trials=3)
        assert "2/3 trials failed" in str(err.value)

    def test_budget_exhaustion_propagates(self):
        client = LlmClient(MockTransport(["SCORE: 1.0"]), budget=5, sleeper=no_sleep)
        with pytest.raises(BudgetError):
            run_trials(REPORT_TEXT, client, n_trials=2)

    def test_bad_trial_count(self):
        with pytest.raises(ConfigurationError):
            run_trials(REPORT_TEXT, ScriptedJudgeClient({}), n_trials=0)

    def test_provenance_fields(self):
        ts = run_trials(
            REPORT_TEXT,
            ScriptedJudgeClient({}),
            n_trials=2,
            label="fallback-report",
            generator_model="fallback-template-1",
        )
        assert ts.label == "fallback-report"
        assert ts.judge_model == "scripted-judge"
        assert ts.generator_model == "fallback-template-1"

    def test_artifact_round_trip(self, tmp_path):
        judge = ScriptedJudgeClient(
            {"att": ["SCORE: 1.5 keen", 0.75], "cmp": ["SCORE: 0.5 terse"]}
        )
        ts = run_trials(REPORT_TEXT, judge, n_trials=3, label="rt")
        path = write_trial_artifact(ts, tmp_path / "trials.json")
        raw = path.read_text(encoding="utf-8")
        assert raw.endswith("\n")
        rebuilt = trial_set_from_json_dict(json.loads(raw))
        assert rebuilt == ts

    def test_malformed_artifact(self):
        with pytest.raises(ConfigurationError):
            trial_set_from_json_dict({"label": "x"})


class TestAggregate:
    def test_empty_input(self):
        with pytest.raises(HarnessError):
            aggregate([])

    def test_schema_mismatch_names_label(self):
        full = run_trials(REPORT_TEXT, ScriptedJudgeClient({}), n_trials=2)
        rubric = Rubric(
            dimensions=(RubricDimension(key="or_ci", title="t", criterion="c"),)
        )
        narrow = run_trials(
            REPORT_TEXT, ScriptedJudgeClient({}), rubric, n_trials=2, label="narrow"
        )
        with pytest.raises(SchemaError) as err:
            aggregate([full, narrow])
        assert "narrow" in str(err.value)

    def test_two_report_pooling(self, oracles):
        steady = run_trials(
            REPORT_TEXT, ScriptedJudgeClient({}), label="steady"
        )
        wobbly = run_trials(
            REPORT_TEXT, ScriptedJudgeClient(alternating_scripts()), label="wobbly"
        )
        summary = aggregate([steady, wobbly])
        alt = oracles["alternating_trials"]
        assert summary.n_reports == 2
        for row in summary.rows:
            assert row.mean == pytest.approx((1.0 + alt["mean"]) / 2, rel=1e-12)
            assert row.std == pytest.approx(alt["pstd"] / 2, rel=1e-12)
            assert row.min == alt["mean"]
            assert row.max == 1.0
        assert summary.overall.mean == pytest.approx(
            (1.0 + alt["mean"]) / 2, rel=1e-12
        )
        assert summary.judge_models == ("scripted-judge",)

    def test_model_provenance_collected(self):
        a = run_trials(
            REPORT_TEXT, ScriptedJudgeClient({}), n_trials=1, generator_model="m2"
        )
        b = run_trials(
            REPORT_TEXT, ScriptedJudgeClient({}), n_trials=1, generator_model="m1"
        )
        summary = aggregate([a, b])
        assert summary.generator_models == ("m1", "m2")
        assert summary.row("att").dimension == "att"
        with pytest.raises(KeyError):
            summary.row("nope")

    def test_json_dict_shape(self):
        ts = run_trials(REPORT_TEXT, ScriptedJudgeClient({}), n_trials=1)
        d = aggregate([ts]).to_json_dict()
        assert d["n_reports"] == 1
        assert d["overall"]["dimension"] == "overall"
        assert [r["dimension"] for r in d["rows"]] == list(DIMENSION_KEYS)


def human_csv(tmp_path, rows, header=None, name="human.csv"):
    if header is None:
        header = ("report",) + DIMENSION_KEYS
    path = tmp_path / name
    lines = [",".join(header)]
    lines.extend(",".join(str(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


class TestHumanScores:
    def test_round_trip_and_means(self, tmp_path):
        path = human_csv(
            tmp_path,
            [
                ("r1", 1.0, 1.0, 0.5, 0.5, 1.0, 1.0, 1.0, 1.0, 1.0),
                ("r2", 0.5, 0.5, 0.5, 0.5, 1.0, 1.0, 1.0, 1.0, 1.0),
            ],
        )
        human = ingest_human_scores(path)
        assert human.warnings == ()
        means = human.dimension_means()
        assert means["or_ci"] == 0.75
        assert means["or_smp"] == 0.5
        assert means["att"] == 1.0

    def test_missing_report_column(self, tmp_path):
        path = human_csv(tmp_path, [], header=DIMENSION_KEYS)
        with pytest.raises(SchemaError) as err:
            ingest_human_scores(path)
        assert "report" in str(err.value)

    def test_missing_dimension_column(self, tmp_path):
        header = ("report",) + DIMENSION_KEYS[:-1]
        path = human_csv(tmp_path, [("r1",) + (1.0,) * 8], header=header)
        with pytest.raises(SchemaError) as err:
            ingest_human_scores(path)
        assert "att" in str(err.value)

    def test_no_data_rows(self, tmp_path):
        with pytest.raises(SchemaError):
            ingest_human_scores(human_csv(tmp_path, []))

    def test_unparseable_cell(self, tmp_path):
        path = human_csv(
            tmp_path,
            [
                ("r1",) + (1.0,) * 9,
                ("r2", 1.0, 1.0, "high", 0.5, 1.0, 1.0, 1.0, 1.0, 1.0),
            ],
        )
        with pytest.raises(RowError) as err:
            ingest_human_scores(path)
        assert err.value.row_index == 2
        assert "or_smp" in str(err.value)
        assert "row 2" in str(err.value)

    def test_out_of_range_cell(self, tmp_path):
        path = human_csv(tmp_path, [("r1", 1.0, 1.0, 1.0, 1.2, 1.0, 1.0, 1.0, 1.0, 1.0)])
        with pytest.raises(RowError) as err:
            ingest_human_scores(path)
        assert err.value.row_index == 1
        assert "rr_smp" in str(err.value)

    def test_overall_mismatch_warns_but_keeps_row(self, tmp_path):
        header = ("report",) + DIMENSION_KEYS + ("overall",)
        path = human_csv(
            tmp_path,
            [("r1",) + (1.0,) * 9 + (0.9,), ("r2",) + (0.5,) * 9 + (0.5,)],
            header=header,
        )
        human = ingest_human_scores(path)
        assert len(human.rows) == 2
        assert len(human.warnings) == 1
        assert "r1" in human.warnings[0]
        assert "using the mean" in human.warnings[0]

    def test_consistent_overall_is_silent(self, tmp_path):
        header = ("report",) + DIMENSION_KEYS + ("overall",)
        path = human_csv(tmp_path, [("r1",) + (0.75,) * 9 + (0.75,)], header=header)
        assert ingest_human_scores(path).warnings == ()

    def test_unparseable_overall(self, tmp_path):
        header = ("report",) + DIMENSION_KEYS + ("overall",)
        path = human_csv(tmp_path, [("r1",) + (1.0,) * 9 + ("great",)], header=header)
        with pytest.raises(RowError):
            ingest_human_scores(path)


def summary_from_means(means: dict[str, float]) -> EvaluationSummary:
    rows = tuple(
        AggregateRow(dimension=k, mean=v, std=0.1, min=v, max=v)
        for k, v in means.items()
    )
    overall_mean = sum(means.values()) / len(means)
    return EvaluationSummary(
        rows=rows,
        overall=AggregateRow(
            dimension="overall",
            mean=overall_mean,
            std=0.1,
            min=overall_mean,
            max=overall_mean,
        ),
        n_reports=30,
        created_at="2026-01-01T00:00:00Z",
    )


class TestCompareToHuman:
    def test_delta_signs_match_fixture(self, oracles):
        fx = oracles["d_sign"]
        summary = summary_from_means(
            {"p_ctx": fx["p_ctx"]["model"], "lim": fx["lim"]["model"]}
        )
        rows = compare_to_human(
            summary, {"p_ctx": fx["p_ctx"]["human"], "lim": fx["lim"]["human"]}
        )
        by_dim = {r.dimension: r for r in rows}
        assert by_dim["p_ctx"].delta == fx["p_ctx"]["d"]
        assert by_dim["p_ctx"].delta > 0
        assert by_dim["lim"].delta == fx["lim"]["d"]
        assert by_dim["lim"].delta < 0

    def test_shared_dimensions_only(self):
        summary = summary_from_means({"p_ctx": 0.8, "lim": 0.7})
        rows = compare_to_human(summary, {"p_ctx": 0.9, "cmp": 0.2})
        assert [r.dimension for r in rows] == ["p_ctx", "overall"]

    def test_no_shared_dimensions(self):
        summary = summary_from_means({"p_ctx": 0.8})
        with pytest.raises(SchemaError):
            compare_to_human(summary, {"cmp": 0.9})

    def test_human_overall_defaults_to_shared_mean(self):
        summary = summary_from_means({"p_ctx": 0.8, "lim": 0.6})
        rows = compare_to_human(summary, {"p_ctx": 0.9, "lim": 0.7})
        overall = rows[-1]
        assert overall.dimension == "overall"
        assert overall.human_mean == pytest.approx(0.8)

    def test_explicit_human_overall_wins(self):
        summary = summary_from_means({"p_ctx": 0.8})
        rows = compare_to_human(summary, {"p_ctx": 0.9, "overall": 0.95})
        assert rows[-1].human_mean == 0.95

    def test_human_scores_object_accepted(self, tmp_path):
        path = human_csv(tmp_path, [("r1",) + (0.75,) * 9])
        summary = summary_from_means(dict.fromkeys(DIMENSION_KEYS, 0.8))
        rows = compare_to_human(summary, ingest_human_scores(path))
        assert len(rows) == len(DIMENSION_KEYS) + 1
        assert all(r.human_mean == 0.75 for r in rows[:-1])


class TestCsvWriters:
    def test_distribution_csv_format(self, tmp_path):
        ts = run_trials(REPORT_TEXT, ScriptedJudgeClient(alternating_scripts()))
        path = write_distribution_csv(aggregate([ts]), tmp_path / "dist.csv")
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "dimension,mean,std,min,max"
        assert len(lines) == 1 + len(DIMENSION_KEYS) + 1
        assert lines[1] == "or_ci,0.7667,0.2494,0.7667,0.7667"
        assert lines[-1] == "overall,0.7667,0.2494,0.7667,0.7667"

    def test_comparison_csv_format(self, tmp_path, oracles):
        fx = oracles["d_sign"]
        summary = summary_from_means(
            {"p_ctx": fx["p_ctx"]["model"], "lim": fx["lim"]["model"]}
        )
        rows = compare_to_human(
            summary, {"p_ctx": fx["p_ctx"]["human"], "lim": fx["lim"]["human"]}
        )
        path = write_comparison_csv(rows, tmp_path / "cmp.csv")
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "dimension,L,L*,H,D"
        assert lines[1] == "p_ctx,0.8900,0.1000,0.8400,+0.0500"
        assert lines[2] == "lim,0.7500,0.1000,0.9400,-0.1900"


class TestDeterministicJudge:
    def test_replayable_across_instances(self):
        first = run_trials(
            REPORT_TEXT, DeterministicJudgeClient(seed="s1"), n_trials=5
        )
        second = run_trials(
            REPORT_TEXT, DeterministicJudgeClient(seed="s1"), n_trials=5
        )
        assert first.overall_values() == second.overall_values()
        assert [t.as_dict() for t in first.trials] == [
            t.as_dict() for t in second.trials
        ]

    def test_seed_changes_scores(self):
        a = run_trials(REPORT_TEXT, DeterministicJudgeClient(seed="s1"), n_trials=5)
        b = run_trials(REPORT_TEXT, DeterministicJudgeClient(seed="s2"), n_trials=5)
        assert a.overall_values() != b.overall_values()

    def test_scores_on_quarter_grid(self):
        ts = run_trials(REPORT_TEXT, DeterministicJudgeClient(), n_trials=4)
        grid = {0.0, 0.25, 0.5, 0.75, 1.0}
        for trial in ts.trials:
            assert set(trial.as_dict().values()) <= grid
        assert ts.judge_model == "deterministic-judge"

    def test_prompt_counters_advance(self):
        # same dimension, same report: trials walk a sequence, not a constant
        judge = DeterministicJudgeClient(seed="walk")
        ts = run_trials(REPORT_TEXT, judge, n_trials=8)
        values = ts.dimension_values("or_ci")
        assert len(set(values)) > 1
