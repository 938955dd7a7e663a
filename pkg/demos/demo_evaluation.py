"""
Scoring reports with a judge: trials, aggregation, human comparison
===================================================================

Runs the nine-dimension rubric over a report with a deterministic mock
judge, repeats the scoring across trials, aggregates two reports into a
distribution table, and lines the result up against a human panel. The
same harness takes a live provider client; the mock keeps this demo
offline and reproducible.
"""

import tempfile
from pathlib import Path

from disparity import (
    ContingencyTable,
    DeterministicJudgeClient,
    aggregate,
    compare_to_human,
    default_rubric,
    render_fallback,
    run_analysis,
    run_trials,
)
from disparity.evaluation import write_comparison_csv, write_distribution_csv

workdir = Path(tempfile.mkdtemp(prefix="disparity-demo-"))

# The rubric: nine dimensions, each scored 0..1 from a SCORE: line in the
# judge's reply. Attribution (att) checks that disparity is framed as a
# property of the system, not of the people in the cohort.
rubric = default_rubric()
print("rubric dimensions:", ", ".join(rubric.keys))

# Something to score: fallback reports for two different tables.
reports = {
    "engineered": render_fallback(
        run_analysis(
            ContingencyTable(56, 103, 267, 256),
            comparison_label="Black",
            reference_label="White",
            outcome_label="sentence_type=third-striker",
        )
    ),
    "null": render_fallback(
        run_analysis(
            ContingencyTable(30, 70, 20, 80),
            comparison_label="Black",
            reference_label="White",
            outcome_label="sentence_type=third-striker",
        )
    ),
}

# Fifteen trials per report. Each trial re-sends every dimension prompt
# with fresh routing keys, so a cached judge cannot echo itself; the
# deterministic mock replays a seeded score stream instead of calling out.
trial_sets = []
for label, text in reports.items():
    ts = run_trials(
        text,
        DeterministicJudgeClient(seed="demo-judge"),
        rubric,
        n_trials=15,
        label=label,
        generator_model="fallback-template-1",
    )
    dist = ts.overall_distribution()
    print(
        f"{label}: overall mean {dist.mean:.3f} (std {dist.std:.3f}), "
        f"failures {ts.failures}/{ts.n_requested}"
    )
    trial_sets.append(ts)

# Aggregate across reports: per-dimension means average the per-report
# means; identical scores collapse to a 0.00 std.
summary = aggregate(trial_sets)
for row in summary.rows:
    print(
        f"  {row.dimension:7s} mean {row.mean:.4f}  std {row.std:.4f}  "
        f"[{row.min:.4f}, {row.max:.4f}]"
    )

# A human panel scored the same dimensions; D = model minus human per
# dimension, positive where the judge is more generous.
human = {key: 0.8 for key in rubric.keys}
rows = compare_to_human(summary, human)
for row in rows[:3]:
    print(f"  D({row.dimension}) = {row.delta:+.4f}")

dist_csv = write_distribution_csv(summary, workdir / "distributions.csv")
cmp_csv = write_comparison_csv(rows, workdir / "comparison.csv")
print(f"wrote {dist_csv}")
print(f"wrote {cmp_csv}")
