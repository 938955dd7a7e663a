"""
Records to report: the whole pipeline on synthetic data
=======================================================

Generates a de-identified fixture dataset, carves out a cohort with a
code-expression filter, splits it by ethnicity, runs the three-method
analysis, and renders the guardrailed fallback report. Everything is
seeded, so two runs of this script print identical bytes.
"""

import tempfile
from pathlib import Path

from disparity import (
    FilterQuery,
    FixtureSpec,
    analyze_pair,
    apply_filter,
    assemble_prompt,
    generate_fixture,
    load_store,
    parse_outcome,
    split_by_ethnicity,
    synthesize_report,
)

workdir = Path(tempfile.mkdtemp(prefix="disparity-demo-"))

# Three linked CSV tables: demographics, current commitments, priors.
# Identifiers are already hashed; the raw ids never leave this function.
data_dir = workdir / "data"
generate_fixture(FixtureSpec(n_people=2000), data_dir, seed=42)
store = load_store(data_dir, snapshot_date="2026-01-01")
print(f"store: {len(store)} people, counties: {', '.join(store.counties())}")

# The filter grammar nests AND/OR/NOT over offense codes. Here: robbery
# carrying a firearm enhancement, prosecuted in one county.
query = FilterQuery.from_json_dict(
    {
        "county": "Contra Costa",
        "code_expr": "PC211 AND (PC12022.5 OR PC12022.53)",
    }
)
cohort = apply_filter(store, query)
print(f"cohort: {cohort.to_json_dict()['size']} matching cases")

# Split into the comparison/reference pair and check adequacy. The check
# is advisory: small or lopsided groups produce warnings, not refusals.
pair = split_by_ethnicity(store, cohort, "Black", "White")
adequacy = pair.adequacy()
print(
    f"pair: {pair.n_comparison} vs {pair.n_reference}, "
    f"adequate: {adequacy.adequate}"
)
for warning in adequacy.warnings:
    print(f"  warning: {warning}")

analysis = analyze_pair(
    store,
    pair,
    parse_outcome("third-striker"),
    alpha=0.05,
    zero_cell_correction=True,
    excluded_counts=cohort.excluded_counts,
)
print(f"analysis: pattern {analysis.agreement.pattern}, table {analysis.table.to_json_dict()}")

# The prompt bundle carries the statistics block, the context block, and
# every numeral a report is allowed to use. With no model client attached,
# synthesis falls back to the deterministic template; guardrails run
# either way.
bundle = assemble_prompt(analysis)
report = synthesize_report(bundle)
print(f"report source: {report.source}, guardrails clean: {report.clean}")
print()
for heading, body in report.sections().items():
    print(heading)
    print("-" * len(heading))
    print(body)
    print()
