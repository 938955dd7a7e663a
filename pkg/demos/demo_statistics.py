"""
From a 2x2 table to a defensible disparity readout
==================================================

One contingency table, three methods: odds ratio, risk ratio, and the
chi-square test of independence. The point of running all three is that
they can disagree, and the agreement pattern is itself a finding.
"""

import math

from disparity import (
    ContingencyTable,
    chi_square,
    chi_square_p_value,
    odds_ratio,
    relative_risk,
    run_analysis,
    template_space_size,
)

# A cohort of 682 cases: 159 in the comparison group (56 with the studied
# outcome, 103 without) and 523 in the reference group (267 with, 256
# without). Cells are counts of people, nothing else.
table = ContingencyTable(a=56, b=103, c=267, d=256)
print(f"table: {table.to_json_dict()}  (n = {table.n})")

# Each estimator returns the point estimate plus a two-sided 95% log-method
# confidence interval. An interval that excludes 1 indicates an association.
o = odds_ratio(table)
r = relative_risk(table)
print(f"odds ratio   {o.estimate:.3f}  CI ({o.ci_low:.3f}, {o.ci_high:.3f})")
print(f"risk ratio   {r.estimate:.3f}  CI ({r.ci_low:.3f}, {r.ci_high:.3f})")

# The odds ratio always sits further from 1 than the risk ratio on the
# same table; reading it as a probability ratio overstates the contrast.
print(f"|ln OR| = {abs(math.log(o.estimate)):.4f} >= |ln RR| = {abs(math.log(r.estimate)):.4f}")

# Chi-square on raw cells, df=1, p via the complementary error function.
chi = chi_square(table)
print(f"chi-square   {chi.statistic:.2f}  p = {chi.p_value:.4f}")
print(f"(sanity: p(3.841459) = {chi_square_p_value(3.841459):.4f}, the 0.05 line)")

# run_analysis bundles the three calls and derives the agreement pattern:
# one letter per method, B = indicates an association, N = does not,
# U = unavailable (for example a zero cell with the correction turned off).
analysis = run_analysis(
    table,
    comparison_label="Black",
    reference_label="White",
    outcome_label="sentence_type=third-striker",
)
print(f"pattern      {analysis.agreement.pattern}: {analysis.agreement.description}")

# How many structurally distinct report templates does that imply? Three
# methods with 4 + 4 + 3 binary presentation dimensions, each method also
# agreeing or disagreeing with the rest:
space = template_space_size([4, 4, 3])
print(
    f"template space: {space.combined} combined x {space.alignment} "
    f"alignment = {space.total} templates"
)
