"""Evidence-report synthesis, fallback rendering, and guardrail checks.

A report is plain text in four fixed sections. It can be synthesized by a
language model from an assembled prompt bundle, or rendered from a
deterministic template covering the eight method-alignment patterns. Either
way the text then passes through guardrails: section completeness, numeric
traceability back to the bundle, attribution hygiene, and limitation
disclosure. Guardrail failures attach to the report, never reject it; the
caller decides what to do with a flagged report.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources

from .errors import AssemblyError, StructureError
from .llm import CompletionRequest, LlmClient
from .query import MIN_GROUP_SIZE, MIN_MINORITY_SHARE
from .stats import BiasAnalysis
from .util import now_iso, sha256_hex

SECTION_HEADINGS = (
    "Executive Summary",
    "Findings",
    "Analytical Constraints and Considerations",
    "Key Terms and Methodology",
)

# Numerals standing alone; code-attached digits (PC211, PC12022.53) have a
# word character or dot on a flank and are skipped.
NUMERAL_RE = re.compile(r"(?<![\w.])(\d+(?:\.\d+)?)(?!\w)")

# Always-traceable structural constants: the null value, the conventional
# alpha and its CI level, the continuity increment, and the advisory
# sample-size floors.
STRUCTURAL_CONSTANTS = (
    1.0,
    0.05,
    95.0,
    0.5,
    MIN_MINORITY_SHARE,
    MIN_MINORITY_SHARE * 100,
    100 - MIN_MINORITY_SHARE * 100,
    float(MIN_GROUP_SIZE),
    2.0,
)

_NEGATION_WINDOW = 60
_NEGATION_RE = re.compile(
    r"\b(?:not|no|never|neither|nor|cannot|can't|doesn't|don't|without|"
    r"rather than|instead of)\b",
    re.IGNORECASE,
)


def _fmt3(value: float) -> str:
    """Three decimals with trailing zeros stripped ('0.690' -> '0.69')."""
    out = f"{value:.3f}".rstrip("0").rstrip(".")
    return out if out else "0"


def _fmt(value: float, places: int) -> str:
    return f"{value:.{places}f}"


def _ci_text(low: float, high: float) -> str:
    return f"({_fmt3(low)}, {_fmt3(high)})"


def default_instruction() -> str:
    return resources.files("disparity.data").joinpath("instruction.txt").read_text(
        encoding="utf-8"
    )


def default_prohibited_framings() -> tuple[tuple[str, str], ...]:
    """(name, regex) pairs from the packaged lexicon."""
    text = resources.files("disparity.data").joinpath("prohibited_framings.json").read_text(
        encoding="utf-8"
    )
    entries = json.loads(text)
    return tuple((e["name"], e["pattern"]) for e in entries)


@dataclass(frozen=True)
class PromptBundle:
    """Everything synthesis needs, plus the traceability ground truth.

    ``numeric_values`` holds full-precision values; a numeral in a report is
    traceable when some value rounds to it at the numeral's own displayed
    precision.
    """

    instruction: str
    statistics_block: str
    context_block: str
    reference_documents: tuple[str, ...]
    prompt: str
    prompt_hash: str
    numeric_values: tuple[float, ...]
    analysis: BiasAnalysis

    def to_json_dict(self) -> dict:
        return {
            "instruction": self.instruction,
            "statistics_block": self.statistics_block,
            "context_block": self.context_block,
            "reference_documents": list(self.reference_documents),
            "prompt": self.prompt,
            "prompt_hash": self.prompt_hash,
            "numeric_values": list(self.numeric_values),
            "analysis": self.analysis.to_json_dict(),
        }


def statistics_block(analysis: BiasAnalysis) -> str:
    lines: list[str] = []
    t = analysis.table
    lines.append(
        f"Contingency table (event / no event): "
        f"{analysis.comparison_label} {t.a} / {t.b}; "
        f"{analysis.reference_label} {t.c} / {t.d}."
    )
    level = _fmt3((1 - analysis.alpha) * 100)
    for est, name, reason in (
        (analysis.odds_ratio, "Odds ratio", analysis.or_unavailable),
        (analysis.relative_risk, "Risk ratio", analysis.rr_unavailable),
    ):
        if est:
            note = " [continuity correction applied]" if est.correction_applied else ""
            lines.append(
                f"{name}: {_fmt3(est.estimate)}, {level}% CI "
                f"{_ci_text(est.ci_low, est.ci_high)}{note}."
            )
        else:
            lines.append(f"{name}: unavailable: {reason}.")
    lines.append(
        f"Chi-square: {_fmt3(analysis.chi2.statistic)} "
        f"(df {analysis.chi2.df}), p-value {_fmt(analysis.chi2.p_value, 4)}."
    )
    lines.append(
        f"Method agreement pattern {analysis.agreement.pattern}: "
        f"{analysis.agreement.description}."
    )
    return "\n".join(lines)


def context_block(analysis: BiasAnalysis) -> str:
    lines: list[str] = []
    lines.append(
        f"Comparison group: {analysis.comparison_label} "
        f"(n = {analysis.n_comparison}). Reference group: "
        f"{analysis.reference_label} (n = {analysis.n_reference})."
    )
    lines.append(f"Outcome studied: {analysis.outcome_label}.")
    lines.append(
        f"Significance level alpha = {_fmt3(analysis.alpha)}; intervals are "
        f"{_fmt3((1 - analysis.alpha) * 100)}% two-sided."
    )
    corrected = any(
        e and e.correction_applied for e in (analysis.odds_ratio, analysis.relative_risk)
    )
    if corrected:
        lines.append(
            "A continuity correction of 0.5 per cell was applied to ratio "
            "estimates because a table cell was zero."
        )
    if analysis.excluded_counts:
        parts = ", ".join(f"{name}: {count}" for name, count in analysis.excluded_counts)
        lines.append(f"Records excluded by rule ({parts}).")
    if analysis.adequacy:
        adq = analysis.adequacy
        if adq.get("adequate"):
            lines.append("Group sizes pass the advisory adequacy check.")
        else:
            lines.append(
                "Advisory adequacy warnings: " + " ".join(adq.get("warnings", ()))
            )
    return "\n".join(lines)


def _harvest_numerals(text: str) -> list[float]:
    return [float(m.group(1)) for m in NUMERAL_RE.finditer(text)]


def assemble_prompt(
    analysis: BiasAnalysis,
    context: tuple[str, ...] | list[str] | None = None,
    instruction: str | None = None,
) -> PromptBundle:
    """Build the synthesis prompt and its traceability set.

    ``context`` is an optional set of reference documents included verbatim
    after the instruction. Deterministic for fixed inputs. Raises
    AssemblyError naming whatever required pieces are missing.
    """
    if instruction is None:
        instruction = default_instruction()
    reference_documents = tuple(context or ())
    missing = tuple(
        name
        for name, value in (
            ("comparison_label", analysis.comparison_label),
            ("reference_label", analysis.reference_label),
            ("outcome_label", analysis.outcome_label),
            ("instruction", instruction.strip()),
        )
        if not value
    )
    if missing:
        raise AssemblyError(
            f"cannot assemble prompt; missing: {', '.join(missing)}", missing=missing
        )
    stats_text = statistics_block(analysis)
    context_text = context_block(analysis)
    parts = [instruction.rstrip()]
    for i, doc in enumerate(reference_documents, start=1):
        parts.append(f"REFERENCE DOCUMENT {i}\n{doc.rstrip()}")
    parts.append(f"CONTEXT\n{context_text}")
    parts.append(f"STATISTICS\n{stats_text}")
    prompt = "\n\n".join(parts) + "\n"
    t = analysis.table
    values: list[float] = [
        float(t.a), float(t.b), float(t.c), float(t.d), float(t.n),
        float(analysis.n_comparison), float(analysis.n_reference),
        analysis.alpha, (1 - analysis.alpha) * 100,
        analysis.chi2.statistic, analysis.chi2.p_value, float(analysis.chi2.df),
        analysis.chi2.min_expected_cell,
    ]
    for est in (analysis.odds_ratio, analysis.relative_risk):
        if est:
            values.extend((est.estimate, est.ci_low, est.ci_high, est.se_log))
    if analysis.n_comparison:
        values.append(100.0 * t.a / analysis.n_comparison)
    if analysis.n_reference:
        values.append(100.0 * t.c / analysis.n_reference)
    values.extend(float(count) for _, count in analysis.excluded_counts)
    if analysis.adequacy:
        adq = analysis.adequacy
        for key in ("n_comparison", "n_reference", "balance_ratio"):
            if key in adq:
                values.append(float(adq[key]))
        if "balance_ratio" in adq:
            values.append(100.0 * float(adq["balance_ratio"]))
        total = adq.get("n_comparison", 0) + adq.get("n_reference", 0)
        if total:
            smaller = min(adq.get("n_comparison", 0), adq.get("n_reference", 0))
            values.append(100.0 * smaller / total)
    values.extend(STRUCTURAL_CONSTANTS)
    # Anything displayed in the blocks or reference documents is traceable
    # by construction.
    values.extend(_harvest_numerals(stats_text))
    values.extend(_harvest_numerals(context_text))
    for doc in reference_documents:
        values.extend(_harvest_numerals(doc))
    return PromptBundle(
        instruction=instruction,
        statistics_block=stats_text,
        context_block=context_text,
        reference_documents=reference_documents,
        prompt=prompt,
        prompt_hash=sha256_hex(prompt),
        numeric_values=tuple(values),
        analysis=analysis,
    )


# Guardrails -----------------------------------------------------------------

@dataclass(frozen=True)
class GuardrailViolation:
    rule: str
    detail: str

    def to_json_dict(self) -> dict:
        return {"rule": self.rule, "detail": self.detail}


@dataclass(frozen=True)
class GuardrailResult:
    sections_complete: bool
    numbers_traceable: bool
    attribution_clean: bool
    limitation_disclosed: bool
    violations: tuple[GuardrailViolation, ...]

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_json_dict(self) -> dict:
        return {
            "sections_complete": self.sections_complete,
            "numbers_traceable": self.numbers_traceable,
            "attribution_clean": self.attribution_clean,
            "limitation_disclosed": self.limitation_disclosed,
            "passed": self.passed,
            "violations": [v.to_json_dict() for v in self.violations],
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "GuardrailResult":
        return cls(
            sections_complete=obj["sections_complete"],
            numbers_traceable=obj["numbers_traceable"],
            attribution_clean=obj["attribution_clean"],
            limitation_disclosed=obj["limitation_disclosed"],
            violations=tuple(
                GuardrailViolation(v["rule"], v["detail"]) for v in obj["violations"]
            ),
        )


def _traceable(token: str, values: tuple[float, ...]) -> bool:
    places = len(token.split(".")[1]) if "." in token else 0
    target = float(token)
    for v in values:
        if abs(round(v, places) - target) < 1e-9:
            return True
    return False


LIMITATION_KEYWORDS = (
    "exclud",
    "juvenile",
    "incomplete",
    "unobserved",
    "confound",
    "missing",
    "limitation",
    "observational",
)


def _negated(text: str, start: int) -> bool:
    window = text[max(0, start - _NEGATION_WINDOW):start]
    cut = max(window.rfind("."), window.rfind(";"))
    if cut >= 0:
        window = window[cut + 1:]
    return bool(_NEGATION_RE.search(window))


def _heading_positions(text: str) -> dict[str, int]:
    """Case-insensitive first position of each fixed heading, -1 if absent."""
    lowered = text.lower()
    return {h: lowered.find(h.lower()) for h in SECTION_HEADINGS}


def check_guardrails(
    report,
    bundle: PromptBundle,
    prohibited: tuple[tuple[str, str], ...] | None = None,
) -> GuardrailResult:
    """Run all four checks on a report (or raw text); always returns a result.

    sections_complete: the four fixed headings each appear (case-insensitive)
    and in order. numbers_traceable: every standalone numeral rounds back to
    a bundle value at its displayed precision. attribution_clean: no
    affirmative use of a prohibited framing (negated mentions pass).
    limitation_disclosed: excluded or missing data is acknowledged.
    Deterministic and idempotent.
    """
    text = report.text if isinstance(report, Report) else report
    if prohibited is None:
        prohibited = default_prohibited_framings()
    violations: list[GuardrailViolation] = []

    at = _heading_positions(text)
    missing = [h for h, pos in at.items() if pos < 0]
    positions = [pos for pos in at.values() if pos >= 0]
    sections_complete = not missing and positions == sorted(positions)
    if missing:
        violations.append(
            GuardrailViolation(
                "sections_complete", f"missing section(s): {', '.join(missing)}"
            )
        )
    elif not sections_complete:
        violations.append(
            GuardrailViolation("sections_complete", "sections out of order")
        )

    untraceable = sorted(
        {
            m.group(1)
            for m in NUMERAL_RE.finditer(text)
            if not _traceable(m.group(1), bundle.numeric_values)
        }
    )
    numbers_traceable = not untraceable
    if untraceable:
        violations.append(
            GuardrailViolation(
                "numbers_traceable",
                f"numerals with no source in the bundle: {', '.join(untraceable)}",
            )
        )

    attribution_clean = True
    for name, pattern in prohibited:
        for m in re.finditer(pattern, text, re.IGNORECASE):
            if not _negated(text, m.start()):
                attribution_clean = False
                violations.append(
                    GuardrailViolation(
                        "attribution_clean",
                        f"prohibited framing '{name}': ...{m.group(0)}...",
                    )
                )
                break

    lowered = text.lower()
    limitation_disclosed = any(k in lowered for k in LIMITATION_KEYWORDS)
    if not limitation_disclosed:
        violations.append(
            GuardrailViolation(
                "limitation_disclosed",
                "no limitation or data-constraint language found",
            )
        )
    return GuardrailResult(
        sections_complete=sections_complete,
        numbers_traceable=numbers_traceable,
        attribution_clean=attribution_clean,
        limitation_disclosed=limitation_disclosed,
        violations=tuple(violations),
    )


# Reports --------------------------------------------------------------------

@dataclass(frozen=True)
class Report:
    """Four-section evidence report with provenance and guardrail findings."""

    text: str
    source: str  # "model" | "fallback"
    model: str  # provider model id, or the template version for fallback
    prompt_hash: str
    guardrails: GuardrailResult
    created_at: str

    @property
    def violations(self) -> tuple[GuardrailViolation, ...]:
        return self.guardrails.violations

    @property
    def clean(self) -> bool:
        return self.guardrails.passed

    def sections(self) -> dict[str, str]:
        """Split the text on the fixed headings, case-insensitively."""
        marks = sorted(
            (pos, heading)
            for heading, pos in _heading_positions(self.text).items()
            if pos >= 0
        )
        out: dict[str, str] = {}
        for i, (pos, heading) in enumerate(marks):
            end = marks[i + 1][0] if i + 1 < len(marks) else len(self.text)
            out[heading] = self.text[pos + len(heading):end].strip(" :\n#")
        return out

    def to_json_dict(self) -> dict:
        return {
            "text": self.text,
            "source": self.source,
            "model": self.model,
            "prompt_hash": self.prompt_hash,
            "guardrails": self.guardrails.to_json_dict(),
            "clean": self.clean,
            "created_at": self.created_at,
        }


FALLBACK_TEMPLATE_VERSION = "fallback-template-1"

# Fixed passages every fallback report carries: what the extract leaves out,
# and where causal weight belongs. Both are numeral-free by design.
_DATA_LIMITATION_PASSAGE = (
    "The underlying records come from a public-records extract that excludes "
    "sealed matters and juvenile adjudications by design; the tables describe "
    "sentences as recorded, not the full circumstances of each case, so the "
    "dataset is incomplete in known ways."
)
_SYSTEMIC_ATTRIBUTION_PASSAGE = (
    "Any difference documented here should be read against systemic and "
    "procedural factors, such as charging decisions, plea bargaining, and "
    "sentencing practice, never as a statement about the people in either "
    "group."
)


def _direction_phrase(estimate: float, label_more: str, label_less: str) -> str:
    if estimate > 1.0:
        return f"higher for {label_more} than for {label_less}"
    if estimate < 1.0:
        return f"lower for {label_more} than for {label_less}"
    return f"the same for {label_more} and {label_less}"


def render_fallback(analysis) -> str:
    """Deterministic four-section report straight from the analysis.

    Accepts a BiasAnalysis or a PromptBundle. Total over all agreement
    patterns, adequacy states, and correction states. Display rounding is
    two decimals for effect sizes and the test statistic, four for the
    p-value; every numeral traces back to the analysis.
    """
    a = analysis.analysis if isinstance(analysis, PromptBundle) else analysis
    comp, ref = a.comparison_label, a.reference_label
    level = _fmt3((1 - a.alpha) * 100)

    summary: list[str] = []
    if a.agreement.pattern == "BBB":
        summary.append(
            f"All three statistical methods indicate that the outcome "
            f"'{a.outcome_label}' is associated with group membership when "
            f"comparing {comp} (n = {a.n_comparison}) with {ref} "
            f"(n = {a.n_reference})."
        )
    elif a.agreement.pattern == "NNN":
        summary.append(
            f"No disparity was detected: none of the three statistical "
            f"methods indicates an association between the outcome "
            f"'{a.outcome_label}' and group membership when comparing {comp} "
            f"(n = {a.n_comparison}) with {ref} (n = {a.n_reference})."
        )
    else:
        summary.append(
            f"The three statistical methods do not fully agree for the "
            f"outcome '{a.outcome_label}' when comparing {comp} "
            f"(n = {a.n_comparison}) with {ref} (n = {a.n_reference}): "
            f"{a.agreement.description}."
        )
    if a.odds_ratio:
        summary.append(
            f"The odds of the outcome are "
            f"{_direction_phrase(a.odds_ratio.estimate, comp, ref)}."
        )
    summary.append(_SYSTEMIC_ATTRIBUTION_PASSAGE)

    findings: list[str] = []
    t = a.table
    findings.append(
        f"Of {a.n_comparison} {comp} cases, {t.a} had the outcome and {t.b} "
        f"did not. Of {a.n_reference} {ref} cases, {t.c} had the outcome "
        f"and {t.d} did not."
    )
    for est, name, reason in (
        (a.odds_ratio, "odds ratio", a.or_unavailable),
        (a.relative_risk, "risk ratio", a.rr_unavailable),
    ):
        if est:
            corr = (
                " after a continuity correction of 0.5 per cell"
                if est.correction_applied
                else ""
            )
            excl = "excludes" if est.biased else "includes"
            findings.append(
                f"The {name} is {_fmt(est.estimate, 2)} ({level}% CI "
                f"{_fmt(est.ci_low, 2)} to {_fmt(est.ci_high, 2)}){corr}; "
                f"the interval {excl} 1."
            )
        else:
            findings.append(f"The {name} is unavailable: {reason}.")
    sig = "below" if a.chi2.significant(a.alpha) else "not below"
    findings.append(
        f"The chi-square statistic is {_fmt(a.chi2.statistic, 2)} with a "
        f"p-value of {_fmt(a.chi2.p_value, 4)}, {sig} the significance "
        f"threshold of {_fmt3(a.alpha)}."
    )

    constraints: list[str] = []
    constraints.append(_DATA_LIMITATION_PASSAGE)
    if a.excluded_counts:
        parts = ", ".join(f"{count} by rule '{name}'" for name, count in a.excluded_counts)
        constraints.append(
            f"Further records were excluded by the cohort definition ({parts})."
        )
    if a.adequacy and not a.adequacy.get("adequate", True):
        constraints.append(
            "Advisory adequacy warnings apply to the group sizes: "
            + " ".join(a.adequacy.get("warnings", ()))
        )
    elif a.adequacy:
        constraints.append(
            "Group sizes pass the advisory adequacy check for balance and "
            "minimum size."
        )
    if not a.agreement.aligned:
        constraints.append(
            "Because the methods disagree, conclusions should lean on the "
            "direction and width of the interval estimates rather than any "
            "single significance call."
        )
    constraints.append(
        "Unobserved factors, including charging decisions, plea bargaining, "
        "and counsel quality, could account for part or all of any observed "
        "difference."
    )

    terms: list[str] = []
    terms.append(
        f"Odds ratio: the odds of the outcome in the {comp} group divided "
        f"by the odds in the {ref} group; 1 means identical odds."
    )
    terms.append(
        f"Risk ratio: the share of {comp} cases with the outcome divided by "
        f"the share of {ref} cases with the outcome; 1 means identical risk."
    )
    terms.append(
        "Chi-square: a test of whether the outcome and group are "
        "independent; a p-value below the significance threshold counts as "
        "evidence against independence, and a p-value at or above it does "
        "not."
    )
    terms.append(
        f"Confidence intervals are {level}% two-sided log-method intervals; "
        f"the significance threshold is {_fmt3(a.alpha)}."
    )
    if any(
        e and e.correction_applied for e in (a.odds_ratio, a.relative_risk)
    ):
        terms.append(
            "Continuity correction: 0.5 added to every cell so a ratio "
            "remains defined when a cell is zero; the chi-square statistic "
            "is always computed on the raw cells."
        )

    def _section(heading: str, paragraphs: list[str]) -> str:
        return f"{heading}\n\n" + "\n\n".join(paragraphs)

    return "\n\n".join(
        (
            _section(SECTION_HEADINGS[0], summary),
            _section(SECTION_HEADINGS[1], findings),
            _section(SECTION_HEADINGS[2], constraints),
            _section(SECTION_HEADINGS[3], terms),
        )
    )


def synthesize_report(
    bundle: PromptBundle,
    client: LlmClient | None = None,
    prohibited: tuple[tuple[str, str], ...] | None = None,
) -> Report:
    """Produce a report from the bundle and attach guardrail findings.

    With no client the deterministic fallback is rendered. With a client,
    the bundle prompt is sent once and the response must parse into the
    four sections (headings matched case-insensitively); anything else is a
    StructureError carrying the raw text for audit. Transport errors
    propagate as themselves.
    """
    if client is None:
        text = render_fallback(bundle.analysis)
        model = FALLBACK_TEMPLATE_VERSION
        source = "fallback"
    else:
        response = client.complete(CompletionRequest(prompt=bundle.prompt))
        text = response.text.strip()
        if not text:
            raise StructureError(
                "model returned an empty report", raw_text=response.text
            )
        missing = [h for h, pos in _heading_positions(text).items() if pos < 0]
        if missing:
            raise StructureError(
                f"model response lacks section(s): {', '.join(missing)}",
                raw_text=text,
            )
        model = response.model
        source = "model"
    guardrails = check_guardrails(text, bundle, prohibited)
    return Report(
        text=text,
        source=source,
        model=model,
        prompt_hash=bundle.prompt_hash,
        guardrails=guardrails,
        created_at=now_iso(),
    )
