"""2x2 effect-size estimation and association testing.

All math runs on a standard 2x2 contingency table laid out as

              event     no event
  comparison    a          b
  reference     c          d

Implemented measures:

* Odds ratio OR = (a*d)/(b*c), CI via the Woolf log method with
  SE(ln OR) = sqrt(1/a + 1/b + 1/c + 1/d).
* Risk ratio RR = (a/(a+b)) / (c/(c+d)), CI via the Katz log method with
  SE(ln RR) = sqrt(1/a - 1/(a+b) + 1/c - 1/(c+d)).
* Pearson chi-square (uncorrected, df=1)
  X2 = N*(ad - bc)^2 / ((a+b)(c+d)(a+c)(b+d)), with the df=1 survival
  function p = erfc(sqrt(X2/2)).

Zero handling: a zero margin makes the table degenerate (two empty cells in
a line; nothing to compare) and raises. A single zero cell makes the ratio
estimates undefined on raw cells; when the continuity policy is enabled,
0.5 is added to all four cells for the estimate and its CI only. The
chi-square statistic is always computed on raw cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConfigurationError, DegenerateTableError, UndefinedEstimateError

DEFAULT_ALPHA = 0.05

# Two-sided normal quantile pinned at the conventional level so published
# intervals reproduce bit-for-bit; other levels go through erfcinv.
Z_AT_DEFAULT_ALPHA = 1.959964


def normal_quantile(alpha: float) -> float:
    """Two-sided z for a (1 - alpha) confidence interval."""
    if not (0.0 < alpha < 1.0):
        raise ConfigurationError(f"alpha must be in (0, 1), got {alpha!r}")
    if alpha == DEFAULT_ALPHA:
        return Z_AT_DEFAULT_ALPHA
    from scipy.special import erfcinv

    return float(math.sqrt(2.0) * erfcinv(alpha))


@dataclass(frozen=True)
class ContingencyTable:
    """Non-negative integer cell counts (a, b, c, d)."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        for name in ("a", "b", "c", "d"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool):
                raise DegenerateTableError(
                    f"cell {name} must be an integer, got {v!r}", cells=self.cells
                )
            if v < 0:
                raise DegenerateTableError(
                    f"cell {name} must be non-negative, got {v}", cells=self.cells
                )

    @property
    def cells(self) -> tuple[int, int, int, int]:
        return (self.a, self.b, self.c, self.d)

    @property
    def n(self) -> int:
        return self.a + self.b + self.c + self.d

    @property
    def margins(self) -> tuple[int, int, int, int]:
        """(row1, row2, col1, col2) totals."""
        return (self.a + self.b, self.c + self.d, self.a + self.c, self.b + self.d)

    def has_zero_cell(self) -> bool:
        return 0 in self.cells

    def has_zero_margin(self) -> bool:
        return 0 in self.margins

    def corrected(self) -> tuple[float, float, float, float]:
        """Haldane-Anscombe cells: 0.5 added to all four."""
        return (self.a + 0.5, self.b + 0.5, self.c + 0.5, self.d + 0.5)

    def to_json_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "c": self.c, "d": self.d}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ContingencyTable":
        return cls(a=obj["a"], b=obj["b"], c=obj["c"], d=obj["d"])


def contingency_table(a: int, b: int, c: int, d: int) -> ContingencyTable:
    return ContingencyTable(a, b, c, d)


@dataclass(frozen=True)
class EffectEstimate:
    """Point estimate with a two-sided log-method confidence interval."""

    kind: str  # "odds_ratio" | "relative_risk"
    estimate: float
    ci_low: float
    ci_high: float
    se_log: float
    alpha: float
    correction_applied: bool

    @property
    def biased(self) -> bool:
        """True when the interval excludes 1 (an association is indicated)."""
        return self.ci_low > 1.0 or self.ci_high < 1.0

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "estimate": self.estimate,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "se_log": self.se_log,
            "alpha": self.alpha,
            "correction_applied": self.correction_applied,
            "biased": self.biased,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "EffectEstimate":
        return cls(
            kind=obj["kind"],
            estimate=obj["estimate"],
            ci_low=obj["ci_low"],
            ci_high=obj["ci_high"],
            se_log=obj["se_log"],
            alpha=obj["alpha"],
            correction_applied=obj["correction_applied"],
        )


def _require_margins(table: ContingencyTable, measure: str) -> None:
    row1, row2, col1, col2 = table.margins
    if row1 == 0:
        raise UndefinedEstimateError(
            f"{measure} undefined: the comparison group is empty",
            cells=table.cells,
            reason="empty comparison group",
        )
    if row2 == 0:
        raise UndefinedEstimateError(
            f"{measure} undefined: the reference group is empty",
            cells=table.cells,
            reason="empty reference group",
        )
    if col1 == 0:
        raise UndefinedEstimateError(
            f"{measure} undefined: no events in either group",
            cells=table.cells,
            reason="no events in either group",
        )


def odds_ratio(
    table: ContingencyTable,
    alpha: float = DEFAULT_ALPHA,
    zero_cell_correction: bool = True,
) -> EffectEstimate:
    """Odds ratio with a Woolf log-method interval.

    Zero margins are refused outright. A single zero cell is refused when
    the continuity policy is off; with it on, 0.5 goes onto every cell and
    the result is flagged ``correction_applied``.
    """
    _require_margins(table, "odds ratio")
    if table.b + table.d == 0:
        raise UndefinedEstimateError(
            "odds ratio undefined: every case has the event",
            cells=table.cells,
            reason="every case has the event",
        )
    corrected = False
    if table.has_zero_cell():
        if not zero_cell_correction:
            raise UndefinedEstimateError(
                "odds ratio undefined on a zero cell and the continuity "
                "correction is disabled",
                cells=table.cells,
                reason="zero cell with correction disabled",
            )
        a, b, c, d = table.corrected()
        corrected = True
    else:
        a, b, c, d = (float(v) for v in table.cells)
    estimate = (a * d) / (b * c)
    se = math.sqrt(1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d)
    z = normal_quantile(alpha)
    log_est = math.log(estimate)
    return EffectEstimate(
        kind="odds_ratio",
        estimate=estimate,
        ci_low=math.exp(log_est - z * se),
        ci_high=math.exp(log_est + z * se),
        se_log=se,
        alpha=alpha,
        correction_applied=corrected,
    )


def relative_risk(
    table: ContingencyTable,
    alpha: float = DEFAULT_ALPHA,
    zero_cell_correction: bool = True,
) -> EffectEstimate:
    """Risk ratio with a Katz log-method interval.

    Only the event cells (a, c) can break the ratio; empty no-event cells
    leave it defined (both risks 1 gives RR exactly 1). The continuity
    policy behaves as for the odds ratio.
    """
    _require_margins(table, "risk ratio")
    corrected = False
    if table.a == 0 or table.c == 0:
        if not zero_cell_correction:
            side = "comparison" if table.a == 0 else "reference"
            raise UndefinedEstimateError(
                f"risk ratio undefined: zero {side} events and the continuity "
                "correction is disabled",
                cells=table.cells,
                reason=f"zero {side} events",
            )
        a, b, c, d = table.corrected()
        corrected = True
    else:
        a, b, c, d = (float(v) for v in table.cells)
    risk_comparison = a / (a + b)
    risk_reference = c / (c + d)
    estimate = risk_comparison / risk_reference
    se = math.sqrt(1.0 / a - 1.0 / (a + b) + 1.0 / c - 1.0 / (c + d))
    z = normal_quantile(alpha)
    log_est = math.log(estimate)
    return EffectEstimate(
        kind="relative_risk",
        estimate=estimate,
        ci_low=math.exp(log_est - z * se),
        ci_high=math.exp(log_est + z * se),
        se_log=se,
        alpha=alpha,
        correction_applied=corrected,
    )


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    p_value: float
    df: int = 1
    min_expected_cell: float = 0.0

    def significant(self, alpha: float = DEFAULT_ALPHA) -> bool:
        return self.p_value < alpha

    def to_json_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "df": self.df,
            "min_expected_cell": self.min_expected_cell,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ChiSquareResult":
        return cls(
            statistic=obj["statistic"],
            p_value=obj["p_value"],
            df=obj.get("df", 1),
            min_expected_cell=obj.get("min_expected_cell", 0.0),
        )


def chi_square_p_value(statistic: float) -> float:
    """Survival function of chi-square with one degree of freedom.

    For df=1 the statistic is a squared standard normal, so
    P(X2 >= x) = erfc(sqrt(x/2)) exactly.
    """
    if statistic < 0:
        raise ConfigurationError(f"chi-square statistic must be >= 0, got {statistic!r}")
    return math.erfc(math.sqrt(statistic / 2.0))


def chi_square(table: ContingencyTable) -> ChiSquareResult:
    """Uncorrected Pearson chi-square on the raw cells (never corrected)."""
    if table.has_zero_margin():
        raise DegenerateTableError(
            f"chi-square undefined on a zero margin: cells {table.cells}",
            cells=table.cells,
        )
    a, b, c, d = (float(v) for v in table.cells)
    n = a + b + c + d
    num = n * (a * d - b * c) ** 2
    den = (a + b) * (c + d) * (a + c) * (b + d)
    statistic = num / den
    row1, row2, col1, col2 = (float(m) for m in table.margins)
    min_expected = min(
        row * col / n for row in (row1, row2) for col in (col1, col2)
    )
    return ChiSquareResult(
        statistic=statistic,
        p_value=chi_square_p_value(statistic),
        min_expected_cell=min_expected,
    )


# Method agreement -----------------------------------------------------------

# Letter order: odds ratio, risk ratio, chi-square. B = indicates an
# association, N = does not, U = estimate unavailable for this table.
AGREEMENT_DESCRIPTIONS = {
    "BBB": "all three methods indicate an association",
    "NNN": "no method indicates an association",
    "BBN": "both interval estimates exclude 1 but the test is not significant",
    "NNB": "the test is significant but neither interval excludes 1",
    "BNB": "odds ratio and test indicate an association; the risk ratio interval includes 1",
    "NBN": "only the risk ratio interval excludes 1",
    "NBB": "risk ratio and test indicate an association; the odds ratio interval includes 1",
    "BNN": "only the odds ratio interval excludes 1",
}


@dataclass(frozen=True)
class MethodAgreement:
    """Cross-method alignment summary.

    ``pattern`` is a three-letter string over {B, N, U} in the order odds
    ratio, risk ratio, chi-square. ``aligned`` is True when every available
    method reaches the same call.
    """

    pattern: str
    aligned: bool
    description: str

    @classmethod
    def from_calls(
        cls,
        or_biased: bool | None,
        rr_biased: bool | None,
        chi_biased: bool | None,
    ) -> "MethodAgreement":
        letters = "".join(
            "U" if call is None else ("B" if call else "N")
            for call in (or_biased, rr_biased, chi_biased)
        )
        available = [c for c in letters if c != "U"]
        aligned = len(set(available)) <= 1
        description = AGREEMENT_DESCRIPTIONS.get(letters)
        if description is None:
            if not available:
                description = "no method produced a usable call"
            else:
                description = (
                    f"{letters.count('U')} method(s) unavailable; available "
                    f"methods {'agree' if aligned else 'disagree'}"
                )
        return cls(pattern=letters, aligned=aligned, description=description)

    def to_json_dict(self) -> dict:
        return {
            "pattern": self.pattern,
            "aligned": self.aligned,
            "description": self.description,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "MethodAgreement":
        return cls(
            pattern=obj["pattern"],
            aligned=obj["aligned"],
            description=obj["description"],
        )


# Template space -------------------------------------------------------------

@dataclass(frozen=True)
class TemplateSpace:
    """Size accounting for the binary reporting-template family.

    Each method contributes a count of binary presentation dimensions;
    every on/off assignment over all dimensions is a combined template
    (2 ** sum). Alignment templates cover agree/disagree per method
    (2 ** count of methods). The full space is their product. No methods
    at all collapses everything to 1.
    """

    methods: tuple[tuple[str, int], ...]

    def __post_init__(self):
        for name, d in self.methods:
            if not isinstance(d, int) or isinstance(d, bool) or d < 0:
                raise ConfigurationError(
                    f"dimension count for {name!r} must be an int >= 0, got {d!r}"
                )

    @property
    def combined(self) -> int:
        return 2 ** sum(d for _, d in self.methods)

    @property
    def alignment(self) -> int:
        return 2 ** len(self.methods)

    @property
    def total(self) -> int:
        return self.combined * self.alignment

    def to_json_dict(self) -> dict:
        return {
            "methods": [[name, d] for name, d in self.methods],
            "combined": self.combined,
            "alignment": self.alignment,
            "total": self.total,
        }


def template_space_size(methods) -> TemplateSpace:
    """Accepts (name, dimension count) pairs, or bare dimension counts."""
    normalized: list[tuple[str, int]] = []
    for i, entry in enumerate(methods):
        if isinstance(entry, int) and not isinstance(entry, bool):
            normalized.append((f"method_{i + 1}", entry))
        else:
            name, d = entry
            normalized.append((str(name), d))
    return TemplateSpace(methods=tuple(normalized))


# Full analysis --------------------------------------------------------------

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class BiasAnalysis:
    """Complete analysis artifact for one table and outcome.

    The chi-square result is always present (a degenerate table fails the
    whole analysis). Either ratio estimate may instead carry an
    unavailability reason, which downstream reports must disclose.
    """

    table: ContingencyTable
    chi2: ChiSquareResult
    agreement: MethodAgreement
    alpha: float
    zero_cell_correction: bool
    comparison_label: str
    reference_label: str
    outcome_label: str
    odds_ratio: EffectEstimate | None = None
    or_unavailable: str | None = None
    relative_risk: EffectEstimate | None = None
    rr_unavailable: str | None = None
    adequacy: dict | None = None
    excluded_counts: tuple[tuple[str, int], ...] = ()
    created_at: str = ""
    schema_version: int = SCHEMA_VERSION

    @property
    def n_comparison(self) -> int:
        return self.table.a + self.table.b

    @property
    def n_reference(self) -> int:
        return self.table.c + self.table.d

    def to_json_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "table": self.table.to_json_dict(),
            "comparison_label": self.comparison_label,
            "reference_label": self.reference_label,
            "outcome_label": self.outcome_label,
            "alpha": self.alpha,
            "zero_cell_correction": self.zero_cell_correction,
            "odds_ratio": self.odds_ratio.to_json_dict() if self.odds_ratio else None,
            "or_unavailable": self.or_unavailable,
            "relative_risk": (
                self.relative_risk.to_json_dict() if self.relative_risk else None
            ),
            "rr_unavailable": self.rr_unavailable,
            "chi_square": self.chi2.to_json_dict(),
            "agreement": self.agreement.to_json_dict(),
            "adequacy": self.adequacy,
            "excluded_counts": {k: v for k, v in self.excluded_counts},
            "created_at": self.created_at,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "BiasAnalysis":
        version = obj.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ConfigurationError(
                f"unsupported analysis schema_version {version!r} "
                f"(expected {SCHEMA_VERSION})"
            )
        return cls(
            table=ContingencyTable.from_json_dict(obj["table"]),
            chi2=ChiSquareResult.from_json_dict(obj["chi_square"]),
            agreement=MethodAgreement.from_json_dict(obj["agreement"]),
            alpha=obj["alpha"],
            zero_cell_correction=obj["zero_cell_correction"],
            comparison_label=obj["comparison_label"],
            reference_label=obj["reference_label"],
            outcome_label=obj["outcome_label"],
            odds_ratio=(
                EffectEstimate.from_json_dict(obj["odds_ratio"])
                if obj.get("odds_ratio")
                else None
            ),
            or_unavailable=obj.get("or_unavailable"),
            relative_risk=(
                EffectEstimate.from_json_dict(obj["relative_risk"])
                if obj.get("relative_risk")
                else None
            ),
            rr_unavailable=obj.get("rr_unavailable"),
            adequacy=obj.get("adequacy"),
            excluded_counts=tuple(sorted(obj.get("excluded_counts", {}).items())),
            created_at=obj.get("created_at", ""),
            schema_version=version,
        )


def run_analysis(
    table: ContingencyTable,
    *,
    comparison_label: str = "comparison",
    reference_label: str = "reference",
    outcome_label: str = "outcome",
    alpha: float = DEFAULT_ALPHA,
    zero_cell_correction: bool = True,
    adequacy: dict | None = None,
    excluded_counts: tuple[tuple[str, int], ...] = (),
    created_at: str | None = None,
) -> BiasAnalysis:
    """Run all three methods on one table and summarize their agreement.

    A degenerate table (zero margin) propagates as an error. An undefined
    ratio estimate is downgraded to an unavailability reason so the rest of
    the analysis still lands.
    """
    from .util import now_iso

    chi2 = chi_square(table)

    or_est: EffectEstimate | None = None
    or_reason: str | None = None
    try:
        or_est = odds_ratio(table, alpha=alpha, zero_cell_correction=zero_cell_correction)
    except UndefinedEstimateError as exc:
        or_reason = exc.reason

    rr_est: EffectEstimate | None = None
    rr_reason: str | None = None
    try:
        rr_est = relative_risk(
            table, alpha=alpha, zero_cell_correction=zero_cell_correction
        )
    except UndefinedEstimateError as exc:
        rr_reason = exc.reason

    agreement = MethodAgreement.from_calls(
        or_est.biased if or_est else None,
        rr_est.biased if rr_est else None,
        chi2.significant(alpha),
    )
    return BiasAnalysis(
        table=table,
        chi2=chi2,
        agreement=agreement,
        alpha=alpha,
        zero_cell_correction=zero_cell_correction,
        comparison_label=comparison_label,
        reference_label=reference_label,
        outcome_label=outcome_label,
        odds_ratio=or_est,
        or_unavailable=or_reason,
        relative_risk=rr_est,
        rr_unavailable=rr_reason,
        adequacy=adequacy,
        excluded_counts=tuple(excluded_counts),
        created_at=created_at if created_at is not None else now_iso(),
    )


def analyze_pair(
    store,
    pair,
    outcome,
    *,
    alpha: float = DEFAULT_ALPHA,
    zero_cell_correction: bool = True,
    excluded_counts: tuple[tuple[str, int], ...] = (),
    created_at: str | None = None,
) -> BiasAnalysis:
    """Cross-tabulate a group pair against an outcome and analyze it.

    Convenience entry for the cohort pipeline: counts the 2x2 cells,
    attaches the pair's adequacy result, and runs all three methods.
    """
    from .query import outcome_counts

    a, b, c, d = outcome_counts(store, pair, outcome)
    return run_analysis(
        ContingencyTable(a, b, c, d),
        comparison_label=pair.comparison_label,
        reference_label=pair.reference_label,
        outcome_label=outcome.label,
        alpha=alpha,
        zero_cell_correction=zero_cell_correction,
        adequacy=pair.adequacy().to_json_dict(),
        excluded_counts=excluded_counts,
        created_at=created_at,
    )
