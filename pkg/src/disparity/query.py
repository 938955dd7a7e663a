"""Cohort construction: filter queries, code expressions, and group splits.

A cohort is the set of people whose records satisfy a filter query built
from structured fields (county, sentence types, date window) plus a boolean
expression over penal codes ("PC12022 AND (PC211 OR PC212)"). Cohorts are
then split into a comparison/reference group pair by ethnicity, checked for
adequacy, and cross-tabulated against an outcome.

Expressions exist in three interchangeable forms: an immutable node tree,
a JSON object grammar, and a text grammar with precedence NOT > AND > OR.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import date
from typing import Iterable

from .errors import DegenerateGroupError, PredicateError, QueryError
from .records import JoinedPerson, RecordStore, canonical_sentence_type
from .util import parse_date

MIN_GROUP_SIZE = 15
MIN_MINORITY_SHARE = 0.40


# Expression tree ------------------------------------------------------------

class Expr:
    """Boolean expression over the penal codes attached to a person."""

    def matches(self, codes: frozenset[str]) -> bool:
        raise NotImplementedError

    def to_json_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Code(Expr):
    code: str

    def __post_init__(self):
        object.__setattr__(self, "code", self.code.strip().upper())
        if not self.code:
            raise PredicateError("empty code in expression")

    def matches(self, codes: frozenset[str]) -> bool:
        return self.code in codes

    def to_json_dict(self) -> dict:
        return {"code": self.code}


@dataclass(frozen=True)
class And(Expr):
    operands: tuple[Expr, ...]

    def __post_init__(self):
        if len(self.operands) < 2:
            raise PredicateError("'and' needs at least two operands")

    def matches(self, codes: frozenset[str]) -> bool:
        return all(op.matches(codes) for op in self.operands)

    def to_json_dict(self) -> dict:
        return {"and": [op.to_json_dict() for op in self.operands]}


@dataclass(frozen=True)
class Or(Expr):
    operands: tuple[Expr, ...]

    def __post_init__(self):
        if len(self.operands) < 2:
            raise PredicateError("'or' needs at least two operands")

    def matches(self, codes: frozenset[str]) -> bool:
        return any(op.matches(codes) for op in self.operands)

    def to_json_dict(self) -> dict:
        return {"or": [op.to_json_dict() for op in self.operands]}


@dataclass(frozen=True)
class Not(Expr):
    operand: Expr

    def matches(self, codes: frozenset[str]) -> bool:
        return not self.operand.matches(codes)

    def to_json_dict(self) -> dict:
        return {"not": self.operand.to_json_dict()}


def expr_from_json_dict(obj) -> Expr:
    """Parse the JSON object grammar: {"code"}, {"and"}, {"or"}, {"not"}."""
    if not isinstance(obj, dict) or len(obj) != 1:
        raise PredicateError(f"expression node must be a single-key object, got {obj!r}")
    key, value = next(iter(obj.items()))
    if key == "code":
        if not isinstance(value, str):
            raise PredicateError(f"'code' wants a string, got {value!r}")
        return Code(value)
    if key in ("and", "or"):
        if not isinstance(value, list):
            raise PredicateError(f"'{key}' wants a list, got {value!r}")
        operands = tuple(expr_from_json_dict(v) for v in value)
        return And(operands) if key == "and" else Or(operands)
    if key == "not":
        return Not(expr_from_json_dict(value))
    raise PredicateError(f"unknown expression operator {key!r}")


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<lparen>\()|(?P<rparen>\))|(?P<word>[A-Za-z][A-Za-z0-9.\-]*))"
)


def parse_expr(text: str) -> Expr:
    """Parse the text grammar, e.g. 'PC12022 AND (PC211 OR PC212)'.

    Keywords AND/OR/NOT are case-insensitive; anything else alphanumeric is
    a code token. Precedence NOT > AND > OR, parentheses group.
    """
    tokens: list[str] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            if text[pos:].strip():
                raise QueryError(f"unexpected character at {pos}: {text[pos:].strip()[:10]!r}")
            break
        pos = m.end()
        tokens.append(m.group("lparen") or m.group("rparen") or m.group("word"))
    if not tokens:
        raise QueryError("empty expression")

    idx = 0

    def peek() -> str | None:
        return tokens[idx] if idx < len(tokens) else None

    def take() -> str:
        nonlocal idx
        tok = tokens[idx]
        idx += 1
        return tok

    def parse_or() -> Expr:
        operands = [parse_and()]
        while peek() is not None and peek().upper() == "OR":
            take()
            operands.append(parse_and())
        return operands[0] if len(operands) == 1 else Or(tuple(operands))

    def parse_and() -> Expr:
        operands = [parse_not()]
        while peek() is not None and peek().upper() == "AND":
            take()
            operands.append(parse_not())
        return operands[0] if len(operands) == 1 else And(tuple(operands))

    def parse_not() -> Expr:
        if peek() is not None and peek().upper() == "NOT":
            take()
            return Not(parse_not())
        return parse_atom()

    def parse_atom() -> Expr:
        tok = peek()
        if tok is None:
            raise QueryError("expression ended unexpectedly")
        if tok == "(":
            take()
            inner = parse_or()
            if peek() != ")":
                raise QueryError("missing closing parenthesis")
            take()
            return inner
        if tok == ")":
            raise QueryError("unbalanced closing parenthesis")
        if tok.upper() in ("AND", "OR", "NOT"):
            raise QueryError(f"operator {tok!r} where a code was expected")
        return Code(take())

    result = parse_or()
    if idx != len(tokens):
        raise QueryError(f"trailing tokens after expression: {tokens[idx:]!r}")
    return result


# Filter queries -------------------------------------------------------------

@dataclass(frozen=True)
class ExclusionRule:
    """Named rule removing people from a cohort after the filter matches.

    kind 'prior_code': excludes anyone whose prior commitments carry the
    code. kind 'missing_field': excludes anyone whose named demographics
    field is empty/absent. Every application is counted so reports can
    disclose what was dropped.
    """

    name: str
    kind: str
    value: str

    _KINDS = ("prior_code", "missing_field")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise QueryError(f"unknown exclusion kind {self.kind!r}")
        if not self.name:
            raise QueryError("exclusion rule needs a name")
        if not self.value:
            raise QueryError(f"exclusion rule {self.name!r} needs a value")

    def excludes(self, person: JoinedPerson) -> bool:
        if self.kind == "prior_code":
            return self.value.upper() in person.prior_codes()
        fieldname = self.value
        value = getattr(person.demographics, fieldname, None)
        if value is None and fieldname not in (
            "offense_date", "parole_eligibility",
        ):
            raise QueryError(f"exclusion rule {self.name!r}: unknown field {fieldname!r}")
        return value in (None, "")

    def to_json_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "value": self.value}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ExclusionRule":
        try:
            return cls(name=obj["name"], kind=obj["kind"], value=obj["value"])
        except KeyError as exc:
            raise QueryError(f"exclusion rule missing key {exc.args[0]!r}")


@dataclass(frozen=True)
class FilterQuery:
    """Declarative cohort filter over the joined store.

    All present fields must match (conjunction). The code expression runs
    against each person's current commitment codes (offense plus
    enhancements). Exclusions apply after the match and are tallied.
    """

    county: str | None = None
    code_expr: Expr | None = None
    sentence_types: tuple[str, ...] = ()
    offense_after: date | None = None
    offense_before: date | None = None
    require_prior_record: bool | None = None
    exclusions: tuple[ExclusionRule, ...] = ()

    def __post_init__(self):
        canon = tuple(canonical_sentence_type(s) for s in self.sentence_types)
        object.__setattr__(self, "sentence_types", canon)
        if (
            self.offense_after
            and self.offense_before
            and self.offense_after > self.offense_before
        ):
            raise QueryError("offense_after is later than offense_before")

    def matches(self, person: JoinedPerson) -> bool:
        demo = person.demographics
        if self.county is not None and demo.sentencing_county != self.county:
            return False
        if self.sentence_types and demo.sentence_type not in self.sentence_types:
            return False
        if self.offense_after is not None:
            if demo.offense_date is None or demo.offense_date < self.offense_after:
                return False
        if self.offense_before is not None:
            if demo.offense_date is None or demo.offense_date > self.offense_before:
                return False
        if self.require_prior_record is not None:
            if bool(person.prior) != self.require_prior_record:
                return False
        if self.code_expr is not None and not self.code_expr.matches(
            person.current_codes()
        ):
            return False
        return True

    def to_json_dict(self) -> dict:
        out: dict = {}
        if self.county is not None:
            out["county"] = self.county
        if self.code_expr is not None:
            out["code_expr"] = self.code_expr.to_json_dict()
        if self.sentence_types:
            out["sentence_types"] = list(self.sentence_types)
        if self.offense_after is not None:
            out["offense_after"] = self.offense_after.isoformat()
        if self.offense_before is not None:
            out["offense_before"] = self.offense_before.isoformat()
        if self.require_prior_record is not None:
            out["require_prior_record"] = self.require_prior_record
        if self.exclusions:
            out["exclusions"] = [e.to_json_dict() for e in self.exclusions]
        return out

    @classmethod
    def from_json_dict(cls, obj: dict) -> "FilterQuery":
        if not isinstance(obj, dict):
            raise QueryError(f"filter query must be an object, got {obj!r}")
        unknown = set(obj) - {
            "county", "code_expr", "sentence_types", "offense_after",
            "offense_before", "require_prior_record", "exclusions",
        }
        if unknown:
            raise QueryError(f"unknown filter fields: {sorted(unknown)!r}")
        code_expr = obj.get("code_expr")
        if isinstance(code_expr, str):
            code_expr = parse_expr(code_expr)
        elif code_expr is not None:
            code_expr = expr_from_json_dict(code_expr)
        after = obj.get("offense_after")
        before = obj.get("offense_before")
        try:
            return cls(
                county=obj.get("county"),
                code_expr=code_expr,
                sentence_types=tuple(obj.get("sentence_types", ())),
                offense_after=parse_date(after) if after else None,
                offense_before=parse_date(before) if before else None,
                require_prior_record=obj.get("require_prior_record"),
                exclusions=tuple(
                    ExclusionRule.from_json_dict(e) for e in obj.get("exclusions", ())
                ),
            )
        except ValueError as exc:
            raise QueryError(str(exc))


# Outcomes -------------------------------------------------------------------

@dataclass(frozen=True)
class Outcome:
    """Binary event tested per person, e.g. receiving a third-strike sentence.

    kind 'sentence_type': true when the person's controlling sentence type
    equals the value (spelling-tolerant). kind 'code': true when the value
    appears among current commitment codes.
    """

    kind: str
    value: str
    label: str = ""

    _KINDS = ("sentence_type", "code")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise QueryError(f"unknown outcome kind {self.kind!r}")
        if self.kind == "sentence_type":
            object.__setattr__(self, "value", canonical_sentence_type(self.value))
        else:
            object.__setattr__(self, "value", self.value.strip().upper())
        if not self.label:
            object.__setattr__(self, "label", f"{self.kind}={self.value}")

    def occurs(self, person: JoinedPerson) -> bool:
        if self.kind == "sentence_type":
            return person.demographics.sentence_type == self.value
        return self.value in person.current_codes()

    def to_json_dict(self) -> dict:
        return {"kind": self.kind, "value": self.value, "label": self.label}


def parse_outcome(obj) -> Outcome:
    """Accept an object form, a 'kind=value' string, or a bare sentence type."""
    if isinstance(obj, str):
        kind, sep, value = obj.partition("=")
        try:
            if sep:
                return Outcome(kind=kind.strip(), value=value.strip())
            return Outcome(kind="sentence_type", value=obj)
        except ValueError as exc:
            raise QueryError(str(exc))
    if isinstance(obj, dict):
        try:
            return Outcome(
                kind=obj.get("kind", "sentence_type"),
                value=obj["value"],
                label=obj.get("label", ""),
            )
        except KeyError:
            raise QueryError("outcome object needs a 'value'")
        except ValueError as exc:
            raise QueryError(str(exc))
    raise QueryError(f"cannot parse outcome from {obj!r}")


# Cohorts and group pairs ----------------------------------------------------

@dataclass(frozen=True)
class Cohort:
    """Filter result: sorted member ids plus per-rule exclusion tallies."""

    hashed_ids: tuple[str, ...]
    query: FilterQuery
    excluded_counts: tuple[tuple[str, int], ...] = ()

    def __len__(self) -> int:
        return len(self.hashed_ids)

    def to_json_dict(self) -> dict:
        return {
            "hashed_ids": list(self.hashed_ids),
            "query": self.query.to_json_dict(),
            "excluded_counts": {k: v for k, v in self.excluded_counts},
            "size": len(self.hashed_ids),
        }


def apply_filter(store: RecordStore, query: FilterQuery) -> Cohort:
    """Evaluate a filter over every person; deterministic sorted output."""
    matched: list[str] = []
    excluded = {rule.name: 0 for rule in query.exclusions}
    for hid in store.ids():
        person = store.person(hid)
        if not query.matches(person):
            continue
        dropped = False
        for rule in query.exclusions:
            if rule.excludes(person):
                excluded[rule.name] += 1
                dropped = True
                break
        if not dropped:
            matched.append(hid)
    return Cohort(
        hashed_ids=tuple(matched),
        query=query,
        excluded_counts=tuple(excluded.items()),
    )


@dataclass(frozen=True)
class AdequacyReport:
    """Advisory sample-size check; never blocks an analysis."""

    adequate: bool
    n_comparison: int
    n_reference: int
    balance_ratio: float
    warnings: tuple[str, ...]

    def to_json_dict(self) -> dict:
        return {
            "adequate": self.adequate,
            "n_comparison": self.n_comparison,
            "n_reference": self.n_reference,
            "balance_ratio": round(self.balance_ratio, 6),
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True)
class GroupPair:
    """Comparison/reference split of a cohort by ethnicity."""

    comparison_label: str
    reference_label: str
    comparison_ids: tuple[str, ...]
    reference_ids: tuple[str, ...]

    @property
    def n_comparison(self) -> int:
        return len(self.comparison_ids)

    @property
    def n_reference(self) -> int:
        return len(self.reference_ids)

    def adequacy(self) -> AdequacyReport:
        """Advisory group-size check.

        Adequate when both groups have at least MIN_GROUP_SIZE members and
        the smaller group holds at least MIN_MINORITY_SHARE of the pair.
        """
        n_c, n_r = self.n_comparison, self.n_reference
        total = n_c + n_r
        smaller, larger = min(n_c, n_r), max(n_c, n_r)
        balance = (smaller / larger) if larger else 0.0
        warnings: list[str] = []
        if n_c < MIN_GROUP_SIZE:
            warnings.append(
                f"comparison group has {n_c} members, below the "
                f"{MIN_GROUP_SIZE}-case floor"
            )
        if n_r < MIN_GROUP_SIZE:
            warnings.append(
                f"reference group has {n_r} members, below the "
                f"{MIN_GROUP_SIZE}-case floor"
            )
        share = (smaller / total) if total else 0.0
        if total and share < MIN_MINORITY_SHARE:
            warnings.append(
                f"smaller group holds {share:.0%} of the pair, below the "
                f"{MIN_MINORITY_SHARE:.0%} balance floor"
            )
        return AdequacyReport(
            adequate=not warnings,
            n_comparison=n_c,
            n_reference=n_r,
            balance_ratio=balance,
            warnings=tuple(warnings),
        )

    def to_json_dict(self) -> dict:
        return {
            "comparison_label": self.comparison_label,
            "reference_label": self.reference_label,
            "comparison_ids": list(self.comparison_ids),
            "reference_ids": list(self.reference_ids),
            "adequacy": self.adequacy().to_json_dict(),
        }


def split_by_ethnicity(
    store: RecordStore,
    cohort: Cohort | Iterable[str],
    comparison: str,
    reference: str,
) -> GroupPair:
    """Split a cohort into groups by demographics ethnicity.

    Raises DegenerateGroupError when either side is empty: a pair with an
    empty group cannot support any downstream estimate.
    """
    if comparison == reference:
        raise QueryError("comparison and reference ethnicity must differ")
    ids = cohort.hashed_ids if isinstance(cohort, Cohort) else tuple(cohort)
    comparison_ids: list[str] = []
    reference_ids: list[str] = []
    for hid in ids:
        eth = store.person(hid).demographics.ethnicity
        if eth == comparison:
            comparison_ids.append(hid)
        elif eth == reference:
            reference_ids.append(hid)
    if not comparison_ids or not reference_ids:
        raise DegenerateGroupError(
            f"empty group in split: {comparison}={len(comparison_ids)}, "
            f"{reference}={len(reference_ids)}",
            n_comparison=len(comparison_ids),
            n_reference=len(reference_ids),
        )
    return GroupPair(
        comparison_label=comparison,
        reference_label=reference,
        comparison_ids=tuple(sorted(comparison_ids)),
        reference_ids=tuple(sorted(reference_ids)),
    )


def outcome_counts(
    store: RecordStore, pair: GroupPair, outcome: Outcome
) -> tuple[int, int, int, int]:
    """Cross-tabulate the pair against the outcome.

    Returns (a, b, c, d): comparison with/without the outcome, then
    reference with/without.
    """
    a = sum(1 for hid in pair.comparison_ids if outcome.occurs(store.person(hid)))
    c = sum(1 for hid in pair.reference_ids if outcome.occurs(store.person(hid)))
    return (a, pair.n_comparison - a, c, pair.n_reference - c)
