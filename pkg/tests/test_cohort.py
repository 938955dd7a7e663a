"""Filter expressions, cohort construction, group splits, and adequacy."""

import io

import pytest

from disparity import (
    And,
    Code,
    ExclusionRule,
    FilterQuery,
    Not,
    Or,
    Outcome,
    apply_filter,
    expr_from_json_dict,
    ingest_tables,
    outcome_counts,
    parse_expr,
    parse_outcome,
    split_by_ethnicity,
)
from disparity.errors import DegenerateGroupError, PredicateError, QueryError
from disparity.query import MIN_GROUP_SIZE, MIN_MINORITY_SHARE

from .test_records import CURRENT_HEADER, DEMO_HEADER, PRIOR_HEADER


def build_store(rows):
    """rows: (hid, ethnicity, county, stype, offense_code, enhancements, priors)."""
    demo = [DEMO_HEADER]
    current = [CURRENT_HEADER]
    prior = [PRIOR_HEADER]
    for hid, eth, county, stype, code, enh, priors in rows:
        demo.append(
            f"{hid},{eth},{code},2016-03-01,{county},120,{stype},2031-01-01,Folsom"
        )
        current.append(f"{hid},{code},{enh},{stype},120,{county}")
        for pcode in priors:
            prior.append(f"{hid},{pcode},,dsl,24,{county},2011-01-01")
    return ingest_tables(
        io.StringIO("\n".join(demo) + "\n"),
        io.StringIO("\n".join(current) + "\n"),
        io.StringIO("\n".join(prior) + "\n"),
    )


@pytest.fixture()
def store():
    rows = []
    for i in range(20):
        eth = "Black" if i < 10 else "White"
        stype = "third-striker" if i % 10 < 3 else "dsl"
        enh = "PC12022" if i % 2 == 0 else ""
        priors = ("PC187",) if i in (0, 10) else ("PC459",) if i % 3 == 0 else ()
        rows.append((f"h{i:03d}", eth, "Contra Costa", stype, "PC211", enh, priors))
    rows.append(("h100", "Black", "Fresno", "dsl", "PC459", "", ()))
    return build_store(rows)


class TestExpressions:
    def test_text_grammar_precedence(self):
        expr = parse_expr("PC1 OR PC2 AND NOT PC3")
        # OR binds loosest: PC1 OR (PC2 AND (NOT PC3))
        assert isinstance(expr, Or)
        assert expr.matches(frozenset({"PC1"}))
        assert expr.matches(frozenset({"PC2"}))
        assert not expr.matches(frozenset({"PC2", "PC3"}))
        assert not expr.matches(frozenset({"PC3"}))

    def test_parentheses_group(self):
        expr = parse_expr("PC12022 AND (PC211 OR PC212)")
        assert isinstance(expr, And)
        assert expr.matches(frozenset({"PC12022", "PC212"}))
        assert not expr.matches(frozenset({"PC12022", "PC459"}))

    def test_keywords_case_insensitive_and_codes_uppercased(self):
        expr = parse_expr("pc211 and not hs11351")
        assert expr.matches(frozenset({"PC211"}))
        assert not expr.matches(frozenset({"PC211", "HS11351"}))

    @pytest.mark.parametrize(
        "bad",
        ["", "AND", "PC1 AND", "(PC1", "PC1)", "PC1 PC2", "PC1 OR OR PC2", "PC1 %"],
    )
    def test_malformed_text_rejected(self, bad):
        with pytest.raises(QueryError):
            parse_expr(bad)

    def test_json_grammar_round_trip(self):
        expr = parse_expr("PC12022 AND (PC211 OR NOT PC212)")
        rebuilt = expr_from_json_dict(expr.to_json_dict())
        for codes in (
            {"PC12022", "PC211"}, {"PC12022"}, {"PC211"}, {"PC12022", "PC212"},
        ):
            assert rebuilt.matches(frozenset(codes)) == expr.matches(frozenset(codes))

    @pytest.mark.parametrize(
        "obj",
        [
            {},
            {"code": 3},
            {"and": [{"code": "A"}]},
            {"or": "B"},
            {"xor": [{"code": "A"}, {"code": "B"}]},
            {"code": "A", "extra": 1},
        ],
    )
    def test_malformed_json_rejected(self, obj):
        with pytest.raises(PredicateError):
            expr_from_json_dict(obj)

    def test_node_constructors_validate(self):
        with pytest.raises(PredicateError):
            Code("  ")
        with pytest.raises(PredicateError):
            And((Code("A"),))
        assert Not(Code("A")).matches(frozenset())


class TestFilterQuery:
    def test_county_and_codes(self, store):
        q = FilterQuery.from_json_dict(
            {"county": "Contra Costa", "code_expr": "PC12022 AND PC211"}
        )
        cohort = apply_filter(store, q)
        assert len(cohort) == 10  # even-indexed of the 20 county members
        assert all(hid != "h100" for hid in cohort.hashed_ids)

    def test_sentence_types_canonicalized(self, store):
        q = FilterQuery.from_json_dict({"sentence_types": ["Third Striker"]})
        assert q.sentence_types == ("third-striker",)
        cohort = apply_filter(store, q)
        assert len(cohort) == 6

    def test_date_window(self, store):
        q = FilterQuery.from_json_dict(
            {"offense_after": "2016-01-01", "offense_before": "2016-12-31"}
        )
        assert len(apply_filter(store, q)) == 21
        q2 = FilterQuery.from_json_dict({"offense_before": "2015-12-31"})
        assert len(apply_filter(store, q2)) == 0
        with pytest.raises(QueryError):
            FilterQuery.from_json_dict(
                {"offense_after": "2017-01-01", "offense_before": "2016-01-01"}
            )

    def test_require_prior_record(self, store):
        with_prior = apply_filter(
            store, FilterQuery.from_json_dict({"require_prior_record": True})
        )
        without = apply_filter(
            store, FilterQuery.from_json_dict({"require_prior_record": False})
        )
        assert len(with_prior) + len(without) == 21
        assert all(store.person(h).prior for h in with_prior.hashed_ids)

    def test_unknown_fields_rejected(self):
        with pytest.raises(QueryError):
            FilterQuery.from_json_dict({"county": "X", "zipcode": "90210"})

    def test_exclusions_counted(self, store):
        q = FilterQuery.from_json_dict(
            {
                "county": "Contra Costa",
                "exclusions": [
                    {"name": "prior homicide", "kind": "prior_code", "value": "PC187"},
                ],
            }
        )
        cohort = apply_filter(store, q)
        assert dict(cohort.excluded_counts) == {"prior homicide": 2}
        assert len(cohort) == 18
        assert "h000" not in cohort.hashed_ids

    def test_missing_field_exclusion(self, store):
        q = FilterQuery.from_json_dict(
            {
                "exclusions": [
                    {
                        "name": "no offense date",
                        "kind": "missing_field",
                        "value": "offense_date",
                    },
                ],
            }
        )
        cohort = apply_filter(store, q)
        assert dict(cohort.excluded_counts) == {"no offense date": 0}
        assert len(cohort) == 21

    def test_exclusion_rule_validation(self):
        with pytest.raises(QueryError):
            ExclusionRule(name="x", kind="unknown", value="y")
        with pytest.raises(QueryError):
            ExclusionRule(name="", kind="prior_code", value="PC1")
        with pytest.raises(QueryError):
            ExclusionRule.from_json_dict({"name": "x", "kind": "prior_code"})

    def test_query_round_trip(self, store):
        q = FilterQuery.from_json_dict(
            {
                "county": "Contra Costa",
                "code_expr": "PC211 OR PC212",
                "sentence_types": ["dsl"],
                "require_prior_record": True,
                "exclusions": [
                    {"name": "r", "kind": "prior_code", "value": "PC187"},
                ],
            }
        )
        rebuilt = FilterQuery.from_json_dict(q.to_json_dict())
        assert apply_filter(store, rebuilt) == apply_filter(store, q)


class TestOutcomes:
    def test_sentence_type_outcome(self, store):
        outcome = parse_outcome("third-striker")
        assert outcome.kind == "sentence_type"
        assert outcome.occurs(store.person("h000"))
        assert not outcome.occurs(store.person("h005"))

    def test_code_outcome(self, store):
        outcome = parse_outcome("code=PC12022")
        assert outcome.occurs(store.person("h000"))
        assert not outcome.occurs(store.person("h001"))

    def test_object_form_and_label(self):
        outcome = parse_outcome({"kind": "sentence_type", "value": "Third Striker"})
        assert outcome.value == "third-striker"
        assert outcome.label == "sentence_type=third-striker"
        labeled = Outcome(kind="code", value="pc211", label="robbery")
        assert labeled.value == "PC211"
        assert labeled.label == "robbery"

    @pytest.mark.parametrize("bad", [42, {"kind": "code"}, "bogus-type", "kind=oops"])
    def test_malformed_outcomes_rejected(self, bad):
        with pytest.raises(QueryError):
            parse_outcome(bad)


class TestGroupSplit:
    def test_split_and_counts(self, store):
        cohort = apply_filter(store, FilterQuery.from_json_dict({}))
        pair = split_by_ethnicity(store, cohort, "Black", "White")
        assert pair.n_comparison == 11
        assert pair.n_reference == 10
        outcome = parse_outcome("third-striker")
        a, b, c, d = outcome_counts(store, pair, outcome)
        assert (a, b, c, d) == (3, 8, 3, 7)

    def test_same_labels_rejected(self, store):
        with pytest.raises(QueryError):
            split_by_ethnicity(store, ["h000"], "Black", "Black")

    def test_empty_side_degenerate(self, store):
        with pytest.raises(DegenerateGroupError) as err:
            split_by_ethnicity(store, ["h000", "h001"], "Black", "White")
        assert err.value.n_reference == 0
        assert err.value.payload()["n_comparison"] == 2

    def test_labels_absent_from_store_degenerate(self, store):
        cohort = apply_filter(store, FilterQuery.from_json_dict({}))
        with pytest.raises(DegenerateGroupError):
            split_by_ethnicity(store, cohort, "Black", "Asian")


class TestAdequacy:
    def make_pair(self, n_comparison, n_reference, store):
        cohort = apply_filter(store, FilterQuery.from_json_dict({}))
        pair = split_by_ethnicity(store, cohort, "Black", "White")
        return type(pair)(
            comparison_label="Black",
            reference_label="White",
            comparison_ids=tuple(f"c{i}" for i in range(n_comparison)),
            reference_ids=tuple(f"r{i}" for i in range(n_reference)),
        )

    def test_floors(self, store):
        adq = self.make_pair(23, 16, store).adequacy()
        assert adq.adequate
        assert adq.warnings == ()
        assert adq.balance_ratio == pytest.approx(16 / 23)

    def test_small_group_warning(self, store):
        adq = self.make_pair(14, 40, store).adequacy()
        assert not adq.adequate
        assert any(f"{MIN_GROUP_SIZE}-case floor" in w for w in adq.warnings)

    def test_balance_warning(self, store):
        adq = self.make_pair(20, 80, store).adequacy()
        assert not adq.adequate
        assert any("balance floor" in w for w in adq.warnings)
        assert MIN_MINORITY_SHARE == 0.40

    def test_json_dict(self, store):
        d = self.make_pair(23, 16, store).adequacy().to_json_dict()
        assert d["adequate"] is True
        assert d["n_comparison"] == 23
        assert d["warnings"] == []
