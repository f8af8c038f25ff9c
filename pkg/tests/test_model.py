"""Matching semantics, canonicalization and the ruleset text grammar."""

import pytest
from hypothesis import given, strategies as st

from covermine.model import (
    Feature, Proposition, Record, Rule, RuleSet, RuleStructureError,
    RuleSyntaxError, SchemaError, canonicalize, combine_rulesets, complexity,
    match_record, parse_ruleset,
)

FEATURES = [Feature("lang", "nominal"), Feature("size", "numeric")]


def rs(text: str) -> RuleSet:
    return parse_ruleset(text, FEATURES)


# ---------------------------------------------------------------------------
# matching


def test_match_both_propositions_hold(fig1):
    ruleset = rs("(lang = java and size <= 5)")
    assert match_record(ruleset, fig1.record_by_id["I2"]) is True


def test_empty_ruleset_matches_nothing(fig1):
    empty = RuleSet()
    assert all(match_record(empty, r) is False for r in fig1.records)


def test_exclusion_vetoes_inclusion(fig1):
    # independent truth-table oracle over the two propositions on I1:
    # lang=java holds, size>=9 holds (size=10) -> included but excluded -> False
    ruleset = rs("(lang = java) except (size >= 9)")
    i1 = fig1.record_by_id["I1"]
    incl = i1.values["lang"] == "java"
    excl = i1.values["size"] >= 9
    assert (incl and not excl) is False
    assert match_record(ruleset, i1) is False


def test_match_is_pure(fig1):
    ruleset = rs("(lang = java) except (size >= 9)")
    results = [match_record(ruleset, r) for r in fig1.records for _ in range(3)]
    assert results == [match_record(ruleset, r) for r in fig1.records for _ in range(3)]


def test_match_unknown_feature_rejected():
    ruleset = RuleSet((Rule((Proposition("ghost", "=", "x"),)),))
    with pytest.raises(SchemaError):
        match_record(ruleset, Record("r", {"lang": "java", "size": 1.0}))


def test_match_kind_mismatch_rejected():
    ruleset = RuleSet((Rule((Proposition("size", "=", "java"),)),))
    with pytest.raises(SchemaError):
        match_record(ruleset, Record("r", {"lang": "java", "size": 1.0}))


# ---------------------------------------------------------------------------
# canonical form


def test_canonicalize_dedups_reordered_rules():
    a = Rule((Proposition("lang", "=", "a"), Proposition("size", "<=", 1.0)))
    b = Rule((Proposition("size", "<=", 1.0), Proposition("lang", "=", "a")))
    assert a == b
    assert RuleSet((a, b)) == RuleSet((a,))


def test_canonicalize_idempotent():
    ruleset = rs("(size <= 5) or (lang = java and size >= 2)")
    assert canonicalize(ruleset) == ruleset
    assert canonicalize(canonicalize(ruleset)) == ruleset


def test_two_different_equals_rejected():
    with pytest.raises(RuleStructureError):
        Rule((Proposition("lang", "=", "a"), Proposition("lang", "=", "b")))


def test_threshold_collapse_keeps_tightest():
    r = Rule((Proposition("size", "<=", 5.0), Proposition("size", "<=", 3.0),
              Proposition("size", ">=", 1.0), Proposition("size", ">=", 2.0)))
    assert r == Rule((Proposition("size", "<=", 3.0), Proposition("size", ">=", 2.0)))


def test_empty_rule_rejected():
    with pytest.raises(RuleStructureError):
        Rule(())


# ---------------------------------------------------------------------------
# grammar


def test_parse_single_rule():
    ruleset = rs("(lang = java and size <= 5)")
    assert len(ruleset.inclusions) == 1 and not ruleset.exclusions
    assert len(ruleset.inclusions[0].propositions) == 2


def test_parse_except():
    ruleset = rs("(lang = java) except (size >= 9)")
    assert len(ruleset.inclusions) == 1 and len(ruleset.exclusions) == 1


def test_parse_kind_mismatch_names_feature():
    with pytest.raises(SchemaError, match="size"):
        rs("(size = java)")


def test_parse_unknown_feature():
    with pytest.raises(SchemaError, match="ghost"):
        rs("(ghost = 1)")


def test_parse_syntax_error_has_position():
    with pytest.raises(RuleSyntaxError) as exc:
        rs("(lang = java andsize <= 5)")
    assert exc.value.position >= 0


def test_parse_empty_literal():
    assert rs("(false)") == RuleSet()
    assert RuleSet().text() == "(false)"


def test_parse_quoted_value_roundtrip():
    ruleset = rs('(lang = "ja va")')
    assert ruleset.inclusions[0].propositions[0].value == "ja va"
    assert rs(ruleset.text()) == ruleset


# ---------------------------------------------------------------------------
# complexity


def test_complexity_empty():
    assert complexity(RuleSet()) == (0, 0)


def test_complexity_counts():
    assert complexity(rs("(lang = a and size <= 2) or (size <= 3)")) == (2, 3)


def test_complexity_on_canonical_form():
    dup = rs("(lang = a) or (lang = a)")
    assert complexity(dup) == (1, 1)


# ---------------------------------------------------------------------------
# properties

nominal_prop = st.sampled_from(["x", "y", "z"]).flatmap(
    lambda v: st.sampled_from(["=", "!="]).map(lambda op: Proposition("lang", op, v)))
numeric_prop = st.integers(-5, 10).flatmap(
    lambda v: st.sampled_from(["<=", ">="]).map(lambda op: Proposition("size", op, float(v))))
props = st.one_of(nominal_prop, numeric_prop)


@st.composite
def rules(draw):
    ps = draw(st.lists(props, min_size=1, max_size=3))
    try:
        return Rule(tuple(ps))
    except RuleStructureError:
        return Rule((ps[0],))


@st.composite
def rulesets(draw):
    incl = draw(st.lists(rules(), max_size=3))
    excl = draw(st.lists(rules(), max_size=2))
    return RuleSet(tuple(incl), tuple(excl))


@st.composite
def records(draw):
    return Record(
        "r", {"lang": draw(st.sampled_from(["x", "y", "z", "w"])),
              "size": float(draw(st.integers(-5, 10)))})


@given(rulesets(), records())
def test_property_canonical_matches_same(ruleset, record):
    assert match_record(canonicalize(ruleset), record) == match_record(ruleset, record)


@given(rulesets())
def test_property_text_roundtrip(ruleset):
    reparsed = parse_ruleset(ruleset.text(), FEATURES)
    assert reparsed == ruleset
    assert parse_ruleset(reparsed.text(), FEATURES) == reparsed


@given(rulesets(), rulesets(), records())
def test_property_combine_is_union(a, b, record):
    combined = combine_rulesets(a, b)
    assert set(combined.inclusions) == set(a.inclusions) | set(b.inclusions)
    assert set(combined.exclusions) == set(a.exclusions) | set(b.exclusions)
    # matched by the union iff included by some part and excluded by none
    included = any(r.matches(record.values) for r in combined.inclusions)
    excluded = any(r.matches(record.values) for r in combined.exclusions)
    assert match_record(combined, record) == (included and not excluded)
