"""Exploration views and split-point rounding."""

import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from covermine.explore import (
    default_branch, format_ruleset, misclassified, round_split_point,
    rounded_threshold, sample_records, significant_digits, stats,
)
from covermine.model import (
    Dataset, Feature, Proposition, Record, RuleSet, match_record, parse_ruleset,
)


def rs(text, ds):
    return parse_ruleset(text, ds.features)


# ---------------------------------------------------------------------------
# stats


def test_stats_java_subset(fig1):
    per_feature = {s.feature: s for s in stats(fig1, rs("(lang = java)", fig1))}
    size = per_feature["size"]
    assert size.count == 3
    assert size.minimum == 3 and size.maximum == 10
    assert size.mean == pytest.approx(22 / 3)
    lang = per_feature["lang"]
    assert lang.top_values == (("java", 3),)


def test_stats_empty_subset_flags_undefined_mean(fig1):
    per_feature = {s.feature: s for s in stats(fig1, rs("(size >= 999)", fig1))}
    assert per_feature["size"].count == 0
    assert per_feature["size"].mean is None


def test_stats_whole_dataset(fig1):
    per_feature = {s.feature: s for s in stats(fig1)}
    assert all(s.count == len(fig1) for s in per_feature.values())
    # brute-force aggregation oracle
    sizes = [r.values["size"] for r in fig1.records]
    assert per_feature["size"].mean == pytest.approx(sum(sizes) / len(sizes))


# ---------------------------------------------------------------------------
# sampling


def test_sample_contracts(fig1):
    assert sample_records(fig1, None, 0, seed=1) == []
    whole = sample_records(fig1, None, 99, seed=1)
    assert {r.id for r in whole} == {r.id for r in fig1.records}
    a = sample_records(fig1, None, 3, seed=42)
    b = sample_records(fig1, None, 3, seed=42)
    assert [r.id for r in a] == [r.id for r in b]


# ---------------------------------------------------------------------------
# misclassification views


def test_misclassified_perfect_ruleset(fig1):
    fps, missed = misclassified(fig1, rs("(lang = java and size <= 5)", fig1))
    assert fps == [] and missed == {}


def test_misclassified_missed_cause_lists_all_records(fig1):
    # matches only I1: C1 covered, C2 missed with every linked record
    fps, missed = misclassified(fig1, rs("(size >= 10)", fig1))
    assert fps == []
    assert {c: [r.id for r in recs] for c, recs in missed.items()} == \
        {"C2": ["I2", "I3", "I4"]}


def test_misclassified_false_positive_only(fig1):
    fps, missed = misclassified(fig1, rs("(size >= 9 and size <= 9)", fig1))
    assert [r.id for r in fps] == ["I5"]
    assert {c: [r.id for r in recs] for c, recs in missed.items()} == \
        {"C1": ["I1", "I2"], "C2": ["I2", "I3", "I4"]}


def test_default_branch(fig1):
    assert len(default_branch(fig1, RuleSet(), 99, seed=0)) == len(fig1)
    everything = rs("(size <= 100)", fig1)
    assert default_branch(fig1, everything, 99, seed=0) == []
    # included-but-excluded records are NOT in the default branch
    excluded = rs("(lang = java) except (size >= 9)", fig1)
    ids = {r.id for r in default_branch(fig1, excluded, 99, seed=0)}
    assert ids == {"I3", "I4"}


# ---------------------------------------------------------------------------
# split-point rounding


def digit_oracle(low, high, max_digits=8):
    """Independent enumeration: all values with exactly d significant digits
    inside [low, high), for the smallest nonempty d."""
    for d in range(1, max_digits + 1):
        found = set()
        if d == 1 and low <= 0.0 < high:
            found.add(0.0)
        for e in range(-12, 9):
            p = e - d + 1
            for k in range(10 ** (d - 1), 10 ** d):
                s = str(k).rstrip("0")
                if len(s) != d:
                    continue
                for sign in (k, -k):
                    x = float(f"{sign}e{p}")
                    if low <= x < high:
                        found.add(x)
        if found:
            return d, found
    return None, set()


def test_round_split_example_from_digit_oracle():
    d, cands = digit_oracle(0.7312, 0.9413)
    assert d == 1 and cands == {0.8, 0.9}
    mid = 0.7312 + (0.9413 - 0.7312) / 2
    assert min(cands, key=lambda x: (abs(x - mid), x)) == 0.8
    assert round_split_point(0.7312, 0.9413) == 0.8


def test_round_split_tie_goes_to_midpoint():
    assert round_split_point(3, 7) == 5.0  # candidates 3..6, midpoint 5


def test_round_split_low_endpoint_already_minimal():
    assert round_split_point(2, 2.0001) == 2.0


def test_round_split_rejects_empty_interval():
    with pytest.raises(ValueError):
        round_split_point(3, 3)
    with pytest.raises(ValueError):
        round_split_point(5, 4)


def test_round_split_negative_and_zero_spanning():
    assert round_split_point(-7, -3) == -5.0
    # midpoint 0.5 is itself a 1-digit value and wins the distance tie-break
    assert round_split_point(-1, 2) == 0.5
    assert round_split_point(-1, 1) == 0.0  # midpoint 0, zero wins
    # midpoint 0.25: 0.2 and 0.3 tie on distance, lower value wins
    assert round_split_point(0.0, 0.5) == 0.2


@settings(max_examples=150, deadline=None)
@given(st.floats(-1000, 1000).filter(lambda x: math.isfinite(x)),
       st.floats(0.01, 500))
def test_property_round_split_is_digit_minimal(low, width):
    high = low + width
    got = round_split_point(low, high)
    assert low <= got < high
    d, cands = digit_oracle(low, high, max_digits=6)
    assert d is not None
    assert significant_digits(got) == d
    mid = low + width / 2
    assert got == min(cands, key=lambda x: (abs(x - mid), x))


def test_significant_digits():
    assert significant_digits(0.8) == 1
    assert significant_digits(350.0) == 2
    assert significant_digits(0.25) == 2
    assert significant_digits(0.0) == 1
    assert significant_digits(-12.5) == 3


# ---------------------------------------------------------------------------
# formatting


def test_format_keeps_match_set(fig1):
    original = rs("(lang = java and size <= 4.73) or (size >= 8.21)", fig1)
    formatted = format_ruleset(original, fig1)
    reparsed = parse_ruleset(formatted, fig1.features)
    for r in fig1.records:
        assert match_record(reparsed, r) == match_record(original, r)


def test_format_groups_rules_by_feature_sets(fig1):
    text = format_ruleset(
        rs("(size <= 4.9) or (lang = go) or (size >= 7.3) or (lang = java)", fig1),
        fig1)
    lines = text.splitlines()
    features_in_order = ["lang" if "lang" in line else "size" for line in lines]
    assert features_in_order == sorted(features_in_order)


def test_format_empty_ruleset(fig1):
    assert format_ruleset(RuleSet(), fig1) == "(false)"


def test_format_single_rule_semantics_unchanged(fig1):
    original = rs("(size <= 9.731)", fig1)
    formatted = parse_ruleset(format_ruleset(original, fig1), fig1.features)
    for r in fig1.records:
        assert match_record(formatted, r) == match_record(original, r)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10_000))
def test_property_rounded_thresholds_preserve_matches(seed):
    rng = random.Random(seed)
    values = sorted(rng.uniform(-50, 50) for _ in range(rng.randint(1, 12)))
    ds = Dataset([Feature("x", "numeric")],
                 [Record(f"r{i}", {"x": v}) for i, v in enumerate(values)])
    op = rng.choice(["<=", ">="])
    threshold = rng.uniform(-60, 60)
    prop = Proposition("x", op, threshold)
    rounded = rounded_threshold(prop, ds.distinct_numeric_values("x"))
    new_prop = Proposition("x", op, rounded)
    for r in ds.records:
        assert new_prop.holds(r.values) == prop.holds(r.values), (values, op, threshold, rounded)
    assert significant_digits(rounded) <= significant_digits(threshold) or rounded == threshold
