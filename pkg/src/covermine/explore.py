"""Data and result exploration: aggregate stats, samples, misclassification
views, and rule formatting with split-point rounding.

Everything here is read-only over dataset/front snapshots.  Split-point
rounding picks the numeric threshold with the fewest significant decimal
digits that provably keeps the matched record set unchanged.
"""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass

from .model import Dataset, Proposition, Rule, RuleSet, match_record

TOP_VALUES = 10


@dataclass(frozen=True)
class FeatureStats:
    feature: str
    kind: str
    count: int
    top_values: tuple = ()          # nominal: ((value, count), ...) best 10
    minimum: float | None = None    # numeric aggregates; None when undefined
    maximum: float | None = None
    mean: float | None = None

    def as_dict(self) -> dict:
        out = {"feature": self.feature, "kind": self.kind, "count": self.count}
        if self.kind == "nominal":
            out["top_values"] = [list(v) for v in self.top_values]
        else:
            out.update(minimum=self.minimum, maximum=self.maximum, mean=self.mean)
        return out


def _matched(ds: Dataset, subset: RuleSet | None) -> list:
    if subset is None:
        return list(ds.records)
    return [r for r in ds.records if match_record(subset, r)]


def stats(ds: Dataset, subset: RuleSet | None = None) -> list:
    """Per-feature aggregates over the records matched by ``subset``
    (whole dataset when None).  Empty subsets flag numeric means undefined."""
    records = _matched(ds, subset)
    out = []
    for f in ds.features:
        if f.kind == "nominal":
            counts = Counter(r.values[f.name] for r in records)
            top = tuple(sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:TOP_VALUES])
            out.append(FeatureStats(f.name, f.kind, len(records), top_values=top))
        else:
            values = [r.values[f.name] for r in records
                      if not math.isnan(r.values[f.name])]
            if values:
                out.append(FeatureStats(
                    f.name, f.kind, len(records), minimum=min(values),
                    maximum=max(values), mean=sum(values) / len(values)))
            else:
                out.append(FeatureStats(f.name, f.kind, len(records)))
    return out


def sample_records(ds: Dataset, subset: RuleSet | None, n: int, seed: int) -> list:
    """Uniform sample without replacement, deterministic per seed."""
    if n < 0:
        raise ValueError("sample size must be nonnegative")
    pool = _matched(ds, subset)
    rng = random.Random(seed)
    return pool if n >= len(pool) else rng.sample(pool, n)


def misclassified(ds: Dataset, rs: RuleSet) -> tuple:
    """(false positives, missed causes).

    False positives are matched records with no cause; a cause is missed when
    none of its linked records is matched, and it is reported with all of its
    records.
    """
    matched = {r.id for r in _matched(ds, rs)}
    false_positives = [r for r in ds.records if r.id in matched and not r.cause_ids]
    by_cause: dict[str, list] = {c: [] for c in sorted(ds.causes)}
    for r in ds.records:
        for c in r.cause_ids:
            by_cause[c].append(r)
    missed = {c: records for c, records in by_cause.items()
              if records and not any(r.id in matched for r in records)}
    return false_positives, missed


def default_branch(ds: Dataset, rs: RuleSet, n: int, seed: int) -> list:
    """Sample of records matched by no inclusion rule (excluded-but-included
    records are not in the default branch)."""
    pool = [r for r in ds.records
            if not any(rule.matches(r.values) for rule in rs.inclusions)]
    rng = random.Random(seed)
    return pool if n >= len(pool) else rng.sample(pool, n)


# ---------------------------------------------------------------------------
# Split-point rounding


def significant_digits(x: float) -> int:
    """Length of the shortest normalized decimal mantissa; 0 counts as 1."""
    if x == 0:
        return 1
    mantissa = repr(abs(float(x)))
    if "e" in mantissa:
        mantissa = mantissa.split("e")[0]
    digits = mantissa.replace(".", "").lstrip("0").rstrip("0")
    return max(len(digits), 1)


def round_split_point(low: float, high: float) -> float:
    """Value in [low, high) with the fewest significant decimal digits;
    ties break towards the interval midpoint, then the lower value."""
    if not (math.isfinite(low) and math.isfinite(high)) or not low < high:
        raise ValueError(f"empty or unbounded interval [{low}, {high})")
    mid = low + (high - low) / 2.0
    for digits in range(1, 18):
        candidates = _exact_digit_candidates(low, high, digits)
        if candidates:
            return min(candidates, key=lambda x: (abs(x - mid), x))
    return low  # both endpoints need >17 digits; keep the low end


def _exact_digit_candidates(low: float, high: float, digits: int) -> list:
    out = set()
    if low <= 0.0 < high:
        if digits == 1:
            out.add(0.0)
    top = max(abs(low), abs(high))
    e_hi = math.floor(math.log10(top)) if top > 0 else 0
    # candidates with leading digit below these magnitudes sit farther from
    # the midpoint than ones already enumerated (interval spans zero), or
    # cannot lie inside the interval at all
    if low > 0:
        e_lo = math.floor(math.log10(low))
    elif high <= 0:
        e_lo = math.floor(math.log10(-high)) if high < 0 else e_hi - 2
    else:
        anchor = max(abs(low + (high - low) / 2.0), (high - low) / 4.0)
        e_lo = math.floor(math.log10(anchor)) - 1 if anchor > 0 else e_hi - 2
    for e in range(max(e_lo, -320), min(e_hi, 308) + 2):
        p = e - digits + 1
        step = 10.0 ** p if -320 < p < 309 else 0.0
        if step == 0.0 or not (math.isfinite(low / step) and math.isfinite(high / step)):
            continue
        k_lo = math.ceil(low / step) - 1
        k_hi = math.floor(high / step) + 1
        if k_hi - k_lo > 10_000:
            continue  # denser layers only matter when coarser ones were empty
        for k in range(k_lo, k_hi + 1):
            if k == 0 or _int_digits(k) != digits:
                continue
            x = float(f"{k}e{p}")
            if low <= x < high:
                out.add(x)
    return sorted(out)


def _int_digits(k: int) -> int:
    s = str(abs(k)).rstrip("0")
    return len(s) if s else 1


def rounded_threshold(prop: Proposition, values) -> float:
    """Digit-minimal replacement threshold for a numeric proposition that
    keeps its matched value set unchanged.  ``values`` are the sorted
    distinct data values of the feature."""
    a = float(prop.value)
    if prop.op == ">=":
        mirrored = Proposition(prop.feature, "<=", -a)
        return -rounded_threshold(mirrored, sorted(-v for v in values))
    matched = [v for v in values if v <= a]
    unmatched = [v for v in values if v > a]
    low = matched[-1] if matched else a
    high = unmatched[0] if unmatched else math.nextafter(a, math.inf)
    if not low < high:
        return a
    return round_split_point(low, high)


def format_ruleset(rs: RuleSet, ds: Dataset) -> str:
    """Display text: rules grouped by shared feature sets, numeric split
    points rounded; the matched record set is unchanged and the text still
    parses under the ruleset grammar."""

    def rounded_rule(rule: Rule) -> Rule:
        props = []
        for p in rule.propositions:
            if p.op in ("<=", ">="):
                value = rounded_threshold(p, ds.distinct_numeric_values(p.feature))
                props.append(Proposition(p.feature, p.op, value))
            else:
                props.append(p)
        return Rule(tuple(props))

    def group_key(rule: Rule):
        return (tuple(sorted(rule.features())), rule.text())

    if rs.is_empty:
        return "(false)"
    parts = []
    inclusions = sorted((rounded_rule(r) for r in rs.inclusions), key=group_key)
    exclusions = sorted((rounded_rule(r) for r in rs.exclusions), key=group_key)
    if inclusions:
        parts.append("\nor ".join(r.text() for r in inclusions))
    else:
        parts.append("(false)")
    if exclusions:
        parts.append("except")
        parts.append("\nor ".join(r.text() for r in exclusions))
    return "\n".join(parts)
