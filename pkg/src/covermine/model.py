"""Core domain types: datasets with cause links, propositions, rules and rulesets.

A ruleset is a pair of rule lists (inclusions, exclusions) with
"match any inclusion and no exclusion" semantics.  Rulesets and rules are
canonical by construction: propositions sorted within rules, rules sorted,
duplicates removed.  Canonical text doubles as identity for caching.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

NOMINAL = "nominal"
NUMERIC = "numeric"

#: operators on nominal features
EQ, NE = "=", "!="
#: operators on numeric features
LE, GE = "<=", ">="

_NOMINAL_OPS = (EQ, NE)
_NUMERIC_OPS = (LE, GE)


class SchemaError(ValueError):
    """Unknown feature, kind mismatch, or malformed dataset input."""


class RuleStructureError(ValueError):
    """Structurally invalid rule (e.g. two different equals on one feature)."""


class RuleSyntaxError(ValueError):
    """Ruleset text rejected by the grammar; carries a character position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


# ---------------------------------------------------------------------------
# Dataset


@dataclass(frozen=True)
class Feature:
    name: str
    kind: str  # NOMINAL or NUMERIC

    def __post_init__(self):
        if self.kind not in (NOMINAL, NUMERIC):
            raise SchemaError(f"feature {self.name!r}: unknown kind {self.kind!r}")


@dataclass(frozen=True)
class Record:
    id: str
    values: Mapping[str, object]
    cause_ids: frozenset = frozenset()

    @property
    def is_positive(self) -> bool:
        return bool(self.cause_ids)


class Dataset:
    """Immutable collection of typed records plus record-to-cause links.

    A record is positive iff it is linked to at least one cause; covering a
    cause means selecting any one of its linked records.  ``version`` changes
    whenever a mutated copy is derived, which invalidates evaluation caches.
    """

    def __init__(self, features: Sequence[Feature], records: Sequence[Record],
                 causes: Iterable[str] = (), version: int = 0):
        self.features = tuple(features)
        self.records = tuple(records)
        self.version = version
        self.feature_by_name = {f.name: f for f in self.features}
        if len(self.feature_by_name) != len(self.features):
            raise SchemaError("duplicate feature names")
        self.record_by_id = {r.id: r for r in self.records}
        if len(self.record_by_id) != len(self.records):
            raise SchemaError("duplicate record ids")
        linked = set()
        for r in self.records:
            linked.update(r.cause_ids)
        self.causes = frozenset(causes) | frozenset(linked)
        self._check_values()
        self._distinct_numeric: dict[str, tuple[float, ...]] = {}

    def _check_values(self):
        names = set(self.feature_by_name)
        for r in self.records:
            if set(r.values) != names:
                missing = names.symmetric_difference(r.values)
                raise SchemaError(f"record {r.id!r}: value set mismatch on {sorted(missing)}")
            for f in self.features:
                v = r.values[f.name]
                if f.kind == NUMERIC:
                    # NaN marks a computed-feature fault and matches no numeric
                    # proposition; infinities are always rejected
                    if not isinstance(v, (int, float)) or isinstance(v, bool) or math.isinf(v):
                        raise SchemaError(f"record {r.id!r}: non-numeric or infinite {f.name!r}={v!r}")
                elif not isinstance(v, str):
                    raise SchemaError(f"record {r.id!r}: nominal {f.name!r} got {type(v).__name__}")

    def distinct_numeric_values(self, feature: str) -> tuple[float, ...]:
        """Sorted distinct values of a numeric feature (threshold candidates)."""
        got = self._distinct_numeric.get(feature)
        if got is None:
            if self.feature_by_name[feature].kind != NUMERIC:
                raise SchemaError(f"{feature!r} is not numeric")
            got = tuple(sorted({float(r.values[feature]) for r in self.records
                                if not math.isnan(r.values[feature])}))
            self._distinct_numeric[feature] = got
        return got

    def derive(self, features=None, records=None, causes=None) -> "Dataset":
        """Mutated copy with a bumped version."""
        return Dataset(
            self.features if features is None else features,
            self.records if records is None else records,
            self.causes if causes is None else causes,
            version=self.version + 1,
        )

    def __len__(self) -> int:
        return len(self.records)


# ---------------------------------------------------------------------------
# Propositions, rules, rulesets


@dataclass(frozen=True, order=True)
class Proposition:
    """Atomic condition: nominal =/!= a token, numeric <=/>= a constant."""

    feature: str
    op: str
    value: object  # str for =/!=, float for <=/>=

    def __post_init__(self):
        if self.op in _NOMINAL_OPS:
            if not isinstance(self.value, str):
                raise RuleStructureError(f"{self.feature} {self.op}: value must be a string")
        elif self.op in _NUMERIC_OPS:
            if isinstance(self.value, bool) or not isinstance(self.value, (int, float)):
                raise RuleStructureError(f"{self.feature} {self.op}: value must be numeric")
            if not math.isfinite(self.value):
                raise RuleStructureError(f"{self.feature} {self.op}: value must be finite")
            object.__setattr__(self, "value", float(self.value))
        else:
            raise RuleStructureError(f"unknown operator {self.op!r}")

    def holds(self, values: Mapping[str, object]) -> bool:
        try:
            v = values[self.feature]
        except KeyError:
            raise SchemaError(f"record lacks feature {self.feature!r}") from None
        if self.op == EQ:
            self._want_nominal(v)
            return v == self.value
        if self.op == NE:
            self._want_nominal(v)
            return v != self.value
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise SchemaError(f"numeric comparison on nominal feature {self.feature!r}")
        return v <= self.value if self.op == LE else v >= self.value

    def _want_nominal(self, v):
        if not isinstance(v, str):
            raise SchemaError(f"nominal comparison on numeric feature {self.feature!r}")

    def text(self) -> str:
        return f"{self.feature} {self.op} {format_value(self.value)}"


@dataclass(frozen=True)
class Rule:
    """One conjunction of propositions; an independent nugget of knowledge."""

    propositions: tuple = ()

    def __post_init__(self):
        props = _canonical_props(self.propositions)
        object.__setattr__(self, "propositions", props)

    def matches(self, values: Mapping[str, object]) -> bool:
        return all(p.holds(values) for p in self.propositions)

    def features(self) -> frozenset:
        return frozenset(p.feature for p in self.propositions)

    def text(self) -> str:
        return "(" + " and ".join(p.text() for p in self.propositions) + ")"

    def __lt__(self, other: "Rule") -> bool:
        return self.propositions < other.propositions


def _canonical_props(props: Iterable[Proposition]) -> tuple:
    """Sort, dedup and validate a conjunction.

    Keeps only the tightest of several <= (resp. >=) thresholds per feature;
    that preserves the matched set.  Two different equals on one feature are
    unsatisfiable and rejected as a structural error.
    """
    out: dict[tuple, Proposition] = {}
    for p in props:
        if not isinstance(p, Proposition):
            raise RuleStructureError(f"not a proposition: {p!r}")
        if p.op == NE:
            out[(p.feature, NE, p.value)] = p
            continue
        key = (p.feature, p.op)
        old = out.get(key)
        if old is None:
            out[key] = p
        elif p.op == EQ:
            if old.value != p.value:
                raise RuleStructureError(
                    f"two different equals on {p.feature!r}: {old.value!r} and {p.value!r}")
        elif p.op == LE:
            out[key] = p if p.value < old.value else old
        else:  # GE
            out[key] = p if p.value > old.value else old
    if not out:
        raise RuleStructureError("rule must have at least one proposition")
    return tuple(sorted(out.values(), key=lambda p: (p.feature, p.op, str(p.value))))


@dataclass(frozen=True)
class RuleSet:
    """Inclusion rules with optional "except" exclusion rules.

    A record matches iff some inclusion rule fully holds and no exclusion
    rule fully holds.  The empty ruleset matches nothing and serializes as
    the literal ``(false)``.
    """

    inclusions: tuple = ()
    exclusions: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "inclusions", _canonical_rules(self.inclusions))
        object.__setattr__(self, "exclusions", _canonical_rules(self.exclusions))

    @property
    def is_empty(self) -> bool:
        return not self.inclusions and not self.exclusions

    def rules(self) -> tuple:
        return self.inclusions + self.exclusions

    def with_inclusion(self, rule: Rule) -> "RuleSet":
        return RuleSet(self.inclusions + (rule,), self.exclusions)

    def with_exclusion(self, rule: Rule) -> "RuleSet":
        return RuleSet(self.inclusions, self.exclusions + (rule,))

    def without(self, rule: Rule, exclusion: bool) -> "RuleSet":
        if exclusion:
            return RuleSet(self.inclusions, tuple(r for r in self.exclusions if r != rule))
        return RuleSet(tuple(r for r in self.inclusions if r != rule), self.exclusions)

    def text(self) -> str:
        if self.is_empty:
            return "(false)"
        parts = " or ".join(r.text() for r in self.inclusions) if self.inclusions else "(false)"
        if self.exclusions:
            parts += " except " + " or ".join(r.text() for r in self.exclusions)
        return parts


def _canonical_rules(rules: Iterable[Rule]) -> tuple:
    uniq = {r.propositions: r for r in rules}
    return tuple(sorted(uniq.values(), key=lambda r: tuple(
        (p.feature, p.op, str(p.value)) for p in r.propositions)))


def canonicalize(rs: RuleSet) -> RuleSet:
    """Idempotent normal form; rulesets are canonical by construction."""
    return RuleSet(rs.inclusions, rs.exclusions)


def combine_rulesets(a: RuleSet, b: RuleSet) -> RuleSet:
    """Union of inclusion lists and of exclusion lists, canonicalized."""
    return RuleSet(a.inclusions + b.inclusions, a.exclusions + b.exclusions)


def complexity(rs: RuleSet) -> tuple:
    """(rule count, proposition count) over the canonical form."""
    rules = rs.rules()
    return len(rules), sum(len(r.propositions) for r in rules)


def match_record(rs: RuleSet, record: Record) -> bool:
    """True iff some inclusion rule holds on the record and no exclusion does."""
    values = record.values
    if not any(r.matches(values) for r in rs.inclusions):
        return False
    return not any(r.matches(values) for r in rs.exclusions)


def check_schema(rs: RuleSet, dataset: Dataset) -> None:
    """Reject rulesets referencing unknown features or mismatched kinds."""
    for rule in rs.rules():
        for p in rule.propositions:
            f = dataset.feature_by_name.get(p.feature)
            if f is None:
                raise SchemaError(f"unknown feature {p.feature!r}")
            want = NOMINAL if p.op in _NOMINAL_OPS else NUMERIC
            if f.kind != want:
                raise SchemaError(
                    f"operator {p.op!r} not applicable to {f.kind} feature {p.feature!r}")


# ---------------------------------------------------------------------------
# Text grammar
#
# ruleset := incl { "or" incl } [ "except" incl { "or" incl } ]
# incl    := "(" prop { "and" prop } ")"
# prop    := name ("="|"!=") token | name ("<="|">=") decimal
#
# The literal "(false)" denotes the empty ruleset.

_TOKEN_RE = re.compile(r"""
    \s*(?:
      (?P<lparen>\() | (?P<rparen>\)) |
      (?P<op><=|>=|!=|=) |
      (?P<quoted>"(?:[^"\\]|\\.)*") |
      (?P<word>[^\s()"=!<>]+)
    )""", re.VERBOSE)

_NUMBER_RE = re.compile(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?\Z")
_BARE_VALUE_RE = re.compile(r"[^\s()\"=!<>]+\Z")

_KEYWORDS = {"or", "and", "except"}


def format_value(value) -> str:
    """Render a proposition value; quotes nominal tokens only when needed."""
    if isinstance(value, float):
        return str(int(value)) if value.is_integer() and abs(value) < 1e16 else repr(value)
    if _BARE_VALUE_RE.match(value) and value not in _KEYWORDS:
        return value
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            rest = text[pos:].lstrip()
            if not rest:
                break
            raise RuleSyntaxError(f"unexpected character {rest[0]!r}", len(text) - len(rest))
        for kind in ("lparen", "rparen", "op", "quoted", "word"):
            val = m.group(kind)
            if val is not None:
                tokens.append((kind, val, m.start(kind)))
                break
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str, dataset_features: Mapping[str, Feature]):
        self.text = text
        self.features = dataset_features
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self, kind=None, value=None):
        tok = self.peek()
        if tok is None:
            raise RuleSyntaxError("unexpected end of input", len(self.text))
        if kind is not None and tok[0] != kind or value is not None and tok[1] != value:
            raise RuleSyntaxError(f"expected {value or kind}, got {tok[1]!r}", tok[2])
        self.pos += 1
        return tok

    def parse(self) -> RuleSet:
        # "(false)" stands in for an empty inclusion list (or a whole empty ruleset)
        inclusions = []
        if [t[1] for t in self.tokens[self.pos:self.pos + 3]] == ["(", "false", ")"]:
            self.pos += 3
        else:
            inclusions.append(self.rule())
            while self.peek() and self.peek()[1] == "or":
                self.take()
                inclusions.append(self.rule())
        exclusions = []
        if self.peek() and self.peek()[1] == "except":
            self.take()
            exclusions.append(self.rule())
            while self.peek() and self.peek()[1] == "or":
                self.take()
                exclusions.append(self.rule())
        if self.peek() is not None:
            raise RuleSyntaxError(f"trailing input {self.peek()[1]!r}", self.peek()[2])
        return RuleSet(tuple(inclusions), tuple(exclusions))

    def rule(self) -> Rule:
        self.take("lparen")
        props = [self.prop()]
        while self.peek() and self.peek()[1] == "and":
            self.take()
            props.append(self.prop())
        self.take("rparen")
        return Rule(tuple(props))

    def prop(self) -> Proposition:
        kind, name, at = self.take("word")
        feature = self.features.get(name)
        if feature is None:
            raise SchemaError(f"unknown feature {name!r}")
        _, op, op_at = self.take("op")
        tok = self.peek()
        if tok is None:
            raise RuleSyntaxError("expected a value", len(self.text))
        if op in _NOMINAL_OPS:
            if feature.kind != NOMINAL:
                raise SchemaError(f"operator {op!r} needs a nominal feature, {name!r} is numeric")
            k, raw, _ = self.take()
            if k == "quoted":
                value = raw[1:-1].replace('\\"', '"').replace("\\\\", "\\")
            elif k == "word":
                value = raw
            else:
                raise RuleSyntaxError(f"expected a value, got {raw!r}", tok[2])
        else:
            if feature.kind != NUMERIC:
                raise SchemaError(f"operator {op!r} needs a numeric feature, {name!r} is nominal")
            k, raw, val_at = self.take()
            if k != "word" or not _NUMBER_RE.match(raw):
                raise RuleSyntaxError(f"expected a decimal, got {raw!r}", val_at)
            value = float(raw)
        return Proposition(name, op, value)


def parse_ruleset(text: str, features: Sequence[Feature] | Dataset) -> RuleSet:
    """Parse ruleset text against a schema; result is canonical.

    Raises RuleSyntaxError (with position), SchemaError (unknown feature or
    operator/kind mismatch) or RuleStructureError, each distinctly.
    """
    if isinstance(features, Dataset):
        by_name = features.feature_by_name
    else:
        by_name = {f.name: f for f in features}
    return _Parser(text, by_name).parse()
