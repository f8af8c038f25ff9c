"""Ruleset evaluation: set-cover aware cost vectors, dominance, scalarization.

Evaluating a ruleset yields record-level confusion counts plus cause
coverage (a cause counts as covered when any of its linked records is
selected).  Objective vectors are built from a session-fixed list of named
dimensions, all minimized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import Dataset, RuleSet, check_schema, complexity


@dataclass(frozen=True)
class EvaluationResult:
    selected_count: int
    tp: int
    fp: int
    tn: int
    fn: int
    covered_causes: int
    total_causes: int
    rule_count: int
    proposition_count: int

    @property
    def missed_causes(self) -> int:
        return self.total_causes - self.covered_causes

    @property
    def complexity(self) -> int:
        return self.rule_count + self.proposition_count

    def as_dict(self) -> dict:
        return {
            "selected_count": self.selected_count,
            "tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn,
            "covered_causes": self.covered_causes,
            "total_causes": self.total_causes,
            "missed_causes": self.missed_causes,
            "rule_count": self.rule_count,
            "proposition_count": self.proposition_count,
        }


#: objective dimensions available for session configuration, all minimized
DIMENSIONS = {
    "selected": lambda ev: ev.selected_count,
    "missed_causes": lambda ev: ev.missed_causes,
    "complexity": lambda ev: ev.complexity,
    "false_positives": lambda ev: ev.fp,
    "false_negatives": lambda ev: ev.fn,
    "rule_count": lambda ev: ev.rule_count,
    "proposition_count": lambda ev: ev.proposition_count,
}

DEFAULT_DIMENSIONS = ("selected", "missed_causes", "complexity")


@dataclass(frozen=True)
class ObjectiveSpace:
    """Fixed, ordered list of objective dimension names for a session."""

    dims: tuple = DEFAULT_DIMENSIONS

    def __post_init__(self):
        unknown = [d for d in self.dims if d not in DIMENSIONS]
        if unknown or not self.dims:
            raise ValueError(f"unknown objective dimensions: {unknown}")

    def vector(self, ev: EvaluationResult) -> tuple:
        return tuple(float(DIMENSIONS[d](ev)) for d in self.dims)

    def index(self, name: str) -> int:
        try:
            return self.dims.index(name)
        except ValueError:
            raise KeyError(f"no objective dimension {name!r}") from None


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """Strict Pareto dominance: componentwise <= with < somewhere."""
    if len(a) != len(b):
        raise ValueError(f"dimension mismatch: {len(a)} vs {len(b)}")
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


# ---------------------------------------------------------------------------
# Target functions


@dataclass(frozen=True)
class TargetFunction:
    """Scalarizes an evaluation into a single cost (lower is better).

    Kinds: ``precision`` (1 - tp/(tp+fp), 1.0 when nothing is selected),
    ``weighted`` (dot product with the objective vector) and ``dim``
    (one objective dimension, +inf outside the optional bounds).
    """

    kind: str = "precision"
    weights: tuple | None = None
    dim: int | None = None
    bounds: tuple | None = None  # per-dimension optional upper bounds, dim kind only

    def __post_init__(self):
        if self.kind == "weighted":
            if not self.weights or any(w < 0 for w in self.weights) or not any(self.weights):
                raise ValueError("weights must be nonnegative and not all zero")
        elif self.kind == "dim":
            if self.dim is None or self.dim < 0:
                raise ValueError("dim target needs a dimension index")
        elif self.kind != "precision":
            raise ValueError(f"unknown target function kind {self.kind!r}")

    def apply(self, ev: EvaluationResult, vector: Sequence[float]) -> float:
        if self.kind == "precision":
            predicted = ev.tp + ev.fp
            return 1.0 if predicted == 0 else 1.0 - ev.tp / predicted
        if self.kind == "weighted":
            if len(self.weights) != len(vector):
                raise ValueError("weight count does not match objective dimensions")
            return float(sum(w * v for w, v in zip(self.weights, vector)))
        if self.dim >= len(vector):
            raise ValueError("dimension index outside objective vector")
        if self.bounds is not None:
            for v, b in zip(vector, self.bounds):
                if b is not None and v > b:
                    return math.inf
        return float(vector[self.dim])

    def spec(self) -> str:
        if self.kind == "precision":
            return "precision"
        if self.kind == "weighted":
            return "weighted:" + ",".join(_fmt(w) for w in self.weights)
        out = f"dim:{self.dim}"
        if self.bounds is not None:
            out += ":" + ",".join("" if b is None else _fmt(b) for b in self.bounds)
        return out


def _fmt(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def parse_target(spec: str) -> TargetFunction:
    """Parse the structured-text form: ``precision``, ``weighted:1,10,0.1``,
    ``dim:1`` or ``dim:1:100,,5`` (empty slots mean unbounded)."""
    spec = spec.strip()
    if spec == "precision":
        return TargetFunction()
    head, _, rest = spec.partition(":")
    try:
        if head == "weighted":
            return TargetFunction("weighted", weights=tuple(float(w) for w in rest.split(",")))
        if head == "dim":
            idx, _, btext = rest.partition(":")
            bounds = None
            if btext:
                bounds = tuple(None if b == "" else float(b) for b in btext.split(","))
            return TargetFunction("dim", dim=int(idx), bounds=bounds)
    except ValueError as e:
        raise ValueError(f"malformed target function {spec!r}: {e}") from None
    raise ValueError(f"malformed target function {spec!r}")


# ---------------------------------------------------------------------------
# Hypervolume (used by the anytime acceptance checks)


def hypervolume(front: Sequence[Sequence[float]], ref: Sequence[float]) -> float:
    """Lebesgue measure of the union of boxes [v, ref] over the front.

    All vectors must be componentwise <= ref.  Exact on integer-valued
    inputs within float range.
    """
    pts = []
    for v in front:
        if len(v) != len(ref):
            raise ValueError("dimension mismatch against reference point")
        if any(x > r for x, r in zip(v, ref)):
            raise ValueError(f"vector {tuple(v)} exceeds reference {tuple(ref)}")
        pts.append(tuple(float(x) for x in v))
    return _hv(sorted(set(pts)), tuple(float(r) for r in ref))


def _hv(pts: list, ref: tuple) -> float:
    if not pts:
        return 0.0
    if len(ref) == 1:
        return ref[0] - pts[0][0]
    vol = 0.0
    for i, p in enumerate(pts):
        upper = pts[i + 1][0] if i + 1 < len(pts) else ref[0]
        width = upper - p[0]
        if width > 0:
            slab = sorted(set(q[1:] for q in pts[: i + 1]))
            vol += width * _hv(slab, ref[1:])
    return vol


# ---------------------------------------------------------------------------
# Vectorized evaluator with per-dataset caches


class Evaluator:
    """Evaluates rulesets against one dataset snapshot.

    Matching is column-vectorized; proposition, rule and result caches are
    keyed on the canonical objects.  Bound to one dataset version: a dataset
    mutation requires a fresh evaluator.
    """

    def __init__(self, dataset: Dataset, space: ObjectiveSpace = ObjectiveSpace()):
        self.dataset = dataset
        self.space = space
        self.version = dataset.version
        n = len(dataset.records)
        self._columns = {}
        for f in dataset.features:
            vals = [r.values[f.name] for r in dataset.records]
            if f.kind == "numeric":
                self._columns[f.name] = np.asarray(vals, dtype=np.float64)
            else:
                self._columns[f.name] = np.asarray(vals, dtype=object)
        self._positive = np.asarray([r.is_positive for r in dataset.records], dtype=bool)
        self._cause_index = {c: i for i, c in enumerate(sorted(dataset.causes))}
        self._record_causes = [
            np.asarray([self._cause_index[c] for c in r.cause_ids], dtype=np.intp)
            for r in dataset.records
        ]
        self._n = n
        self._prop_masks: dict = {}
        self._rule_masks: dict = {}
        self._results: dict = {}

    # -- matching ----------------------------------------------------------

    def prop_mask(self, prop) -> np.ndarray:
        mask = self._prop_masks.get(prop)
        if mask is None:
            col = self._columns[prop.feature]
            if prop.op == "=":
                mask = col == prop.value
            elif prop.op == "!=":
                mask = col != prop.value
            elif prop.op == "<=":
                mask = col <= prop.value
            else:
                mask = col >= prop.value
            mask = np.asarray(mask, dtype=bool)
            mask.setflags(write=False)
            self._prop_masks[prop] = mask
        return mask

    def rule_mask(self, rule) -> np.ndarray:
        mask = self._rule_masks.get(rule)
        if mask is None:
            mask = np.ones(self._n, dtype=bool)
            for p in rule.propositions:
                mask &= self.prop_mask(p)
            mask.setflags(write=False)
            self._rule_masks[rule] = mask
        return mask

    def match_mask(self, rs: RuleSet) -> np.ndarray:
        """Boolean selection vector; equals model.match_record per record."""
        mask = np.zeros(self._n, dtype=bool)
        for rule in rs.inclusions:
            mask |= self.rule_mask(rule)
        for rule in rs.exclusions:
            mask &= ~self.rule_mask(rule)
        return mask

    # -- evaluation ---------------------------------------------------------

    def evaluate(self, rs: RuleSet) -> EvaluationResult:
        got = self._results.get(rs)
        if got is not None:
            return got
        check_schema(rs, self.dataset)
        mask = self.match_mask(rs)
        selected = int(mask.sum())
        tp = int((mask & self._positive).sum())
        fp = selected - tp
        fn = int(self._positive.sum()) - tp
        tn = self._n - selected - fn
        covered = np.zeros(len(self._cause_index), dtype=bool)
        for i in np.flatnonzero(mask & self._positive):
            covered[self._record_causes[i]] = True
        rule_count, prop_count = complexity(rs)
        result = EvaluationResult(
            selected_count=selected, tp=tp, fp=fp, tn=tn, fn=fn,
            covered_causes=int(covered.sum()), total_causes=len(self._cause_index),
            rule_count=rule_count, proposition_count=prop_count,
        )
        self._results[rs] = result
        return result

    def vector(self, rs: RuleSet) -> tuple:
        return self.space.vector(self.evaluate(rs))

    def cost(self, tf: TargetFunction, rs: RuleSet) -> float:
        ev = self.evaluate(rs)
        return tf.apply(ev, self.space.vector(ev))
