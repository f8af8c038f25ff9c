"""Greedy, randomized generation of candidate rulesets.

Each generated ruleset is built like a random-forest tree would be: on a
random feature subspace and a class-rebalanced record sample, with
separate-and-conquer loops for exclusions and inclusions whose rule counts
and search biases are drawn per call.  Class labels come from a greedy
randomized set-cover heuristic so that the T class is a small record subset
covering every cause.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np

from .blackboard import RestrictionView
from .model import (
    Dataset, NOMINAL, Proposition, Rule, RuleSet, RuleStructureError,
)

BIAS_KINDS = ("precision", "laplace", "m_estimate", "relative_cost")
RCL_SIZE = 3          # restricted candidate list for the set-cover picks
FORBIDDEN_RETRIES = 10
RANDOM_RULE_MAX_PROPS = 3


@dataclass(frozen=True)
class SearchBias:
    """Rule-quality heuristic guiding greedy top-down growth."""

    kind: str
    m: float = 0.0   # m_estimate only, > 0
    c: float = 0.0   # relative_cost only, in (0, 1)

    def __post_init__(self):
        if self.kind == "m_estimate" and self.m <= 0:
            raise ValueError("m must be positive")
        if self.kind == "relative_cost" and not 0 < self.c < 1:
            raise ValueError("c must be in (0, 1)")

    def score(self, tp, fp, pos_total: int, neg_total: int):
        """Vectorized over numpy arrays of tp/fp counts."""
        tp = np.asarray(tp, dtype=np.float64)
        fp = np.asarray(fp, dtype=np.float64)
        if self.kind == "precision":
            denom = tp + fp
            return np.divide(tp, denom, out=np.zeros_like(tp), where=denom > 0)
        if self.kind == "laplace":
            return (tp + 1.0) / (tp + fp + 2.0)
        if self.kind == "m_estimate":
            prior = pos_total / (pos_total + neg_total) if pos_total + neg_total else 0.0
            return (tp + self.m * prior) / (tp + fp + self.m)
        if self.kind == "relative_cost":
            pos_term = tp / pos_total if pos_total else np.zeros_like(tp)
            neg_term = fp / neg_total if neg_total else np.zeros_like(fp)
            return self.c * pos_term - (1.0 - self.c) * neg_term
        raise ValueError(f"bias {self.kind!r} has no score")


def draw_bias(rng: random.Random, random_rule_probability: float) -> SearchBias:
    """Bias per generated rule: usually one of the four literature heuristics,
    with a small probability of a fully random rule."""
    if rng.random() < random_rule_probability:
        return SearchBias("random_rule")
    kind = rng.choice(BIAS_KINDS)
    if kind == "m_estimate":
        return SearchBias(kind, m=math.exp(rng.uniform(0.0, math.log(64.0))))
    if kind == "relative_cost":
        return SearchBias(kind, c=rng.uniform(0.05, 0.95))
    return SearchBias(kind)


@dataclass(frozen=True)
class GenerationConfig:
    feature_keep_probability: float = 0.5
    max_sample_size: int = 10_000
    majority_ratio_range: tuple = (1.0, 3.0)
    random_rule_probability: float = 0.05
    count_limit_cap: int = 30

    def __post_init__(self):
        if not 0 < self.feature_keep_probability <= 1:
            raise ValueError("feature_keep_probability must be in (0, 1]")
        if not 0 < self.random_rule_probability <= 1:
            raise ValueError("random_rule_probability must be in (0, 1]")
        lo, hi = self.majority_ratio_range
        if lo > hi or lo < 0:
            raise ValueError("majority_ratio_range must be ordered and nonnegative")


# ---------------------------------------------------------------------------
# Set-cover labeling


def greedy_set_cover_label(ds: Dataset, rng: random.Random) -> dict:
    """Label a cause-covering record subset T and everything else F.

    Repeatedly picks uniformly from the top-3 records by newly-covered-cause
    count; records contributing nothing are never picked.  A causeless
    dataset labels everything F.
    """
    uncovered = set(ds.causes)
    chosen: set[str] = set()
    while uncovered:
        gains = [(len(r.cause_ids & uncovered), r.id) for r in ds.records
                 if r.id not in chosen and r.cause_ids & uncovered]
        if not gains:
            break  # remaining causes are linked to no record
        gains.sort(key=lambda g: (-g[0], g[1]))
        _, picked = gains[rng.randrange(min(RCL_SIZE, len(gains)))]
        chosen.add(picked)
        uncovered -= ds.record_by_id[picked].cause_ids
    return {r.id: r.id in chosen for r in ds.records}


# ---------------------------------------------------------------------------
# Labeled sample with per-feature candidate precomputation


class LabeledSample:
    """Record sample with binary labels, vectorized for greedy rule growth."""

    def __init__(self, features, records, labels):
        self.features = tuple(features)
        self.records = tuple(records)
        self.labels = np.asarray(labels, dtype=bool)
        self.n = len(self.records)
        self._nominal: dict[str, tuple] = {}   # name -> (codes, values)
        self._numeric: dict[str, tuple] = {}   # name -> (order, sorted_vals, cut_pos, thresholds)
        for f in self.features:
            col = [r.values[f.name] for r in self.records]
            if f.kind == NOMINAL:
                values, codes = np.unique(np.asarray(col, dtype=object), return_inverse=True)
                self._nominal[f.name] = (codes, values)
            else:
                arr = np.asarray(col, dtype=np.float64)
                order = np.argsort(arr, kind="stable")  # NaN faults sort last
                sv = arr[order]
                cut = np.flatnonzero(sv[:-1] != sv[1:])
                cut = cut[np.isfinite(sv[cut]) & np.isfinite(sv[cut + 1])]
                self._numeric[f.name] = (order, sv, cut, (sv[cut] + sv[cut + 1]) / 2.0)

    def prop_mask(self, prop: Proposition) -> np.ndarray:
        if prop.op in ("=", "!="):
            codes, values = self._nominal[prop.feature]
            hit = np.flatnonzero(values == prop.value)
            mask = codes == hit[0] if len(hit) else np.zeros(self.n, dtype=bool)
            return mask if prop.op == "=" else ~mask
        order, sv, _, _ = self._numeric[prop.feature]
        col = np.empty(self.n)
        col[order] = sv
        return col <= prop.value if prop.op == "<=" else col >= prop.value

    def rule_mask(self, rule: Rule) -> np.ndarray:
        mask = np.ones(self.n, dtype=bool)
        for p in rule.propositions:
            mask &= self.prop_mask(p)
        return mask

    def thresholds(self, feature: str) -> np.ndarray:
        return self._numeric[feature][3]

    def nominal_values(self, feature: str):
        return self._nominal[feature][1]


def sample_from_dataset(ds: Dataset, features, record_ids, label_map) -> LabeledSample:
    records = [ds.record_by_id[i] for i in record_ids]
    return LabeledSample(features, records, [label_map[i] for i in record_ids])


# ---------------------------------------------------------------------------
# Greedy top-down rule search


def find_rule_greedy_top_down(sample: LabeledSample, target_label: bool,
                              bias: SearchBias, rng: random.Random,
                              active: np.ndarray | None = None) -> Rule | None:
    """Grow one conjunction from empty, adding the bias-best proposition.

    Stops when no remaining false positive is covered or no proposition
    strictly improves the score; None when the empty conjunction cannot be
    improved at all.  ``active`` restricts counting to a record subset (the
    still-uncovered part during separate-and-conquer).
    """
    if sample.n == 0:
        return None
    if bias.kind == "random_rule":
        return _random_rule(sample, rng)
    covered = np.ones(sample.n, dtype=bool) if active is None else active.copy()
    target = sample.labels == target_label
    pos_total = int((covered & target).sum())
    neg_total = int((covered & ~target).sum())
    if pos_total == 0:
        return None
    score = float(bias.score(pos_total, neg_total, pos_total, neg_total))
    props: list[Proposition] = []
    used_eq: set[str] = set()
    while True:
        best = _best_candidate(sample, covered, target, bias, pos_total, neg_total,
                               score, used_eq)
        if best is None:
            break
        prop, score = best
        props.append(prop)
        if prop.op == "=":
            used_eq.add(prop.feature)
        covered &= sample.prop_mask(prop)
        if not (covered & ~target).any():
            break
    return Rule(tuple(props)) if props else None


def _best_candidate(sample, covered, target, bias, P, N, current_score, used_eq):
    """Scan every proposition candidate; candidates must keep tp >= 1 and
    strictly beat the current score.  Numeric thresholds are the midpoints of
    adjacent distinct sample values, counted via cumulative sums."""
    w_t = covered & target
    w_f = covered & ~target
    best_prop, best_score, best_tp = None, current_score, -1.0

    def offer(op, feature, candidate_values, tp, fp):
        nonlocal best_prop, best_score, best_tp
        scores = np.where(tp >= 1, bias.score(tp, fp, P, N), -np.inf)
        # exact score ties break towards larger coverage, then first candidate
        i = int(np.lexsort((tp, scores))[-1])
        if scores[i] > best_score or (scores[i] == best_score and tp[i] > best_tp):
            best_prop = Proposition(feature, op, candidate_values[i])
            best_score, best_tp = float(scores[i]), float(tp[i])

    for f in sample.features:
        if f.kind == NOMINAL:
            codes, values = sample._nominal[f.name]
            k = len(values)
            if k == 0:
                continue
            tp_eq = np.bincount(codes[w_t], minlength=k).astype(np.float64)
            fp_eq = np.bincount(codes[w_f], minlength=k).astype(np.float64)
            tokens = [str(v) for v in values]
            if f.name not in used_eq:
                offer("=", f.name, tokens, tp_eq, fp_eq)
            offer("!=", f.name, tokens, w_t.sum() - tp_eq, w_f.sum() - fp_eq)
        else:
            order, sv, cut, thresholds = sample._numeric[f.name]
            if len(thresholds) == 0:
                continue
            ct = np.cumsum(w_t[order].astype(np.int64))
            cf = np.cumsum(w_f[order].astype(np.int64))
            last = int(np.isfinite(sv).sum()) - 1  # NaN rows match no threshold
            tp_le, fp_le = ct[cut].astype(np.float64), cf[cut].astype(np.float64)
            floats = [float(t) for t in thresholds]
            offer("<=", f.name, floats, tp_le, fp_le)
            offer(">=", f.name, floats, ct[last] - tp_le, cf[last] - fp_le)
    if best_prop is None or best_score <= current_score:
        return None
    return best_prop, best_score


def random_proposition(sample: LabeledSample, rng: random.Random) -> Proposition | None:
    f = sample.features[rng.randrange(len(sample.features))]
    if f.kind == NOMINAL:
        values = sample.nominal_values(f.name)
        if len(values) == 0:
            return None
        return Proposition(f.name, rng.choice(["=", "!="]), str(rng.choice(list(values))))
    thresholds = sample.thresholds(f.name)
    pool = list(thresholds) if len(thresholds) else list(sample._numeric[f.name][1][:1])
    if not pool:
        return None
    return Proposition(f.name, rng.choice(["<=", ">="]), float(rng.choice(pool)))


def _random_rule(sample: LabeledSample, rng: random.Random) -> Rule | None:
    for _ in range(5):
        props = []
        for _ in range(rng.randint(1, RANDOM_RULE_MAX_PROPS)):
            p = random_proposition(sample, rng)
            if p is not None:
                props.append(p)
        if not props:
            return None
        try:
            return Rule(tuple(props))
        except RuleStructureError:
            continue
    return None


# ---------------------------------------------------------------------------
# Whole-ruleset generation


def generate_new_ruleset(ds: Dataset, config: GenerationConfig, count_limit: int,
                         restrictions: RestrictionView, rng: random.Random) -> RuleSet:
    """One randomized separate-and-conquer pass for exclusions, one for
    inclusions, on a fresh feature subspace and record sample; forbidden
    rules are re-drawn a bounded number of times."""
    count_limit = max(0, min(count_limit, config.count_limit_cap))
    label_map = greedy_set_cover_label(ds, rng)

    features = [f for f in ds.features if rng.random() < config.feature_keep_probability]
    if not features:
        features = [ds.features[rng.randrange(len(ds.features))]]

    sample = _sample_records(ds, features, label_map, config, rng)
    ruleset = RuleSet()
    for target_label, attach in ((False, RuleSet.with_exclusion),
                                 (True, RuleSet.with_inclusion)):
        max_rules = rng.randint(0, count_limit)
        uncovered = np.ones(sample.n, dtype=bool)
        rules = 0
        while rules < max_rules:
            rule = _next_allowed_rule(sample, target_label, uncovered, config,
                                      restrictions, rng)
            if rule is None:
                break
            ruleset = attach(ruleset, rule)
            rules += 1
            uncovered &= ~sample.rule_mask(rule)
    return restrictions.with_accepted(ruleset)


def _next_allowed_rule(sample, target_label, uncovered, config, restrictions, rng):
    for _ in range(FORBIDDEN_RETRIES):
        bias = draw_bias(rng, config.random_rule_probability)
        rule = find_rule_greedy_top_down(sample, target_label, bias, rng, uncovered)
        if rule is None:
            return None
        if not restrictions.is_forbidden(rule):
            return rule
    return None


def _sample_records(ds, features, label_map, config, rng) -> LabeledSample:
    t_ids = sorted(i for i, lab in label_map.items() if lab)
    f_ids = sorted(i for i, lab in label_map.items() if not lab)
    minority, majority = (t_ids, f_ids) if len(t_ids) <= len(f_ids) else (f_ids, t_ids)
    if minority:
        ratio = rng.uniform(*config.majority_ratio_range)
        want = max(1, min(len(majority), int(round(ratio * len(minority)))))
        majority = rng.sample(majority, want)
    ids = minority + majority
    if len(ids) > config.max_sample_size:
        ids = rng.sample(ids, config.max_sample_size)
    return sample_from_dataset(ds, features, sorted(ids), label_map)
