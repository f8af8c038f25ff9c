"""Multi-objective hill climbing over rulesets.

The walk starts from the empty ruleset (plus accepted rules), alternates
between a rule-adding neighborhood (candidate rules from the initial
ruleset) and a rule-adjusting neighborhood (mutations of the last added
rule), and keeps a local Pareto set of every visited ruleset.  Equal-cost
moves are only taken when the neighbor enters the Pareto set, which makes
the set double as a tabu list, and are bounded by a plateau limit.
"""

from __future__ import annotations

import bisect
import random
from dataclasses import dataclass

from .blackboard import RestrictionView
from .eval import TargetFunction, dominates
from .model import (
    Dataset, NOMINAL, Proposition, Rule, RuleSet, RuleStructureError,
)

PLATEAU_LIMIT = 8
RANDOM_ADDITIONS = 3

RULE_ADDING = "rule_adding"
RULE_ADJUSTING = "rule_adjusting"


@dataclass(frozen=True)
class PoolRule:
    """Candidate rule with its provenance list kept."""

    rule: Rule
    exclusion: bool


class LocalParetoSet:
    """Mutually non-dominated rulesets visited during one search."""

    def __init__(self):
        self._entries: dict[RuleSet, tuple] = {}

    def add(self, rs: RuleSet, vector: tuple) -> bool:
        if rs in self._entries:
            return False
        if any(dominates(v, vector) for v in self._entries.values()):
            return False
        for other, v in list(self._entries.items()):
            if dominates(vector, v):
                del self._entries[other]
        self._entries[rs] = vector
        return True

    def items(self) -> tuple:
        return tuple(self._entries.items())

    def rulesets(self) -> tuple:
        return tuple(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, rs: RuleSet) -> bool:
        return rs in self._entries


def rule_pool(initial: RuleSet) -> tuple:
    return tuple([PoolRule(r, False) for r in initial.inclusions]
                 + [PoolRule(r, True) for r in initial.exclusions])


def neighbors_adding(current: RuleSet, pool, restrictions: RestrictionView) -> list:
    """One neighbor per unused, allowed pool rule, appended to its list."""
    out = []
    for pr in pool:
        present = pr.rule in (current.exclusions if pr.exclusion else current.inclusions)
        if present or restrictions.is_forbidden(pr.rule):
            continue
        rs = current.with_exclusion(pr.rule) if pr.exclusion else current.with_inclusion(pr.rule)
        out.append((rs, pr))
    return out


def neighbors_adjusting(current: RuleSet, last: PoolRule, dataset: Dataset,
                        rng: random.Random, restrictions: RestrictionView,
                        random_additions: int = RANDOM_ADDITIONS) -> list:
    """Mutations of the last added rule: drop a proposition, move a numeric
    threshold to the adjacent distinct data value either way, or add a
    random proposition.  Accepted rules are never adjusted."""
    if last is None or last.rule in restrictions.accepted_rules:
        return []
    base = current.without(last.rule, last.exclusion)
    out = []

    def offer(new_rule: Rule | None):
        if new_rule is None:
            out.append((base, None))
            return
        if restrictions.is_forbidden(new_rule):
            return
        rs = base.with_exclusion(new_rule) if last.exclusion else base.with_inclusion(new_rule)
        if rs != current:
            out.append((rs, PoolRule(new_rule, last.exclusion)))

    props = last.rule.propositions
    for i, p in enumerate(props):
        rest = props[:i] + props[i + 1:]
        offer(Rule(rest) if rest else None)
        if p.op in ("<=", ">="):
            values = dataset.distinct_numeric_values(p.feature)
            lo = bisect.bisect_left(values, p.value) - 1
            hi = bisect.bisect_right(values, p.value)
            for j in (lo, hi):
                if 0 <= j < len(values) and values[j] != p.value:
                    offer(Rule(rest + (Proposition(p.feature, p.op, values[j]),)))
    for _ in range(random_additions):
        p = _random_dataset_proposition(dataset, rng)
        if p is None:
            continue
        try:
            offer(Rule(props + (p,)))
        except RuleStructureError:
            continue
    return out


def _random_dataset_proposition(dataset: Dataset, rng: random.Random) -> Proposition | None:
    f = dataset.features[rng.randrange(len(dataset.features))]
    if f.kind == NOMINAL:
        values = sorted({r.values[f.name] for r in dataset.records})
        if not values:
            return None
        return Proposition(f.name, rng.choice(["=", "!="]), rng.choice(values))
    values = dataset.distinct_numeric_values(f.name)
    if not values:
        return None
    if len(values) > 1:
        mids = [(a + b) / 2.0 for a, b in zip(values, values[1:])]
    else:
        mids = list(values)
    return Proposition(f.name, rng.choice(["<=", ">="]), rng.choice(mids))


def local_search(initial: RuleSet, tf: TargetFunction, engine,
                 restrictions: RestrictionView, rng: random.Random, *,
                 plateau_limit: int = PLATEAU_LIMIT,
                 random_additions: int = RANDOM_ADDITIONS,
                 trace: list | None = None) -> LocalParetoSet:
    """Hill-climb from the empty ruleset using the initial ruleset as the
    candidate pool; returns the local Pareto set of visited rulesets.

    ``engine`` needs ``evaluate(rs)``, ``space`` and ``dataset`` — both the
    evaluator and the blackboard qualify.
    """

    def measure(rs: RuleSet):
        ev = engine.evaluate(rs)
        vec = engine.space.vector(ev)
        return vec, tf.apply(ev, vec)

    pool = rule_pool(initial)
    result = LocalParetoSet()
    result.add(initial, measure(initial)[0])
    current = restrictions.with_accepted(RuleSet())
    cur_vec, cur_cost = measure(current)
    result.add(current, cur_vec)
    last: PoolRule | None = None
    neighborhood = RULE_ADDING
    plateau_streak = 0

    while True:
        if neighborhood == RULE_ADDING:
            moves = neighbors_adding(current, pool, restrictions)
        else:
            moves = neighbors_adjusting(current, last, engine.dataset, rng,
                                        restrictions, random_additions)
        rng.shuffle(moves)

        best = None
        best_cost, best_vec = cur_cost, cur_vec
        on_plateau = False
        for rs, moved_last in moves:
            vec, cost = measure(rs)
            added = result.add(rs, vec)
            if cost < best_cost or (cost == best_cost and added):
                best, best_cost, best_vec = (rs, moved_last), cost, vec
                on_plateau = vec == cur_vec

        too_long = on_plateau and plateau_streak >= plateau_limit
        if best is None or too_long:
            if neighborhood == RULE_ADJUSTING:
                neighborhood = RULE_ADDING
            else:
                break
        else:
            if best_cost < cur_cost:
                plateau_streak = 0
            elif on_plateau:
                plateau_streak += 1
            current, last = best
            cur_vec, cur_cost = best_vec, best_cost
            neighborhood = RULE_ADJUSTING
            if trace is not None:
                trace.append((current, cur_vec, cur_cost))
    return result
