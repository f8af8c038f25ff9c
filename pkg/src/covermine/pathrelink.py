"""Path relinking: walk the action lattice between two rulesets.

The difference between start and end decomposes into independent add/remove
rule actions.  Each step applies the first action that strictly improves the
target function, otherwise the least bad one (Pareto dominance, then
canonical order, breaks exact cost ties).  Every candidate seen along the
way is offered to the shared front.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable

from .blackboard import RestrictionView
from .eval import TargetFunction, dominates
from .model import Rule, RuleSet

ADD_INCLUSION = "add_inclusion"
REMOVE_INCLUSION = "remove_inclusion"
ADD_EXCLUSION = "add_exclusion"
REMOVE_EXCLUSION = "remove_exclusion"


@dataclass(frozen=True)
class RelinkAction:
    kind: str
    rule: Rule

    def apply(self, rs: RuleSet) -> RuleSet:
        if self.kind == ADD_INCLUSION:
            return rs.with_inclusion(self.rule)
        if self.kind == REMOVE_INCLUSION:
            return rs.without(self.rule, exclusion=False)
        if self.kind == ADD_EXCLUSION:
            return rs.with_exclusion(self.rule)
        return rs.without(self.rule, exclusion=True)


def diff_actions(start: RuleSet, end: RuleSet,
                 restrictions: RestrictionView = RestrictionView()) -> tuple:
    """Set difference per rule list; removals of accepted rules and additions
    of forbidden rules are filtered out here."""
    actions = []
    for adder, remover, mine, theirs in (
            (ADD_INCLUSION, REMOVE_INCLUSION, set(start.inclusions), set(end.inclusions)),
            (ADD_EXCLUSION, REMOVE_EXCLUSION, set(start.exclusions), set(end.exclusions))):
        for rule in mine - theirs:
            if rule not in restrictions.accepted_rules:
                actions.append(RelinkAction(remover, rule))
        for rule in theirs - mine:
            if not restrictions.is_forbidden(rule):
                actions.append(RelinkAction(adder, rule))
    return tuple(sorted(actions, key=lambda a: (a.kind, a.rule.text())))


def determine_good_action(current: RuleSet, actions, tf: TargetFunction, engine,
                          rng: random.Random,
                          offer: Callable[[RuleSet], object] | None = None) -> RelinkAction:
    """First action that strictly improves the cost, in shuffled order;
    otherwise the least bad one."""

    def measure(rs: RuleSet):
        ev = engine.evaluate(rs)
        vec = engine.space.vector(ev)
        return vec, tf.apply(ev, vec)

    order = list(actions)
    rng.shuffle(order)
    _, current_cost = measure(current)
    best = None
    for action in order:
        candidate = action.apply(current)
        if offer is not None:
            offer(candidate)
        vec, cost = measure(candidate)
        if cost < current_cost:
            return action  # first improvement keeps evaluation count down
        text = candidate.text()
        if best is None or cost < best[1]:
            best = (action, cost, vec, text)
        elif cost == best[1]:
            if dominates(vec, best[2]) or (not dominates(best[2], vec) and text < best[3]):
                best = (action, cost, vec, text)
    return best[0]


def path_relink(start: RuleSet, end: RuleSet, tf: TargetFunction, engine,
                restrictions: RestrictionView, rng: random.Random,
                offer: Callable[[RuleSet], object] | None = None) -> tuple:
    """Apply good actions until none remain; returns (final ruleset, steps).

    Takes exactly one step per difference action, so the walk visits
    |diff| intermediates and lands on the end ruleset.
    """
    actions = list(diff_actions(start, end, restrictions))
    current = start
    steps = 0
    while actions:
        action = determine_good_action(current, tuple(actions), tf, engine, rng, offer)
        current = action.apply(current)
        actions.remove(action)
        steps += 1
    return current, steps
