"""Action diffs, first-improvement stepping and relink walk contracts."""

import random

from covermine.blackboard import Blackboard, RestrictionView
from covermine.eval import Evaluator, TargetFunction, dominates
from covermine.model import Proposition, Rule, RuleSet
from covermine.pathrelink import (
    ADD_EXCLUSION, ADD_INCLUSION, REMOVE_EXCLUSION, REMOVE_INCLUSION,
    RelinkAction, determine_good_action, diff_actions, path_relink,
)

PRECISION = TargetFunction()
FREE = RestrictionView()


def nrule(op, value):
    return Rule((Proposition("size", op, float(value)),))


A, B, C = nrule("<=", 2), nrule("<=", 5), nrule(">=", 9)


class NoShuffle(random.Random):
    def shuffle(self, seq):
        pass


# ---------------------------------------------------------------------------
# diffActions


def test_diff_is_set_difference_per_list():
    start, end = RuleSet((A, B)), RuleSet((B, C))
    actions = set(diff_actions(start, end))
    assert actions == {RelinkAction(REMOVE_INCLUSION, A), RelinkAction(ADD_INCLUSION, C)}


def test_diff_of_identical_rulesets_is_empty():
    assert diff_actions(RuleSet((A,)), RuleSet((A,))) == ()


def test_diff_carries_exclusion_kind():
    start = RuleSet((A,), (B,))
    end = RuleSet((A,), (C,))
    kinds = {a.kind for a in diff_actions(start, end)}
    assert kinds == {REMOVE_EXCLUSION, ADD_EXCLUSION}


def test_diff_never_removes_accepted_rules():
    view = RestrictionView(accepted_rules=(A,))
    actions = diff_actions(RuleSet((A, B)), RuleSet((C,)), view)
    assert RelinkAction(REMOVE_INCLUSION, A) not in actions
    assert RelinkAction(REMOVE_INCLUSION, B) in actions


def test_applying_all_actions_reaches_end():
    start, end = RuleSet((A,), (B,)), RuleSet((B, C), ())
    current = start
    for action in diff_actions(start, end):
        current = action.apply(current)
    assert current == end


# ---------------------------------------------------------------------------
# determineGoodAction


def test_first_improvement_returns_without_scanning_rest(fig1):
    engine = Evaluator(fig1)
    good = Rule((Proposition("lang", "=", "java"), Proposition("size", "<=", 5.0)))
    actions = (RelinkAction(ADD_INCLUSION, good),
               RelinkAction(ADD_INCLUSION, C))
    offered = []
    action = determine_good_action(RuleSet(), actions, PRECISION, engine,
                                   NoShuffle(), offer=offered.append)
    assert action == actions[0]
    assert len(offered) == 1  # exactly one candidate evaluated beyond current


def test_least_bad_tie_broken_by_dominance(fig1):
    engine = Evaluator(fig1)
    i5_only = Rule((Proposition("size", "<=", 9.0), Proposition("size", ">=", 9.0)))
    current = RuleSet((i5_only,))  # matches causeless I5, precision cost 1.0
    clunky = Rule((Proposition("size", ">=", 100.0), Proposition("size", "<=", 0.0)))
    lean = Rule((Proposition("lang", "=", "nosuch"),))
    actions = (RelinkAction(ADD_INCLUSION, clunky), RelinkAction(ADD_INCLUSION, lean))
    # oracle: equal costs, the lean candidate dominates the clunky one
    cost = {a: engine.cost(PRECISION, a.apply(current)) for a in actions}
    assert cost[actions[0]] == cost[actions[1]] >= engine.cost(PRECISION, current)
    assert dominates(engine.vector(actions[1].apply(current)),
                     engine.vector(actions[0].apply(current)))
    for seed in range(5):
        got = determine_good_action(current, actions, PRECISION, engine,
                                    random.Random(seed))
        assert got == actions[1]


def test_single_action_is_returned(fig1):
    engine = Evaluator(fig1)
    actions = (RelinkAction(ADD_INCLUSION, A),)
    assert determine_good_action(RuleSet(), actions, PRECISION, engine,
                                 random.Random(0)) == actions[0]


# ---------------------------------------------------------------------------
# pathRelink


def test_relink_identical_rulesets_is_a_noop(fig1):
    bb = Blackboard(fig1)
    start = RuleSet((A,))
    final, steps = path_relink(start, start, PRECISION, Evaluator(fig1), FREE,
                               random.Random(0), offer=bb.add_if_non_dominated)
    assert final == start and steps == 0
    assert bb.front_entries() == ()


def test_relink_takes_exactly_diff_many_steps(fig1):
    engine = Evaluator(fig1)
    start, end = RuleSet((A, B)), RuleSet((C,), (B,))
    n = len(diff_actions(start, end))
    assert n == 4
    final, steps = path_relink(start, end, PRECISION, engine, FREE, random.Random(1))
    assert steps == n and final == end


def test_relink_property_random_pairs(fig1):
    engine = Evaluator(fig1)
    rng = random.Random(5)
    pool = [A, B, C, nrule(">=", 3), nrule("<=", 7),
            Rule((Proposition("lang", "=", "java"),))]
    for trial in range(100):
        start = RuleSet(tuple(rng.sample(pool, rng.randint(0, 3))))
        end = RuleSet(tuple(rng.sample(pool, rng.randint(0, 3))))
        n = len(diff_actions(start, end))
        assert n <= 6
        final, steps = path_relink(start, end, PRECISION, engine, FREE, rng)
        assert steps == n and final == end


def test_relink_preserves_front_invariants(fig1):
    bb = Blackboard(fig1)
    good = Rule((Proposition("lang", "=", "java"), Proposition("size", "<=", 5.0)))
    start = RuleSet((good,))
    end = RuleSet((A, C), (B,))
    path_relink(start, end, PRECISION, Evaluator(fig1), FREE, random.Random(2),
                offer=bb.add_if_non_dominated)
    entries = bb.front_entries()
    assert entries
    for a in entries:
        for b in entries:
            if a is not b:
                assert not dominates(a.vector, b.vector)
