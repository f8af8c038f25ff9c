"""Agent main-loop branches, lifecycle and determinism."""

import time

import pytest

from covermine.agent import AgentConfig, AgentPool, MiningAgent
from covermine.blackboard import Blackboard
from covermine.eval import hypervolume
from covermine.model import Proposition, Rule, RuleSet
from tests.conftest import fig1_dataset


def make_agent(bb, seed=7, pick=(0.3, 0.3, 0.4)):
    return MiningAgent(AgentConfig(0, seed, pick_probabilities=pick), bb)


def test_generate_branch_reaches_front_and_seeds_queue(fig1):
    bb = Blackboard(fig1)
    agent = make_agent(bb, pick=(0.0, 0.0, 1.0))
    agent.step()
    assert agent.status.last_action == "generate"
    assert bb.queue_sizes()[0] == 1
    # the generated ruleset was offered: front has it or it was dominated/empty
    assert agent.status.evaluations_done >= 1


def test_queue_item_feeds_path_relink_queue(fig1):
    bb = Blackboard(fig1)
    bb.enqueue_local_search(RuleSet((Rule((Proposition("lang", "=", "java"),)),)))
    agent = make_agent(bb)
    agent.step()
    assert agent.status.last_action == "local_search_queue"
    assert bb.queue_sizes() == (0, 2)  # best + one random member


def test_path_relink_branch_consumes_queue(fig1):
    bb = Blackboard(fig1)
    bb.add_if_non_dominated(RuleSet((Rule((Proposition("lang", "=", "java"),)),)))
    bb.enqueue_path_relink(RuleSet((Rule((Proposition("size", "<=", 2.0),)),)))
    agent = make_agent(bb)
    agent.step()
    assert agent.status.last_action == "path_relink_queue"
    assert bb.queue_sizes() == (0, 0)


def test_stop_is_cooperative_and_idempotent(fig1):
    bb = Blackboard(fig1)
    pool = AgentPool(bb)
    statuses = pool.start(2, base_seed=7)
    assert [s.id for s in statuses] == [0, 1]
    assert {a.config.rng_seed for a in pool.agents} == {7, 8}
    with pytest.raises(RuntimeError, match="already running"):
        pool.start(1, base_seed=0)
    time.sleep(0.2)
    pool.stop()
    assert all(a.status.state == "stopped" for a in pool.agents)
    pool.stop()  # no-op on a stopped system
    assert all(s["iterations"] >= 1 for s in pool.statuses())


def test_pool_rejects_nonpositive_agent_count(fig1):
    with pytest.raises(ValueError):
        AgentPool(Blackboard(fig1)).start(0, base_seed=1)


def test_single_agent_fixed_seed_is_deterministic():
    digests = []
    for _ in range(2):
        bb = Blackboard(fig1_dataset())
        agent = make_agent(bb, seed=123)
        for _ in range(200):
            agent.step()
        digests.append(bb.front_digest())
    assert digests[0] == digests[1]


def test_hypervolume_never_decreases_across_iterations(fig1):
    bb = Blackboard(fig1)
    agent = make_agent(bb, seed=5)
    ref = (float(len(fig1)), float(len(fig1.causes)), 10_000.0)
    previous = 0.0
    for _ in range(60):
        agent.step()
        hv = hypervolume([e.vector for e in bb.front_entries()], ref)
        assert hv >= previous
        previous = hv
    assert previous > 0.0
