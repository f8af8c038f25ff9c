"""Anytime mining workers.

Each agent loops: drain the local-search queue, then the path-relinking
queue, otherwise pick randomly between perfecting existing results and
generating fresh rule material.  All sharing goes through the blackboard;
the target function and restrictions are re-read every iteration so user
feedback takes effect at the next iteration boundary.
"""

from __future__ import annotations

import random
import threading
from dataclasses import dataclass, field

from .blackboard import Blackboard
from .generate import GenerationConfig, generate_new_ruleset
from .localsearch import local_search
from .model import RuleSet, combine_rulesets
from .pathrelink import path_relink

PICK_PERFECT_PR = 0.3
PICK_PERFECT_LS = 0.3
PICK_GENERATE = 0.4
COUNT_LIMIT_CAP = 30


@dataclass(frozen=True)
class AgentConfig:
    id: int
    rng_seed: int
    pick_probabilities: tuple = (PICK_PERFECT_PR, PICK_PERFECT_LS, PICK_GENERATE)
    iteration_cap: int = COUNT_LIMIT_CAP
    generation: GenerationConfig = field(default_factory=GenerationConfig)

    def __post_init__(self):
        if abs(sum(self.pick_probabilities) - 1.0) > 1e-9 or \
                any(p < 0 for p in self.pick_probabilities):
            raise ValueError("pick probabilities must be nonnegative and sum to 1")


@dataclass
class AgentStatus:
    id: int
    iterations: int = 0
    state: str = "running"
    last_action: str = ""
    evaluations_done: int = 0

    def as_dict(self) -> dict:
        return {"id": self.id, "iterations": self.iterations, "state": self.state,
                "last_action": self.last_action,
                "evaluations_done": self.evaluations_done}


class MiningAgent:
    """One worker; ``step()`` runs a single main-loop iteration so headless
    and replay harnesses can drive it deterministically."""

    def __init__(self, config: AgentConfig, blackboard: Blackboard, log=None):
        self.config = config
        self.bb = blackboard
        self.rng = random.Random(config.rng_seed)
        self.log = log
        self.status = AgentStatus(config.id)
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> None:
        self._thread = threading.Thread(
            target=self._run, name=f"agent-{self.config.id}", daemon=True)
        self._thread.start()

    def request_stop(self) -> None:
        self._stop.set()
        self.status.state = "stopping"

    def join(self, timeout=None) -> None:
        if self._thread is not None:
            self._thread.join(timeout)

    def _run(self) -> None:
        while not self._stop.is_set():
            self.step()
        self.status.state = "stopped"

    # -- one iteration of the main loop ----------------------------------------

    def step(self) -> None:
        self.status.iterations += 1
        tf = self.bb.target_function()
        view = self.bb.restrictions()

        item = self.bb.take_local_search()
        if item is not None:
            self.status.last_action = "local_search_queue"
            combined = combine_rulesets(item, self.bb.get_best_result(tf))
            self._offer_all(local_search(combined, tf, self.bb, view, self.rng))
            result = local_search(item, tf, self.bb, view, self.rng)
            self._offer_all(result)
            members = sorted(result.rulesets(), key=lambda rs: rs.text())
            if members:
                best = min(members, key=lambda rs: (self.bb.cost(rs, tf), rs.text()))
                self.bb.enqueue_path_relink(best)
                self.bb.enqueue_path_relink(self.rng.choice(members))
            self._log_iteration()
            return

        item = self.bb.take_path_relink()
        if item is not None:
            self.status.last_action = "path_relink_queue"
            path_relink(item, self.bb.get_best_result(tf), tf, self.bb, view,
                        self.rng, offer=self._offer)
            path_relink(item, self.bb.get_random_result(self.rng), tf, self.bb,
                        view, self.rng, offer=self._offer)
            self._log_iteration()
            return

        p_pr, p_ls, _ = self.config.pick_probabilities
        roll = self.rng.random()
        if roll < p_pr:
            self.status.last_action = "perfect_path_relink"
            path_relink(self.bb.get_best_result(tf),
                        self.bb.get_random_result(self.rng), tf, self.bb, view,
                        self.rng, offer=self._offer)
        elif roll < p_pr + p_ls:
            self.status.last_action = "perfect_local_search"
            start = self.bb.get_random_result(self.rng)
            self._offer_all(local_search(start, tf, self.bb, view, self.rng))
        else:
            self.status.last_action = "generate"
            count_limit = min(self.status.iterations, self.config.iteration_cap)
            rs = generate_new_ruleset(self.bb.dataset, self.config.generation,
                                      count_limit, view, self.rng)
            self._offer(rs)
            self.bb.enqueue_local_search(rs)
        self._log_iteration()

    # -- helpers ------------------------------------------------------------------

    def _offer(self, rs: RuleSet) -> str:
        self.status.evaluations_done += 1
        return self.bb.add_if_non_dominated(rs)

    def _offer_all(self, pareto_set) -> None:
        for rs in sorted(pareto_set.rulesets(), key=lambda r: r.text()):
            self._offer(rs)

    def _log_iteration(self) -> None:
        if self.log is not None:
            self.log.append(actor=f"agent-{self.config.id}", kind="iteration",
                            params={"iteration": self.status.iterations,
                                    "action": self.status.last_action},
                            seed=self.config.rng_seed,
                            digest=self.bb.front_digest())


class AgentPool:
    """Start/stop a set of threaded agents; stop is cooperative and idempotent."""

    def __init__(self, blackboard: Blackboard, log=None,
                 generation: GenerationConfig | None = None,
                 pick_probabilities: tuple = (PICK_PERFECT_PR, PICK_PERFECT_LS, PICK_GENERATE),
                 iteration_cap: int = COUNT_LIMIT_CAP):
        self.bb = blackboard
        self.log = log
        self.generation = generation or GenerationConfig()
        self.pick_probabilities = pick_probabilities
        self.iteration_cap = iteration_cap
        self.agents: list[MiningAgent] = []
        self._lock = threading.Lock()

    @property
    def running(self) -> bool:
        return any(a.status.state == "running" for a in self.agents)

    def start(self, n: int, base_seed: int) -> list:
        if n <= 0:
            raise ValueError("need at least one agent")
        with self._lock:
            if self.running:
                raise RuntimeError("already running")
            self.agents = [
                MiningAgent(AgentConfig(i, base_seed + i,
                                        pick_probabilities=self.pick_probabilities,
                                        iteration_cap=self.iteration_cap,
                                        generation=self.generation),
                            self.bb, self.log)
                for i in range(n)
            ]
            for agent in self.agents:
                agent.start()
            return [a.status for a in self.agents]

    def stop(self) -> None:
        with self._lock:
            for a in self.agents:
                a.request_stop()
            for a in self.agents:
                a.join(timeout=30)

    def statuses(self) -> list:
        return [a.status.as_dict() for a in self.agents]
