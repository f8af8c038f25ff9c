"""Shared state between mining agents and the user.

One lock guards the Pareto front, the work queues, restrictions, bounds and
the evaluation cache, so every operation here is atomic and linearizable;
readers get immutable snapshots.  Agents and the control client never hold
the lock across a search step, only across single operations.
"""

from __future__ import annotations

import hashlib
import random
import threading
from collections import deque
from dataclasses import dataclass

from .eval import Evaluator, ObjectiveSpace, TargetFunction, dominates
from .model import Dataset, Proposition, Rule, RuleSet

QUEUE_CAPACITY = 1024
FINGERPRINT_SAMPLE = 256


@dataclass(frozen=True)
class FrontEntry:
    ruleset: RuleSet
    evaluation: object
    vector: tuple

    @property
    def text(self) -> str:
        return self.ruleset.text()

    @property
    def digest(self) -> str:
        return ruleset_digest(self.ruleset)


def ruleset_digest(rs: RuleSet) -> str:
    return hashlib.sha256(rs.text().encode()).hexdigest()[:16]


@dataclass(frozen=True)
class PropositionPattern:
    """One pattern slot of a reject pattern; None fields are wildcards."""

    feature: str
    op: str | None = None
    value: object | None = None

    def matches(self, prop: Proposition) -> bool:
        if prop.feature != self.feature:
            return False
        if self.op is not None and prop.op != self.op:
            return False
        return self.value is None or prop.value == self.value


@dataclass(frozen=True)
class RejectPattern:
    """Forbids a rule when every slot is matched by some proposition of it."""

    slots: tuple

    def forbids(self, rule: Rule) -> bool:
        return all(any(s.matches(p) for p in rule.propositions) for s in self.slots)


@dataclass(frozen=True)
class RestrictionView:
    """Immutable snapshot of the restriction store for one search pass."""

    reject_patterns: tuple = ()
    accepted_rules: tuple = ()

    def is_forbidden(self, rule: Rule) -> bool:
        if rule in self.accepted_rules:
            return False
        return any(p.forbids(rule) for p in self.reject_patterns)

    def ruleset_allowed(self, rs: RuleSet) -> bool:
        return not any(self.is_forbidden(r) for r in rs.rules())

    def with_accepted(self, rs: RuleSet) -> RuleSet:
        """Normal form offered to the front: all accepted rules present."""
        if not self.accepted_rules:
            return rs
        return RuleSet(rs.inclusions + self.accepted_rules, rs.exclusions)


@dataclass(frozen=True)
class ObjectiveBounds:
    """Per-dimension optional upper bounds; entries outside stay on the front
    but are hidden from best/random selection and navigation."""

    upper: tuple = ()

    def __post_init__(self):
        if any(b is not None and b < 0 for b in self.upper):
            raise ValueError("bounds must be nonnegative")

    def contains(self, vector) -> bool:
        for v, b in zip(vector, self.upper):
            if b is not None and v > b:
                return False
        return True


class RestrictionConflict(ValueError):
    """Accepting a rule that an active reject pattern forbids."""


class Blackboard:
    """Pareto front, work queues, restrictions, bounds and evaluation cache."""

    def __init__(self, dataset: Dataset, space: ObjectiveSpace = ObjectiveSpace(),
                 target: TargetFunction = TargetFunction(),
                 queue_capacity: int = QUEUE_CAPACITY):
        self._lock = threading.RLock()
        self._space = space
        self._evaluator = Evaluator(dataset, space)
        self._target = target
        self._bounds = ObjectiveBounds(tuple(None for _ in space.dims))
        self._front: dict[RuleSet, FrontEntry] = {}
        self._ls_queue: deque = deque(maxlen=queue_capacity)
        self._pr_queue: deque = deque(maxlen=queue_capacity)
        self._restriction_seq = 0
        self._reject_patterns: dict[int, RejectPattern] = {}
        self._accepted: dict[int, Rule] = {}
        self._undo_cache: dict[int, tuple] = {}
        self._undo_kind: dict[int, str] = {}
        self._visited: set[Rule] = set()
        self.change_event = threading.Condition(self._lock)
        #: called under the lock with each newly inserted FrontEntry
        self.insert_listener = None

    # -- snapshots -----------------------------------------------------------

    @property
    def space(self) -> ObjectiveSpace:
        return self._space

    @property
    def dataset(self) -> Dataset:
        with self._lock:
            return self._evaluator.dataset

    def target_function(self) -> TargetFunction:
        with self._lock:
            return self._target

    def objective_bounds(self) -> ObjectiveBounds:
        with self._lock:
            return self._bounds

    def restrictions(self) -> RestrictionView:
        with self._lock:
            return RestrictionView(tuple(self._reject_patterns.values()),
                                   tuple(self._accepted.values()))

    def front_entries(self) -> tuple:
        with self._lock:
            return tuple(sorted(self._front.values(), key=lambda e: e.text))

    def front_digest(self) -> str:
        texts = sorted(e.text for e in self.front_entries())
        return hashlib.sha256("\n".join(texts).encode()).hexdigest()

    def evaluate(self, rs: RuleSet):
        with self._lock:
            return self._evaluator.evaluate(rs)

    def vector(self, rs: RuleSet) -> tuple:
        with self._lock:
            return self._evaluator.vector(rs)

    def cost(self, rs: RuleSet, tf: TargetFunction | None = None) -> float:
        with self._lock:
            return self._evaluator.cost(tf or self._target, rs)

    def visited_rules(self) -> frozenset:
        with self._lock:
            return frozenset(self._visited)

    # -- configuration --------------------------------------------------------

    def set_target_function(self, tf: TargetFunction) -> None:
        with self._lock:
            self._target = tf
            self.change_event.notify_all()

    def set_bounds(self, bounds: ObjectiveBounds) -> None:
        if len(bounds.upper) != len(self._space.dims):
            raise ValueError("bounds must cover every objective dimension")
        with self._lock:
            self._bounds = bounds
            self.change_event.notify_all()

    def set_dataset(self, dataset: Dataset) -> None:
        """Swap the dataset snapshot: cache dropped, front re-evaluated and
        rebuilt by dominance."""
        with self._lock:
            self._evaluator = Evaluator(dataset, self._space)
            old = list(self._front.values())
            self._front = {}
            for entry in old:
                self._insert(entry.ruleset)
            self.change_event.notify_all()

    def set_visited(self, rule: Rule, flag: bool = True) -> None:
        with self._lock:
            if not any(rule in e.ruleset.rules() for e in self._front.values()):
                raise KeyError(f"rule {rule.text()} not on the front")
            (self._visited.add if flag else self._visited.discard)(rule)

    # -- front insertion -------------------------------------------------------

    def add_if_non_dominated(self, rs: RuleSet) -> str:
        """Offer a ruleset to the front: 'added', 'dominated' or 'forbidden'."""
        with self._lock:
            view = RestrictionView(tuple(self._reject_patterns.values()),
                                   tuple(self._accepted.values()))
            rs = view.with_accepted(rs)
            if not view.ruleset_allowed(rs):
                return "forbidden"
            return self._insert(rs)

    def _insert(self, rs: RuleSet) -> str:
        if rs in self._front:
            return "dominated"
        vector = self._evaluator.vector(rs)
        # equal vectors coexist; only strict dominance rejects
        if any(dominates(e.vector, vector) for e in self._front.values()):
            return "dominated"
        beaten = [r for r, e in self._front.items() if dominates(vector, e.vector)]
        for r in beaten:
            del self._front[r]
        entry = FrontEntry(rs, self._evaluator.evaluate(rs), vector)
        self._front[rs] = entry
        if self.insert_listener is not None:
            self.insert_listener(entry)
        self.change_event.notify_all()
        return "added"

    # -- selection --------------------------------------------------------------

    def _in_bounds_entries(self) -> list:
        entries = sorted(self._front.values(), key=lambda e: e.text)
        within = [e for e in entries if self._bounds.contains(e.vector)]
        return within or entries

    def get_best_result(self, tf: TargetFunction | None = None) -> RuleSet:
        entry = self.get_best_entry(tf)
        return entry.ruleset if entry else RuleSet()

    def get_best_entry(self, tf: TargetFunction | None = None):
        with self._lock:
            tf = tf or self._target
            entries = [e for e in self._front.values() if self._bounds.contains(e.vector)]
            if not entries:
                return None
            return min(entries, key=lambda e: (
                tf.apply(e.evaluation, e.vector), e.evaluation.complexity, e.text))

    def get_random_result(self, rng: random.Random) -> RuleSet:
        with self._lock:
            entries = self._in_bounds_entries()
            if not entries:
                return RuleSet()
            return rng.choice(entries).ruleset

    # -- queues -----------------------------------------------------------------

    def enqueue_local_search(self, rs: RuleSet, priority: bool = False) -> None:
        with self._lock:
            if priority:
                self._ls_queue.appendleft(rs)
            else:
                self._ls_queue.append(rs)

    def enqueue_path_relink(self, rs: RuleSet) -> None:
        with self._lock:
            self._pr_queue.append(rs)

    def take_local_search(self) -> RuleSet | None:
        with self._lock:
            return self._ls_queue.popleft() if self._ls_queue else None

    def take_path_relink(self) -> RuleSet | None:
        with self._lock:
            return self._pr_queue.popleft() if self._pr_queue else None

    def queue_sizes(self) -> tuple:
        with self._lock:
            return len(self._ls_queue), len(self._pr_queue)

    # -- restrictions -------------------------------------------------------------

    def apply_reject(self, pattern: RejectPattern) -> tuple:
        """Activate a reject pattern; returns (restriction id, removed entries)."""
        with self._lock:
            self._restriction_seq += 1
            rid = self._restriction_seq
            self._reject_patterns[rid] = pattern
            view = RestrictionView(tuple(self._reject_patterns.values()),
                                   tuple(self._accepted.values()))
            removed = [e for e in self._front.values()
                       if not view.ruleset_allowed(e.ruleset)]
            for e in removed:
                del self._front[e.ruleset]
            self._undo_cache[rid] = tuple(removed)
            self._undo_kind[rid] = "reject"
            self._purge_queues(view)
            self.change_event.notify_all()
            return rid, tuple(removed)

    def apply_accept(self, rule: Rule) -> tuple:
        """Require a rule in every ruleset; front entries are extended with it
        and the front is rebuilt by dominance."""
        with self._lock:
            view = RestrictionView(tuple(self._reject_patterns.values()),
                                   tuple(self._accepted.values()))
            if view.is_forbidden(rule) or any(
                    p.forbids(rule) for p in self._reject_patterns.values()):
                raise RestrictionConflict(f"rule {rule.text()} is forbidden")
            self._restriction_seq += 1
            rid = self._restriction_seq
            before = tuple(sorted(self._front.values(), key=lambda e: e.text))
            self._accepted[rid] = rule
            self._front = {}
            for entry in before:
                self._insert(RuleSet(entry.ruleset.inclusions + (rule,),
                                     entry.ruleset.exclusions))
            self._undo_cache[rid] = before
            self._undo_kind[rid] = "accept"
            self.change_event.notify_all()
            return rid, before

    def undo(self, restriction_id: int) -> int:
        """Deactivate a restriction or trim and bring cached entries back.

        Reject undo reinserts removed entries (re-validated, re-evaluated)
        into the current front.  Accept undo restores the cached pre-accept
        front wholesale so accept-undo-accept round-trips bit-exactly.
        """
        with self._lock:
            kind = self._undo_kind.get(restriction_id)
            if kind is None:
                raise KeyError(f"unknown restriction id {restriction_id}")
            cached = self._undo_cache.pop(restriction_id)
            del self._undo_kind[restriction_id]
            restored = 0
            if kind == "reject":
                del self._reject_patterns[restriction_id]
            elif kind == "accept":
                del self._accepted[restriction_id]
                self._front = {}
            view = RestrictionView(tuple(self._reject_patterns.values()),
                                   tuple(self._accepted.values()))
            for entry in cached:
                rs = view.with_accepted(entry.ruleset)
                if view.ruleset_allowed(rs) and self._insert(rs) == "added":
                    restored += 1
            self.change_event.notify_all()
            return restored

    def undoable_ids(self) -> tuple:
        with self._lock:
            return tuple(sorted(self._undo_kind))

    def _purge_queues(self, view: RestrictionView) -> None:
        for q in (self._ls_queue, self._pr_queue):
            kept = [rs for rs in q if view.ruleset_allowed(rs)]
            q.clear()
            q.extend(kept)

    # -- front trimming -------------------------------------------------------------

    def trim_front(self, keep: int, sample_size: int = FINGERPRINT_SAMPLE,
                   seed: int = 0) -> int:
        """Shrink the front to ~keep entries.

        Always retains the per-dimension minima and the current target
        optimum, then one medoid per fingerprint cluster.  Removed entries go
        to the undo cache.
        """
        if keep < 1:
            raise ValueError("keep must be >= 1")
        with self._lock:
            entries = sorted(self._front.values(), key=lambda e: e.text)
            if keep >= len(entries):
                return 0
            protected = set()
            for d in range(len(self._space.dims)):
                protected.add(min(entries, key=lambda e: (e.vector[d], e.text)).ruleset)
            best = self.get_best_entry()
            if best is not None:
                protected.add(best.ruleset)
            pool = [e for e in entries if e.ruleset not in protected]
            slots = max(keep - len(protected), 0)
            kept = set(protected)
            if slots and pool:
                prints = self._fingerprints([e.ruleset for e in pool], sample_size, seed)
                for idx in _k_medoids(prints, min(slots, len(pool))):
                    kept.add(pool[idx].ruleset)
            removed = [e for e in entries if e.ruleset not in kept]
            for e in removed:
                del self._front[e.ruleset]
            if removed:
                self._restriction_seq += 1
                self._undo_cache[self._restriction_seq] = tuple(removed)
                self._undo_kind[self._restriction_seq] = "trim"
            self.change_event.notify_all()
            return len(removed)

    def _fingerprints(self, rulesets, sample_size: int, seed: int) -> list:
        n = len(self._evaluator.dataset.records)
        rng = random.Random(seed)
        idx = sorted(rng.sample(range(n), min(sample_size, n)))
        return [tuple(bool(b) for b in self._evaluator.match_mask(rs)[idx])
                for rs in rulesets]

    # -- navigation -------------------------------------------------------------------

    def entry_by_digest(self, digest: str):
        with self._lock:
            for e in self._front.values():
                if e.digest == digest:
                    return e
        return None

    def navigate(self, from_digest: str, dim: int, direction: int):
        """Neighboring in-bounds entry along one objective dimension."""
        with self._lock:
            entries = [e for e in self._front.values() if self._bounds.contains(e.vector)]
            entries.sort(key=lambda e: (e.vector[dim], e.text))
            pos = next((i for i, e in enumerate(entries) if e.digest == from_digest), None)
            if pos is None:
                return None
            pos += 1 if direction >= 0 else -1
            if pos < 0 or pos >= len(entries):
                return entries[max(0, min(pos, len(entries) - 1))] if entries else None
            return entries[pos]

    def best_in_dimension(self, dim: int):
        with self._lock:
            entries = [e for e in self._front.values() if self._bounds.contains(e.vector)]
            if not entries:
                return None
            return min(entries, key=lambda e: (e.vector[dim], e.text))

    # -- snapshot support ---------------------------------------------------------

    @property
    def lock(self) -> threading.RLock:
        """User-action modules hold this while logging + applying, so no
        effect is observable before its log entry is written."""
        return self._lock

    def export_state(self) -> dict:
        with self._lock:
            return {
                "dims": list(self._space.dims),
                "front": [e.text for e in sorted(self._front.values(), key=lambda e: e.text)],
                "reject_patterns": [
                    {"id": rid, "slots": [{"feature": s.feature, "op": s.op, "value": s.value}
                                          for s in p.slots]}
                    for rid, p in sorted(self._reject_patterns.items())],
                "accepted": [{"id": rid, "rule": r.text()}
                             for rid, r in sorted(self._accepted.items())],
                "restriction_seq": self._restriction_seq,
                "undo": [{"id": rid, "kind": self._undo_kind[rid],
                          "rulesets": [e.text for e in entries]}
                         for rid, entries in sorted(self._undo_cache.items())],
                "bounds": list(self._bounds.upper),
                "target": self._target.spec(),
                "visited": sorted(r.text() for r in self._visited),
            }

    def restore_state(self, data: dict, dataset: Dataset) -> None:
        from .eval import parse_target
        from .model import parse_ruleset

        def rule_of(text: str) -> Rule:
            rs = parse_ruleset(text, dataset.features)
            if len(rs.inclusions) != 1 or rs.exclusions:
                raise ValueError(f"not a single rule: {text!r}")
            return rs.inclusions[0]

        with self._lock:
            if tuple(data.get("dims", self._space.dims)) != self._space.dims:
                raise ValueError("snapshot objective dimensions do not match the session")
            self._evaluator = Evaluator(dataset, self._space)
            self._target = parse_target(data["target"])
            self._bounds = ObjectiveBounds(tuple(data["bounds"]))
            self._reject_patterns = {
                p["id"]: RejectPattern(tuple(
                    PropositionPattern(s["feature"], s.get("op"), s.get("value"))
                    for s in p["slots"]))
                for p in data["reject_patterns"]}
            self._accepted = {a["id"]: rule_of(a["rule"]) for a in data["accepted"]}
            self._restriction_seq = data["restriction_seq"]
            self._front = {}
            for text in data["front"]:
                rs = parse_ruleset(text, dataset.features)
                if self._insert(rs) != "added":
                    raise ValueError(f"snapshot front holds a dominated entry: {text}")
            self._undo_cache, self._undo_kind = {}, {}
            for u in data["undo"]:
                entries = []
                for text in u["rulesets"]:
                    rs = parse_ruleset(text, dataset.features)
                    entries.append(FrontEntry(rs, self._evaluator.evaluate(rs),
                                              self._evaluator.vector(rs)))
                self._undo_cache[u["id"]] = tuple(entries)
                self._undo_kind[u["id"]] = u["kind"]
            self._visited = {rule_of(t) for t in data["visited"]}
            self._ls_queue.clear()
            self._pr_queue.clear()
            self.change_event.notify_all()


def fingerprint_distance(a, b) -> int:
    return sum(x != y for x, y in zip(a, b))


def _k_medoids(points: list, k: int, max_rounds: int = 20) -> list:
    """Deterministic PAM-style k-medoids on precomputed fingerprints."""
    n = len(points)
    if k >= n:
        return list(range(n))
    dist = [[fingerprint_distance(points[i], points[j]) for j in range(n)]
            for i in range(n)]
    # BUILD: greedily add the medoid reducing total assignment cost most
    medoids: list[int] = []
    while len(medoids) < k:
        best_i, best_cost = None, None
        for i in range(n):
            if i in medoids:
                continue
            trial = medoids + [i]
            cost = sum(min(dist[j][m] for m in trial) for j in range(n))
            if best_cost is None or cost < best_cost:
                best_i, best_cost = i, cost
        medoids.append(best_i)
    # SWAP: replace a medoid while that lowers total cost
    def total(ms):
        return sum(min(dist[j][m] for m in ms) for j in range(n))

    cost = total(medoids)
    for _ in range(max_rounds):
        improved = False
        for mi, m in enumerate(list(medoids)):
            for i in range(n):
                if i in medoids:
                    continue
                trial = list(medoids)
                trial[mi] = i
                c = total(trial)
                if c < cost:
                    medoids, cost, improved = trial, c, True
        if not improved:
            break
    return sorted(medoids)
