"""Anytime multi-objective rule mining with live expert feedback.

Parallel agents generate, locally optimize and recombine human-readable
rulesets over a shared Pareto-front blackboard with set-cover-aware costs;
a control client (HTTP service, CLI or the `RuleMiner` estimator) steers the
search and every step is replay-logged.
"""

from .blackboard import (
    Blackboard, FrontEntry, ObjectiveBounds, PropositionPattern, RejectPattern,
)
from .estimator import RuleMiner
from .eval import (
    EvaluationResult, Evaluator, ObjectiveSpace, TargetFunction, dominates,
    hypervolume, parse_target,
)
from .feedback import Session
from .generate import GenerationConfig
from .model import (
    Dataset, Feature, Proposition, Record, Rule, RuleSet, RuleStructureError,
    RuleSyntaxError, SchemaError, canonicalize, combine_rulesets, complexity,
    match_record, parse_ruleset,
)
from .persist import ReplayLog, load_dataset, load_snapshot, replay, save_snapshot

__version__ = "0.1.0"

__all__ = [
    "Blackboard", "Dataset", "EvaluationResult", "Evaluator", "Feature",
    "FrontEntry", "GenerationConfig", "ObjectiveBounds", "ObjectiveSpace",
    "Proposition", "PropositionPattern", "Record", "RejectPattern", "ReplayLog",
    "Rule", "RuleMiner", "RuleSet", "RuleStructureError", "RuleSyntaxError",
    "SchemaError", "Session", "TargetFunction", "canonicalize",
    "combine_rulesets", "complexity", "dominates", "hypervolume",
    "load_dataset", "load_snapshot", "match_record", "parse_ruleset",
    "parse_target", "replay", "save_snapshot",
]
