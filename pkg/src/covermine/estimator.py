"""Scikit-learn compatible facade over the mining engine.

`RuleMiner` runs a seeded, iteration-budgeted mining session at fit time and
predicts with the best ruleset found under the configured target function.
The full Pareto front stays available on ``front_`` for inspection, so the
estimator composes with sklearn tooling without hiding the multi-objective
result.
"""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .agent import AgentConfig, MiningAgent
from .blackboard import Blackboard
from .eval import DEFAULT_DIMENSIONS, ObjectiveSpace, parse_target
from .model import Dataset, Feature, Record, RuleSet, match_record, parse_ruleset


class RuleMiner(BaseEstimator, ClassifierMixin):
    """Anytime rule miner with a fit/predict surface.

    Parameters
    ----------
    n_iterations : agent main-loop iterations to spend at fit time.
    random_state : seed for the single mining agent (fits are reproducible).
    target : target-function spec steering the search, e.g. ``precision``
        or ``weighted:1,10,0.1``.
    selection : how the multi-objective front collapses into the predicting
        ruleset: ``error`` (fewest fp+fn, then simplest) or ``target``
        (minimize the target function).
    dimensions : objective dimension names (all minimized).
    feature_names : names for array inputs; defaults to f0..fn-1.

    Attributes
    ----------
    best_ruleset_ : text of the ruleset minimizing the target function.
    front_ : list of dicts (ruleset text, objective vector, evaluation).
    """

    def __init__(self, n_iterations: int = 400, random_state: int = 0,
                 target: str = "precision", selection: str = "error",
                 dimensions: tuple = DEFAULT_DIMENSIONS, feature_names=None):
        self.n_iterations = n_iterations
        self.random_state = random_state
        self.target = target
        self.selection = selection
        self.dimensions = dimensions
        self.feature_names = feature_names

    # -- sklearn API -----------------------------------------------------------

    def fit(self, X, y):
        features, rows, ids = self._ingest(X)
        causes = self._causes(y, ids)
        records = [Record(rid, values, cause)
                   for rid, values, cause in zip(ids, rows, causes)]
        dataset = Dataset(features, records)
        bb = Blackboard(dataset, ObjectiveSpace(tuple(self.dimensions)),
                        parse_target(self.target))
        agent = MiningAgent(AgentConfig(0, int(self.random_state or 0)), bb)
        for _ in range(int(self.n_iterations)):
            agent.step()
        self._features = features
        self._best = self._select(bb)
        self.best_ruleset_ = self._best.text()
        self.front_ = [{"ruleset": e.text, "vector": list(e.vector),
                        "evaluation": e.evaluation.as_dict()}
                       for e in bb.front_entries()]
        self.n_features_in_ = len(features)
        self.classes_ = np.array([0, 1])
        return self

    def _select(self, bb: Blackboard):
        if self.selection == "target":
            return bb.get_best_result()
        if self.selection != "error":
            raise ValueError(f"unknown selection {self.selection!r}")
        entries = bb.front_entries()
        if not entries:
            return RuleSet()
        best = min(entries, key=lambda e: (
            e.evaluation.fp + e.evaluation.fn, e.evaluation.complexity, e.text))
        return best.ruleset

    def predict(self, X):
        check_is_fitted(self, "best_ruleset_")
        return self._apply(X, self._best)

    def predict_with(self, X, ruleset_text: str):
        """Predict with any ruleset from the front instead of the best one."""
        check_is_fitted(self, "best_ruleset_")
        return self._apply(X, parse_ruleset(ruleset_text, self._features))

    def _apply(self, X, rs: RuleSet):
        features, rows, ids = self._ingest(X, schema=self._features)
        out = np.zeros(len(rows), dtype=int)
        for i, (rid, values) in enumerate(zip(ids, rows)):
            out[i] = int(match_record(rs, Record(rid, values)))
        return out

    # -- input handling -----------------------------------------------------------

    def _ingest(self, X, schema=None):
        names, columns = self._columns_of(X)
        if schema is not None:
            want = [f.name for f in schema]
            if names != want:
                if len(names) != len(want):
                    raise ValueError(
                        f"expected {len(want)} features, got {len(names)}")
                names = want  # positional arrays adopt the fitted names
            features = list(schema)
        else:
            features = [Feature(n, self._kind_of(col))
                        for n, col in zip(names, columns)]
        rows = []
        n = len(columns[0]) if columns else 0
        for i in range(n):
            values = {}
            for f, col in zip(features, columns):
                values[f.name] = self._coerce(col[i], f)
            rows.append(values)
        return features, rows, [f"r{i}" for i in range(n)]

    def _columns_of(self, X):
        if hasattr(X, "columns") and hasattr(X, "iloc"):  # pandas frame
            names = [str(c) for c in X.columns]
            return names, [list(X[c]) for c in X.columns]
        arr = np.asarray(X, dtype=object)
        if arr.ndim != 2:
            raise ValueError("X must be two-dimensional")
        if self.feature_names is not None:
            names = [str(n) for n in self.feature_names]
            if len(names) != arr.shape[1]:
                raise ValueError("feature_names length does not match X")
        else:
            names = [f"f{i}" for i in range(arr.shape[1])]
        return names, [list(arr[:, j]) for j in range(arr.shape[1])]

    @staticmethod
    def _kind_of(column) -> str:
        for v in column:
            if isinstance(v, bool) or not isinstance(v, numbers.Real):
                return "nominal"
            if v is None or (isinstance(v, float) and np.isnan(v)):
                raise ValueError("missing values are forbidden")
        return "numeric"

    @staticmethod
    def _coerce(value, feature: Feature):
        if feature.kind == "numeric":
            if isinstance(value, bool) or not isinstance(value, numbers.Real):
                raise ValueError(
                    f"feature {feature.name!r} is numeric, got {value!r}")
            v = float(value)
            if np.isnan(v) or np.isinf(v):
                raise ValueError(f"feature {feature.name!r}: non-finite value")
            return v
        return str(value)

    @staticmethod
    def _causes(y, ids):
        causes = []
        for rid, label in zip(ids, list(y)):
            if isinstance(label, (set, frozenset, list, tuple)):
                causes.append(frozenset(str(c) for c in label))
            elif label:
                causes.append(frozenset({f"c:{rid}"}))
            else:
                causes.append(frozenset())
        if len(causes) != len(ids):
            raise ValueError("X and y length mismatch")
        return causes
