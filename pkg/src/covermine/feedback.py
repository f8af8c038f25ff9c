"""User steering operations with write-ahead logging.

Everything a control client can do funnels through a Session: target
function and bounds changes, ruleset submission, accept/reject/undo, front
trimming, visited marks, data cleaning (record removal, relabeling) and
computed features.  Each action is written to the replay log while the
blackboard lock is held, so no effect becomes observable before its entry.
"""

from __future__ import annotations

import math
import re

from .blackboard import Blackboard, PropositionPattern, RejectPattern
from .eval import parse_target
from .generate import GenerationConfig
from .model import (
    Dataset, Feature, Record, Rule, SchemaError, match_record, parse_ruleset,
)

NOMINAL_FAULT = "\x00fault"


class ForbiddenRuleError(ValueError):
    """Submitted ruleset contains a rule an active pattern forbids."""


def parse_rule(text: str, features) -> Rule:
    rs = parse_ruleset(text, features)
    if len(rs.inclusions) != 1 or rs.exclusions:
        raise SchemaError(f"expected a single rule, got {text!r}")
    return rs.inclusions[0]


class Session:
    """Binds a blackboard to the replay log and owns dataset mutations."""

    def __init__(self, blackboard: Blackboard, log,
                 generation_config: GenerationConfig | None = None):
        self.bb = blackboard
        self.log = log
        self.generation_config = generation_config or GenerationConfig()
        self.computed: dict[str, str] = {}

    # -- target function and bounds ------------------------------------------

    def set_target(self, spec: str) -> int:
        tf = parse_target(spec)
        with self.bb.lock:
            self.bb.set_target_function(tf)
            return self._log("set_target", {"spec": tf.spec()})

    def set_bounds(self, upper) -> int:
        from .blackboard import ObjectiveBounds
        bounds = ObjectiveBounds(tuple(upper))
        with self.bb.lock:
            self.bb.set_bounds(bounds)
            return self._log("set_bounds", {"upper": list(bounds.upper)})

    # -- rulesets and restrictions ----------------------------------------------

    def submit_ruleset(self, text: str) -> dict:
        rs = parse_ruleset(text, self.bb.dataset.features)
        view = self.bb.restrictions()
        for rule in rs.rules():
            if view.is_forbidden(rule):
                raise ForbiddenRuleError(
                    f"rule {rule.text()} is forbidden by an active reject pattern")
        with self.bb.lock:
            status = self.bb.add_if_non_dominated(rs)
            evaluation = self.bb.evaluate(view.with_accepted(rs))
            # user rulesets jump the queue for quick optimization feedback
            self.bb.enqueue_local_search(rs, priority=True)
            seq = self._log("submit_ruleset", {"text": rs.text()})
            return {"seq": seq, "status": status, "evaluation": evaluation.as_dict()}

    def reject(self, slots) -> dict:
        pattern = RejectPattern(tuple(self._slot(s) for s in slots))
        if not pattern.slots:
            raise ValueError("reject pattern needs at least one slot")
        with self.bb.lock:
            rid, removed = self.bb.apply_reject(pattern)
            seq = self._log("reject", {"slots": [
                {"feature": s.feature, "op": s.op, "value": s.value}
                for s in pattern.slots]})
            return {"seq": seq, "restriction_id": rid, "removed": len(removed)}

    def accept(self, rule_text: str) -> dict:
        rule = parse_rule(rule_text, self.bb.dataset.features)
        with self.bb.lock:
            rid, _ = self.bb.apply_accept(rule)
            seq = self._log("accept", {"rule": rule.text()})
            return {"seq": seq, "restriction_id": rid}

    def undo(self, restriction_id: int) -> dict:
        with self.bb.lock:
            restored = self.bb.undo(restriction_id)
            seq = self._log("undo", {"restriction_id": restriction_id})
            return {"seq": seq, "restored": restored}

    def trim(self, keep: int, sample_size: int = 256, seed: int = 0) -> dict:
        with self.bb.lock:
            removed = self.bb.trim_front(keep, sample_size, seed)
            seq = self._log("trim", {"keep": keep, "sample_size": sample_size,
                                     "seed": seed})
            return {"seq": seq, "removed": removed}

    def mark_visited(self, rule_text: str, flag: bool = True) -> int:
        rule = parse_rule(rule_text, self.bb.dataset.features)
        with self.bb.lock:
            self.bb.set_visited(rule, flag)
            return self._log("mark_visited", {"rule": rule.text(), "flag": flag})

    # -- data cleaning ---------------------------------------------------------------

    def remove_records(self, predicate_text: str) -> dict:
        predicate = parse_ruleset(predicate_text, self.bb.dataset.features)
        with self.bb.lock:
            ds = self.bb.dataset
            keep = [r for r in ds.records if not match_record(predicate, r)]
            removed = len(ds.records) - len(keep)
            if removed:
                self.bb.set_dataset(ds.derive(records=keep, causes=()))
            seq = self._log("remove_records", {"predicate": predicate.text()})
            return {"seq": seq, "removed": removed}

    def relabel(self, record_id: str, cause_ids) -> int:
        if record_id not in self.bb.dataset.record_by_id:
            raise KeyError(f"unknown record id {record_id!r}")
        with self.bb.lock:
            ds = self.bb.dataset
            records = [Record(r.id, r.values, frozenset(cause_ids)) if r.id == record_id
                       else r for r in ds.records]
            self.bb.set_dataset(ds.derive(records=records, causes=()))
            return self._log("relabel", {"record_id": record_id,
                                         "cause_ids": sorted(cause_ids)})

    def add_computed_feature(self, name: str, expression: str) -> int:
        if name in self.bb.dataset.feature_by_name or name in ("id", "causes", "label"):
            raise SchemaError(f"feature name {name!r} already in use")
        if not re.fullmatch(r"[A-Za-z_][\w.-]*", name):
            raise SchemaError(f"invalid feature name {name!r}")
        ast = parse_expression(expression)
        with self.bb.lock:
            ds = self.bb.dataset
            kind = type_check(ast, ds.feature_by_name)
            records = []
            for r in ds.records:
                value = evaluate_expression(ast, r.values, kind)
                records.append(Record(r.id, {**r.values, name: value}, r.cause_ids))
            features = ds.features + (Feature(name, kind),)
            self.bb.set_dataset(ds.derive(features=features, records=records))
            self.computed[name] = expression
            return self._log("add_computed_feature",
                             {"name": name, "expression": expression})

    # -- plumbing ---------------------------------------------------------------------

    def _log(self, kind: str, params: dict) -> int:
        # called with the blackboard lock held: the entry is durable before
        # the action's effects become observable to any other thread
        return self.log.append(actor="user", kind=kind, params=params,
                               digest=self.bb.front_digest())

    @staticmethod
    def _slot(s) -> PropositionPattern:
        if isinstance(s, PropositionPattern):
            return s
        return PropositionPattern(s["feature"], s.get("op"), s.get("value"))

    def apply_action(self, kind: str, params: dict):
        """Replay dispatch: apply one logged user action."""
        if kind == "set_target":
            return self.set_target(params["spec"])
        if kind == "set_bounds":
            return self.set_bounds(params["upper"])
        if kind == "submit_ruleset":
            return self.submit_ruleset(params["text"])
        if kind == "reject":
            return self.reject(params["slots"])
        if kind == "accept":
            return self.accept(params["rule"])
        if kind == "undo":
            return self.undo(params["restriction_id"])
        if kind == "trim":
            return self.trim(params["keep"], params.get("sample_size", 256),
                             params.get("seed", 0))
        if kind == "mark_visited":
            return self.mark_visited(params["rule"], params.get("flag", True))
        if kind == "remove_records":
            return self.remove_records(params["predicate"])
        if kind == "relabel":
            return self.relabel(params["record_id"], params["cause_ids"])
        if kind == "add_computed_feature":
            return self.add_computed_feature(params["name"], params["expression"])
        raise ValueError(f"unknown action kind {kind!r}")

    # -- snapshots ----------------------------------------------------------------------

    def export_state(self) -> dict:
        with self.bb.lock:
            ds = self.bb.dataset
            return {
                "dataset": {
                    "version": ds.version,
                    "features": [{"name": f.name, "kind": f.kind} for f in ds.features],
                    "records": [{"id": r.id,
                                 "values": {k: v for k, v in r.values.items()},
                                 "causes": sorted(r.cause_ids)} for r in ds.records],
                },
                "computed_features": dict(self.computed),
                "log_position": self.log.position(),
                "blackboard": self.bb.export_state(),
            }

    def restore_state(self, payload: dict) -> None:
        d = payload["dataset"]
        features = [Feature(f["name"], f["kind"]) for f in d["features"]]
        kinds = {f.name: f.kind for f in features}
        records = []
        for r in d["records"]:
            values = {k: (float(v) if kinds.get(k) == "numeric" else v)
                      for k, v in r["values"].items()}
            records.append(Record(r["id"], values, frozenset(r["causes"])))
        dataset = Dataset(features, records, version=d.get("version", 0))
        with self.bb.lock:
            self.bb.restore_state(payload["blackboard"], dataset)
            self.computed = dict(payload.get("computed_features", {}))


# ---------------------------------------------------------------------------
# Computed-feature expression language
#
# expr   := "if" expr "then" expr "else" expr | comparison
# comparison := arith [ ("="|"!="|"<="|">="|"<"|">") arith ]
# arith  := term { ("+"|"-") term } ; term := factor { ("*"|"/") factor }
# factor := number | string | feature | "(" expr ")" | "-" factor

_EXPR_TOKEN = re.compile(r"""
    \s*(?:
      (?P<num>\d+\.?\d*([eE][+-]?\d+)?|\.\d+) |
      (?P<str>"(?:[^"\\]|\\.)*") |
      (?P<name>[A-Za-z_][\w.-]*) |
      (?P<op><=|>=|!=|[=<>+\-*/()])
    )""", re.VERBOSE)

_KEYWORDS = ("if", "then", "else")


class ExpressionError(ValueError):
    pass


class _Fault(Exception):
    """Runtime numeric fault (e.g. division by zero)."""


def _expr_tokens(text: str):
    pos, out = 0, []
    while pos < len(text):
        m = _EXPR_TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            rest = text[pos:].strip()
            if not rest:
                break
            raise ExpressionError(f"unexpected character {rest[0]!r}")
        for kind in ("num", "str", "name", "op"):
            if m.group(kind) is not None:
                out.append((kind, m.group(kind)))
                break
        pos = m.end()
    return out


class _ExprParser:
    def __init__(self, text: str):
        self.tokens = _expr_tokens(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else (None, None)

    def take(self, value=None):
        kind, tok = self.peek()
        if kind is None or (value is not None and tok != value):
            raise ExpressionError(f"expected {value or 'a token'}, got {tok!r}")
        self.pos += 1
        return kind, tok

    def parse(self):
        node = self.expr()
        if self.peek()[0] is not None:
            raise ExpressionError(f"trailing input {self.peek()[1]!r}")
        return node

    def expr(self):
        if self.peek() == ("name", "if"):
            self.take()
            cond = self.expr()
            self.take("then")
            then = self.expr()
            self.take("else")
            return ("if", cond, then, self.expr())
        return self.comparison()

    def comparison(self):
        left = self.arith()
        kind, tok = self.peek()
        if kind == "op" and tok in ("=", "!=", "<=", ">=", "<", ">"):
            self.take()
            return ("cmp", tok, left, self.arith())
        return left

    def arith(self):
        node = self.term()
        while self.peek() == ("op", "+") or self.peek() == ("op", "-"):
            _, op = self.take()
            node = ("bin", op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek() == ("op", "*") or self.peek() == ("op", "/"):
            _, op = self.take()
            node = ("bin", op, node, self.factor())
        return node

    def factor(self):
        kind, tok = self.peek()
        if kind == "num":
            self.take()
            return ("num", float(tok))
        if kind == "str":
            self.take()
            return ("str", tok[1:-1].replace('\\"', '"').replace("\\\\", "\\"))
        if kind == "name":
            if tok == "if":
                return self.expr()
            if tok in _KEYWORDS:
                raise ExpressionError(f"unexpected keyword {tok!r}")
            self.take()
            return ("ref", tok)
        if (kind, tok) == ("op", "("):
            self.take()
            node = self.expr()
            self.take(")")
            return node
        if (kind, tok) == ("op", "-"):
            self.take()
            return ("bin", "-", ("num", 0.0), self.factor())
        raise ExpressionError(f"unexpected token {tok!r}")


def parse_expression(text: str):
    return _ExprParser(text).parse()


def type_check(node, features_by_name) -> str:
    """Static types: 'numeric', 'nominal' or 'bool'; the expression itself
    must produce a numeric or nominal value."""
    t = _type_of(node, features_by_name)
    if t == "bool":
        raise ExpressionError("expression yields a boolean; wrap it in if-then-else")
    return t


def _type_of(node, feats) -> str:
    tag = node[0]
    if tag == "num":
        return "numeric"
    if tag == "str":
        return "nominal"
    if tag == "ref":
        f = feats.get(node[1])
        if f is None:
            raise ExpressionError(f"unknown feature {node[1]!r}")
        return f.kind
    if tag == "bin":
        if _type_of(node[2], feats) != "numeric" or _type_of(node[3], feats) != "numeric":
            raise ExpressionError(f"arithmetic {node[1]!r} needs numeric operands")
        return "numeric"
    if tag == "cmp":
        lt, rt = _type_of(node[2], feats), _type_of(node[3], feats)
        if node[1] in ("=", "!="):
            if lt != rt or lt == "bool":
                raise ExpressionError(f"comparison {node[1]!r} needs matching operand kinds")
        elif lt != "numeric" or rt != "numeric":
            raise ExpressionError(f"comparison {node[1]!r} needs numeric operands")
        return "bool"
    cond, then, other = node[1], node[2], node[3]
    if _type_of(cond, feats) != "bool":
        raise ExpressionError("if-condition must be a comparison")
    tt, et = _type_of(then, feats), _type_of(other, feats)
    if tt != et:
        raise ExpressionError("then- and else-branch kinds differ")
    return tt


def evaluate_expression(ast, values, kind: str):
    """Evaluate against one record; runtime faults yield NaN (numeric) or a
    sentinel token (nominal) so the record matches no proposition over the
    feature."""
    try:
        return _eval(ast, values)
    except _Fault:
        return math.nan if kind == "numeric" else NOMINAL_FAULT


def _eval(node, values):
    tag = node[0]
    if tag in ("num", "str"):
        return node[1]
    if tag == "ref":
        return values[node[1]]
    if tag == "bin":
        left, right = _eval(node[2], values), _eval(node[3], values)
        op = node[1]
        if op == "+":
            return left + right
        if op == "-":
            return left - right
        if op == "*":
            return left * right
        if right == 0:
            raise _Fault()
        return left / right
    if tag == "cmp":
        left, right = _eval(node[2], values), _eval(node[3], values)
        op = node[1]
        if op == "=":
            return left == right
        if op == "!=":
            return left != right
        if isinstance(left, float) and math.isnan(left):
            raise _Fault()
        return {"<=": left <= right, ">=": left >= right,
                "<": left < right, ">": left > right}[op]
    return _eval(node[2] if _eval(node[1], values) else node[3], values)
