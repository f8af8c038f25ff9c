"""Dataset ingestion, replay logging and session snapshots.

The replay log is line-delimited JSON with a `covermine/1` header; it records
user actions and agent iterations with their RNG seeds and front digests.
Single-agent logs replay bit-exactly; multi-agent logs are checked entry by
entry instead (every logged front insertion must re-evaluate identically).
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .model import Dataset, Feature, Record, SchemaError

MAGIC = "covermine/1"
RESERVED_COLUMNS = ("id", "causes", "label")

_DECIMAL_KINDS = ("numeric", "nominal")


def _parses_as_decimal(text: str) -> bool:
    try:
        return math.isfinite(float(text))
    except ValueError:
        return False


def load_dataset(data_path, schema_path=None) -> Dataset:
    """Read a CSV with an ``id`` column, optional ``causes`` (``;``-separated)
    and optional ``label`` (T/F, mapped to one synthetic cause per T record
    when there is no causes column).

    Feature kinds come from the JSON sidecar schema when given, otherwise a
    column is numeric iff every value parses as a finite decimal.  Missing
    values are forbidden.
    """
    data_path = Path(data_path)
    with data_path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{data_path}: empty file")
    header, body = rows[0], rows[1:]
    if "id" not in header:
        raise SchemaError(f"{data_path}: missing id column")
    if not body:
        raise SchemaError(f"{data_path}: no records (mining needs a nonempty dataset)")
    declared = {}
    if schema_path is not None:
        declared = json.loads(Path(schema_path).read_text(encoding="utf-8"))
        for name, kind in declared.items():
            if kind not in _DECIMAL_KINDS:
                raise SchemaError(f"schema: unknown kind {kind!r} for {name!r}")
            if name not in header:
                raise SchemaError(f"schema names unknown column {name!r}")

    idx = {name: i for i, name in enumerate(header)}
    feature_names = [c for c in header if c not in RESERVED_COLUMNS]
    columns = {name: [] for name in feature_names}
    for li, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise SchemaError(f"{data_path}:{li}: expected {len(header)} cells, got {len(row)}")
        for name in feature_names:
            cell = row[idx[name]]
            if cell == "":
                raise SchemaError(f"{data_path}:{li}: missing value for {name!r}")
            columns[name].append(cell)

    features = []
    for name in feature_names:
        kind = declared.get(name)
        if kind is None:
            kind = "numeric" if all(_parses_as_decimal(v) for v in columns[name]) else "nominal"
        features.append(Feature(name, kind))

    records = []
    seen_ids = set()
    for li, row in enumerate(body, start=2):
        rid = row[idx["id"]]
        if not rid:
            raise SchemaError(f"{data_path}:{li}: empty id")
        if rid in seen_ids:
            raise SchemaError(f"{data_path}:{li}: duplicate id {rid!r}")
        seen_ids.add(rid)
        values = {}
        for f in features:
            cell = row[idx[f.name]]
            if f.kind == "numeric":
                if not _parses_as_decimal(cell):
                    raise SchemaError(
                        f"{data_path}:{li}: {f.name!r} declared numeric, got {cell!r}")
                values[f.name] = float(cell)
            else:
                values[f.name] = cell
        if "causes" in idx:
            causes = frozenset(c.strip() for c in row[idx["causes"]].split(";") if c.strip())
        elif "label" in idx:
            flag = row[idx["label"]].strip()
            if flag not in ("T", "F"):
                raise SchemaError(f"{data_path}:{li}: label must be T or F, got {flag!r}")
            causes = frozenset({f"c:{rid}"}) if flag == "T" else frozenset()
        else:
            causes = frozenset()
        records.append(Record(rid, values, causes))
    return Dataset(features, records)


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def session_header(agents: int, seed: int, data_path, space,
                   picks=(0.3, 0.3, 0.4), iteration_cap: int = 30,
                   generation=None) -> dict:
    """Log header carrying everything replay needs to rebuild the session."""
    from dataclasses import asdict
    from .generate import GenerationConfig
    header = {
        "agents": agents, "seed": seed,
        "data_path": str(data_path), "data_digest": file_digest(data_path),
        "dims": list(space.dims), "picks": list(picks),
        "iteration_cap": iteration_cap,
        "generation": asdict(generation or GenerationConfig()),
    }
    header["generation"]["majority_ratio_range"] = list(
        header["generation"]["majority_ratio_range"])
    return header


# ---------------------------------------------------------------------------
# Replay log


class ReplayLog:
    """Append-only action/seed log; in-memory always, mirrored to a JSONL
    file when a path is given.  Appends are serialized and flushed before
    they return, and a condition variable feeds the long-poll endpoint."""

    def __init__(self, path=None, header: dict | None = None):
        self._lock = threading.Lock()
        self.changed = threading.Condition(self._lock)
        self._entries: list[dict] = []
        self._fh = None
        self.header = {"magic": MAGIC, "kind": "header", **(header or {})}
        if path is not None:
            self._fh = Path(path).open("a", encoding="utf-8")
            self._fh.write(json.dumps(self.header, sort_keys=True) + "\n")
            self._fh.flush()

    def append(self, actor: str, kind: str, params: dict | None = None,
               seed=None, digest=None, result=None) -> int:
        entry = {"kind": kind, "actor": actor, "ts": time.time()}
        if params is not None:
            entry["params"] = params
        if seed is not None:
            entry["seed"] = seed
        if digest is not None:
            entry["digest"] = digest
        if result is not None:
            entry["result"] = result
        return self._write(entry)

    def _write(self, entry: dict) -> int:
        with self._lock:
            entry["seq"] = len(self._entries) + 1
            self._entries.append(entry)
            if self._fh is not None:
                self._fh.write(json.dumps(entry, sort_keys=True) + "\n")
                self._fh.flush()
            self.changed.notify_all()
            return entry["seq"]

    def entries(self) -> list:
        with self._lock:
            return list(self._entries)

    def since(self, seq: int, timeout: float | None = None) -> list:
        """Entries after ``seq``; blocks up to ``timeout`` when none exist."""
        deadline = None if timeout is None else time.monotonic() + timeout
        with self._lock:
            while True:
                out = [e for e in self._entries if e["seq"] > seq]
                if out or deadline is None or time.monotonic() >= deadline:
                    return out
                self.changed.wait(deadline - time.monotonic())

    def position(self) -> int:
        with self._lock:
            return len(self._entries)

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def read_log(path) -> tuple:
    """(header, entries) from a JSONL log file."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValueError(f"{path}: empty log")
    entries = []
    header = None
    for i, line in enumerate(lines, start=1):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise ValueError(f"{path}:{i}: corrupt log line: {e}") from None
        if obj.get("kind") == "header":
            if obj.get("magic") != MAGIC:
                raise ValueError(f"{path}: unsupported log format {obj.get('magic')!r}")
            header = obj
        else:
            entries.append(obj)
    if header is None:
        raise ValueError(f"{path}: missing {MAGIC} header")
    return header, entries


@dataclass
class ReplayReport:
    mode: str                      # "strict" or "superset"
    final_digest: str
    recorded_digest: str | None
    divergences: list = field(default_factory=list)
    checked_insertions: int = 0

    @property
    def ok(self) -> bool:
        if self.divergences:
            return False
        return self.recorded_digest is None or self.final_digest == self.recorded_digest


def replay(log_path, data_path, schema_path=None) -> ReplayReport:
    """Re-execute a recorded session against the original dataset.

    Single-agent logs are re-run action by action and iteration by iteration
    with the logged seeds; the reconstructed front digest must match the
    recorded one per entry.  Multi-agent logs get the superset check only:
    every logged front insertion is re-evaluated and compared.
    """
    from .agent import AgentConfig, MiningAgent  # session wiring lives above persist
    from .blackboard import Blackboard
    from .eval import ObjectiveSpace
    from .feedback import Session
    from .generate import GenerationConfig

    header, entries = read_log(log_path)
    dataset = load_dataset(data_path, schema_path)
    space = ObjectiveSpace(tuple(header.get("dims", ObjectiveSpace().dims)))
    agents = int(header.get("agents", 1))
    strict = agents <= 1

    gen_fields = dict(header.get("generation", {}))
    if "majority_ratio_range" in gen_fields:
        gen_fields["majority_ratio_range"] = tuple(gen_fields["majority_ratio_range"])
    generation = GenerationConfig(**gen_fields)
    bb = Blackboard(dataset, space)
    session = Session(bb, ReplayLog(), generation_config=generation)
    report = ReplayReport(mode="strict" if strict else "superset",
                          final_digest="", recorded_digest=None)

    if strict:
        agent = MiningAgent(AgentConfig(0, int(header.get("seed", 0)),
                                        pick_probabilities=tuple(
                                            header.get("picks", (0.3, 0.3, 0.4))),
                                        iteration_cap=int(header.get("iteration_cap", 30)),
                                        generation=session.generation_config), bb)
        for entry in entries:
            kind = entry["kind"]
            if kind == "iteration":
                agent.step()
            elif kind in ("front_add", "agents_start", "agents_stop"):
                continue  # implied by iteration entries in strict mode
            else:
                session.apply_action(kind, entry.get("params") or {})
            want = entry.get("digest")
            got = bb.front_digest()
            if want is not None and want != got:
                report.divergences.append(
                    {"seq": entry["seq"], "expected": want, "got": got})
        report.final_digest = bb.front_digest()
        recorded = [e.get("digest") for e in entries if e.get("digest") is not None]
        report.recorded_digest = recorded[-1] if recorded else None
        return report

    # superset check: user actions are applied, logged insertions re-evaluated
    from .model import parse_ruleset
    for entry in entries:
        kind = entry["kind"]
        if kind in ("iteration", "agents_start", "agents_stop"):
            continue
        if kind == "front_add":
            params = entry.get("params") or {}
            rs = parse_ruleset(params["ruleset"], bb.dataset.features)
            vec = list(bb.vector(rs))
            report.checked_insertions += 1
            if params.get("vector") is not None and list(params["vector"]) != vec:
                report.divergences.append(
                    {"seq": entry["seq"], "expected": params["vector"], "got": vec})
            continue
        session.apply_action(kind, entry.get("params") or {})
    report.final_digest = bb.front_digest()
    return report


# ---------------------------------------------------------------------------
# Snapshots


def save_snapshot(path, session) -> None:
    payload = {"magic": MAGIC, "kind": "snapshot", **session.export_state()}
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=1),
                          encoding="utf-8")


def load_snapshot(path, session) -> None:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("magic") != MAGIC or payload.get("kind") != "snapshot":
        raise ValueError(f"{path}: not a {MAGIC} snapshot")
    session.restore_state(payload)


def session_from_snapshot(path):
    """Standalone session rebuilt from a snapshot file (dataset included)."""
    from .blackboard import Blackboard
    from .eval import ObjectiveSpace
    from .feedback import Session

    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("magic") != MAGIC or payload.get("kind") != "snapshot":
        raise ValueError(f"{path}: not a {MAGIC} snapshot")
    dims = payload.get("blackboard", {}).get("dims")
    placeholder = Dataset([Feature("x", "numeric")], [Record("r", {"x": 0.0})])
    space = ObjectiveSpace(tuple(dims)) if dims else ObjectiveSpace()
    session = Session(Blackboard(placeholder, space), ReplayLog())
    session.restore_state(payload)
    return session
