"""HTTP service and batch mining.

The service holds one session (dataset, blackboard, agents, replay log) and
exposes every user operation as a JSON endpoint; `GET /log` long-polls so a
UI can follow the live search.  `mine_headless` runs the same machinery
without a server for benchmarks and reproducibility checks.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .agent import AgentPool, MiningAgent, AgentConfig
from .blackboard import Blackboard, RestrictionConflict, ruleset_digest
from .eval import DEFAULT_DIMENSIONS, ObjectiveSpace
from .feedback import ForbiddenRuleError, Session
from .generate import GenerationConfig
from .model import RuleSet, RuleStructureError, RuleSyntaxError, SchemaError, parse_ruleset
from .persist import ReplayLog, load_dataset, session_header


@dataclass
class ServiceConfig:
    data_path: str
    schema_path: str | None = None
    log_path: str | None = None
    host: str = "127.0.0.1"
    port: int = 8734
    dimensions: tuple = DEFAULT_DIMENSIONS
    seed: int = 0
    agents: int = 0              # started at boot when > 0
    static_dir: str | None = None
    generation: GenerationConfig = field(default_factory=GenerationConfig)

    @classmethod
    def from_file(cls, path, **overrides) -> "ServiceConfig":
        text = Path(path).read_text(encoding="utf-8")
        if path.endswith((".yaml", ".yml")):
            import yaml
            raw = yaml.safe_load(text)
        else:
            raw = json.loads(text)
        gen = raw.pop("generation", None)
        if gen is not None:
            if "majority_ratio_range" in gen:
                gen["majority_ratio_range"] = tuple(gen["majority_ratio_range"])
            raw["generation"] = GenerationConfig(**gen)
        if "dimensions" in raw:
            raw["dimensions"] = tuple(raw["dimensions"])
        raw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**raw)


class MiningService:
    """Session wiring shared by the HTTP app and the batch entry points."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        dataset = load_dataset(config.data_path, config.schema_path)
        self.space = ObjectiveSpace(tuple(config.dimensions))
        self.bb = Blackboard(dataset, self.space)
        self.log = ReplayLog(config.log_path, header=session_header(
            max(config.agents, 1), config.seed, config.data_path, self.space,
            generation=config.generation))
        self.bb.insert_listener = lambda entry: self.log.append(
            actor="blackboard", kind="front_add",
            params={"ruleset": entry.text, "vector": list(entry.vector)})
        self.session = Session(self.bb, self.log, generation_config=config.generation)
        self.pool = AgentPool(self.bb, self.log, generation=config.generation)

    # -- views -------------------------------------------------------------

    def entry_view(self, entry, neighbors: bool = True) -> dict:
        view = self.bb.restrictions()
        visited = self.bb.visited_rules()
        rules = []
        for rule, exclusion in (
                [(r, False) for r in entry.ruleset.inclusions]
                + [(r, True) for r in entry.ruleset.exclusions]):
            rules.append({
                "text": rule.text(),
                "exclusion": exclusion,
                "visited": rule in visited,
                "accepted": rule in view.accepted_rules,
            })
        out = {
            "digest": entry.digest,
            "ruleset": entry.text,
            "formatted": self._formatted(entry.ruleset),
            "vector": list(entry.vector),
            "evaluation": entry.evaluation.as_dict(),
            "rules": rules,
        }
        if neighbors:
            out["neighbors"] = {
                dim: {
                    "next": self._neighbor_digest(entry, i, +1),
                    "previous": self._neighbor_digest(entry, i, -1),
                }
                for i, dim in enumerate(self.space.dims)
            }
        return out

    def _formatted(self, rs: RuleSet) -> str:
        from .explore import format_ruleset
        return format_ruleset(rs, self.bb.dataset)

    def _neighbor_digest(self, entry, dim: int, direction: int):
        neighbor = self.bb.navigate(entry.digest, dim, direction)
        if neighbor is None or neighbor.digest == entry.digest:
            return None
        return neighbor.digest

    def record_view(self, record) -> dict:
        return {"id": record.id, "values": dict(record.values),
                "causes": sorted(record.cause_ids)}

    def status(self) -> dict:
        ls, pr = self.bb.queue_sizes()
        return {
            "dataset_version": self.bb.dataset.version,
            "record_count": len(self.bb.dataset),
            "cause_count": len(self.bb.dataset.causes),
            "front_size": len(self.bb.front_entries()),
            "front_digest": self.bb.front_digest(),
            "target_function": self.bb.target_function().spec(),
            "bounds": list(self.bb.objective_bounds().upper),
            "dimensions": list(self.space.dims),
            "agents": self.pool.statuses(),
            "queues": {"local_search": ls, "path_relink": pr},
            "log_position": self.log.position(),
        }

    def parse(self, text: str) -> RuleSet:
        return parse_ruleset(text, self.bb.dataset.features)


def build_app(service: MiningService) -> FastAPI:
    app = FastAPI(title="covermine", version="0.1.0")
    bb, session, pool = service.bb, service.session, service.pool

    @app.exception_handler(RuleSyntaxError)
    async def _syntax(request: Request, exc: RuleSyntaxError):
        return JSONResponse(status_code=422, content={
            "detail": str(exc), "position": exc.position})

    @app.exception_handler(SchemaError)
    async def _schema(request: Request, exc: SchemaError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(RuleStructureError)
    async def _structure(request: Request, exc: RuleStructureError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(ForbiddenRuleError)
    async def _forbidden(request: Request, exc: ForbiddenRuleError):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.exception_handler(RestrictionConflict)
    async def _conflict(request: Request, exc: RestrictionConflict):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.exception_handler(KeyError)
    async def _missing(request: Request, exc: KeyError):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(ValueError)
    async def _bad(request: Request, exc: ValueError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    # -- front -----------------------------------------------------------

    @app.get("/status")
    def status():
        return service.status()

    @app.get("/front")
    def front():
        entries = bb.front_entries()
        return {"digest": bb.front_digest(),
                "entries": [service.entry_view(e, neighbors=False) for e in entries]}

    @app.get("/front/navigate")
    def navigate(dim: str, direction: int = Query(1, alias="dir"), frm: str = Query(..., alias="from")):
        i = service.space.index(dim)
        entry = bb.navigate(frm, i, direction)
        if entry is None:
            raise HTTPException(404, "no such entry in bounds")
        return {**service.entry_view(entry), "at_boundary": entry.digest == frm}

    @app.get("/front/best")
    def best(dim: str | None = None):
        if dim is None:
            entry = bb.get_best_entry()
        else:
            entry = bb.best_in_dimension(service.space.index(dim))
        if entry is None:
            raise HTTPException(404, "front is empty in bounds")
        return service.entry_view(entry)

    @app.get("/front/{digest}")
    def front_entry(digest: str):
        entry = bb.entry_by_digest(digest)
        if entry is None:
            raise HTTPException(404, f"no front entry {digest}")
        return service.entry_view(entry)

    @app.post("/front/trim")
    def trim(body: dict):
        return session.trim(int(body["keep"]), int(body.get("sample_size", 256)),
                            int(body.get("seed", 0)))

    # -- rulesets and feedback ------------------------------------------------

    @app.post("/rulesets")
    def submit(body: dict):
        out = session.submit_ruleset(body["text"])
        out["digest"] = ruleset_digest(service.parse(body["text"]))
        return out

    @app.post("/target-function")
    def target(body: dict):
        seq = session.set_target(body["spec"])
        return {"seq": seq, "target_function": bb.target_function().spec()}

    @app.post("/bounds")
    def bounds(body: dict):
        seq = session.set_bounds(body["upper"])
        return {"seq": seq, "bounds": list(bb.objective_bounds().upper)}

    @app.post("/feedback/reject")
    def reject(body: dict):
        return session.reject(body["slots"])

    @app.post("/feedback/accept")
    def accept(body: dict):
        return session.accept(body["rule"])

    @app.post("/feedback/undo")
    def undo(body: dict):
        return session.undo(int(body["restriction_id"]))

    @app.post("/feedback/visited")
    def visited(body: dict):
        seq = session.mark_visited(body["rule"], bool(body.get("flag", True)))
        return {"seq": seq}

    # -- data exploration ---------------------------------------------------------

    def _subset(ruleset: str | None):
        return None if not ruleset else service.parse(ruleset)

    @app.get("/stats")
    def stats_view(ruleset: str | None = None):
        from .explore import stats
        return {"stats": [s.as_dict() for s in stats(bb.dataset, _subset(ruleset))]}

    @app.get("/records/sample")
    def sample(ruleset: str | None = None, n: int = 10, seed: int = 0):
        from .explore import sample_records
        records = sample_records(bb.dataset, _subset(ruleset), n, seed)
        return {"records": [service.record_view(r) for r in records]}

    @app.get("/records/misclassified")
    def miss(ruleset: str):
        from .explore import misclassified
        fps, missed = misclassified(bb.dataset, service.parse(ruleset))
        return {"false_positives": [service.record_view(r) for r in fps],
                "missed_causes": {c: [service.record_view(r) for r in recs]
                                  for c, recs in missed.items()}}

    @app.get("/records/default-branch")
    def default_branch_view(ruleset: str, n: int = 10, seed: int = 0):
        from .explore import default_branch
        records = default_branch(bb.dataset, service.parse(ruleset), n, seed)
        return {"records": [service.record_view(r) for r in records]}

    @app.post("/records/remove")
    def remove(body: dict):
        return session.remove_records(body["predicate"])

    @app.post("/records/relabel")
    def relabel(body: dict):
        seq = session.relabel(body["record_id"], set(body.get("cause_ids", [])))
        return {"seq": seq}

    @app.post("/features/computed")
    def computed(body: dict):
        seq = session.add_computed_feature(body["name"], body["expression"])
        return {"seq": seq, "features": [
            {"name": f.name, "kind": f.kind} for f in bb.dataset.features]}

    # -- agents and log ---------------------------------------------------------------

    @app.post("/agents/start")
    def agents_start(body: dict):
        n = int(body.get("n", 1))
        seed = int(body.get("seed", service.config.seed))
        try:
            statuses = pool.start(n, seed)
        except RuntimeError as exc:
            raise HTTPException(409, str(exc)) from None
        seq = service.log.append(actor="user", kind="agents_start",
                                 params={"n": n, "seed": seed}, seed=seed)
        return {"seq": seq, "agents": [s.as_dict() for s in statuses]}

    @app.post("/agents/stop")
    def agents_stop():
        pool.stop()
        seq = service.log.append(actor="user", kind="agents_stop", params={})
        return {"seq": seq, "agents": pool.statuses()}

    @app.get("/log")
    def log_entries(since: int = 0, timeout: float = 0.0):
        entries = service.log.since(since, timeout=timeout or None)
        return {"entries": entries, "position": service.log.position()}

    static = service.config.static_dir
    if static and Path(static).is_dir():
        app.mount("/", StaticFiles(directory=static, html=True), name="ui")
    return app


def serve(config: ServiceConfig) -> None:
    import uvicorn

    service = MiningService(config)
    if config.agents > 0:
        service.pool.start(config.agents, config.seed)
    app = build_app(service)
    try:
        uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    finally:
        service.pool.stop()
        service.log.close()


# ---------------------------------------------------------------------------
# Batch mining


def front_export(bb: Blackboard) -> dict:
    entries = bb.front_entries()
    return {
        "magic": "covermine/1",
        "kind": "front_export",
        "digest": bb.front_digest(),
        "dimensions": list(bb.space.dims),
        "entries": [{"ruleset": e.text, "vector": list(e.vector),
                     "evaluation": e.evaluation.as_dict()} for e in entries],
    }


def mine_headless(data_path, out_path=None, seconds: float | None = None,
                  iterations: int | None = None, agents: int = 1, seed: int = 0,
                  log_path=None, schema_path=None,
                  dimensions=DEFAULT_DIMENSIONS,
                  generation: GenerationConfig | None = None) -> dict:
    """Run agents for a time or iteration budget and export the front.

    A single agent with an iteration budget is stepped on this thread, which
    makes the run bit-reproducible for a fixed seed.
    """
    if seconds is None and iterations is None:
        raise ValueError("need a seconds or iterations budget")
    config = ServiceConfig(data_path=str(data_path), schema_path=schema_path,
                           log_path=log_path, dimensions=tuple(dimensions),
                           seed=seed, agents=agents,
                           generation=generation or GenerationConfig())
    service = MiningService(config)
    if agents == 1 and iterations is not None:
        agent = MiningAgent(AgentConfig(0, seed, generation=config.generation),
                            service.bb, log=service.log)
        for _ in range(iterations):
            agent.step()
    else:
        service.pool.start(agents, seed)
        if iterations is not None:
            while any(a.status.iterations < iterations for a in service.pool.agents):
                time.sleep(0.02)
        else:
            time.sleep(seconds)
        service.pool.stop()
    export = front_export(service.bb)
    if out_path is not None:
        Path(out_path).write_text(json.dumps(export, indent=1, sort_keys=True),
                                  encoding="utf-8")
    service.log.close()
    return export
