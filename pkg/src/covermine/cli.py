"""Command line entry points: serve, mine, replay, eval, export."""

from __future__ import annotations

import json
import sys

import click

from .eval import DEFAULT_DIMENSIONS


def _dims(text: str | None) -> tuple:
    return tuple(d.strip() for d in text.split(",")) if text else DEFAULT_DIMENSIONS


@click.group()
def main():
    """Anytime multi-objective rule mining with live expert feedback."""


@main.command()
@click.option("--data", "data_path", type=click.Path(exists=True), default=None,
              help="CSV dataset (id column required)")
@click.option("--schema", "schema_path", type=click.Path(exists=True), default=None)
@click.option("--log", "log_path", type=click.Path(), default=None,
              help="replay log file (JSONL)")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON/YAML service config; CLI flags override it")
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.option("--dims", default=None, help="objective dimensions, comma separated")
@click.option("--agents", type=int, default=None, help="start this many agents at boot")
@click.option("--seed", type=int, default=None)
@click.option("--static-dir", default=None, help="directory with the built web UI")
def serve(data_path, schema_path, log_path, config_path, host, port, dims,
          agents, seed, static_dir):
    """Run the HTTP service (and optionally the built web UI)."""
    from .service import ServiceConfig, serve as run

    overrides = {
        "data_path": data_path, "schema_path": schema_path, "log_path": log_path,
        "host": host, "port": port, "agents": agents, "seed": seed,
        "static_dir": static_dir,
        "dimensions": _dims(dims) if dims else None,
    }
    if config_path:
        config = ServiceConfig.from_file(config_path, **overrides)
    else:
        if not data_path:
            raise click.UsageError("--data is required without --config")
        config = ServiceConfig(**{k: v for k, v in overrides.items() if v is not None})
    run(config)


@main.command()
@click.option("--data", "data_path", type=click.Path(exists=True), required=True)
@click.option("--schema", "schema_path", type=click.Path(exists=True), default=None)
@click.option("--seconds", type=float, default=None, help="time budget")
@click.option("--iterations", type=int, default=None,
              help="iteration budget (deterministic with one agent)")
@click.option("--agents", type=int, default=1)
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_path", type=click.Path(), required=True,
              help="front export JSON")
@click.option("--log", "log_path", type=click.Path(), default=None)
@click.option("--dims", default=None)
def mine(data_path, schema_path, seconds, iterations, agents, seed, out_path,
         log_path, dims):
    """Mine headless for a budget and export the Pareto front."""
    from .service import mine_headless

    if seconds is None and iterations is None:
        raise click.UsageError("need --seconds or --iterations")
    export = mine_headless(data_path, out_path=out_path, seconds=seconds,
                           iterations=iterations, agents=agents, seed=seed,
                           log_path=log_path, schema_path=schema_path,
                           dimensions=_dims(dims))
    click.echo(f"front: {len(export['entries'])} entries, digest {export['digest'][:16]}")


@main.command()
@click.option("--log", "log_path", type=click.Path(exists=True), required=True)
@click.option("--data", "data_path", type=click.Path(exists=True), required=True)
@click.option("--schema", "schema_path", type=click.Path(exists=True), default=None)
def replay(log_path, data_path, schema_path):
    """Re-execute a recorded log and verify the front digests."""
    from .persist import replay as run_replay

    report = run_replay(log_path, data_path, schema_path)
    click.echo(json.dumps({
        "mode": report.mode,
        "ok": report.ok,
        "final_digest": report.final_digest,
        "recorded_digest": report.recorded_digest,
        "checked_insertions": report.checked_insertions,
        "divergences": report.divergences,
    }, indent=1))
    if not report.ok:
        sys.exit(1)


@main.command("eval")
@click.option("--data", "data_path", type=click.Path(exists=True), required=True)
@click.option("--schema", "schema_path", type=click.Path(exists=True), default=None)
@click.option("--ruleset", "ruleset_text", required=True)
@click.option("--dims", default=None)
def eval_cmd(data_path, schema_path, ruleset_text, dims):
    """Evaluate one ruleset against a dataset."""
    from .eval import Evaluator, ObjectiveSpace
    from .model import parse_ruleset
    from .persist import load_dataset

    ds = load_dataset(data_path, schema_path)
    evaluator = Evaluator(ds, ObjectiveSpace(_dims(dims)))
    rs = parse_ruleset(ruleset_text, ds.features)
    ev = evaluator.evaluate(rs)
    click.echo(json.dumps({
        "ruleset": rs.text(),
        "vector": list(evaluator.vector(rs)),
        "evaluation": ev.as_dict(),
    }, indent=1))


@main.command()
@click.option("--snapshot", "snapshot_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="write the export here instead of stdout")
def export(snapshot_path, out_path):
    """Export the Pareto front stored in a session snapshot."""
    from .persist import session_from_snapshot
    from .service import front_export

    session = session_from_snapshot(snapshot_path)
    payload = json.dumps(front_export(session.bb), indent=1, sort_keys=True)
    if out_path:
        from pathlib import Path
        Path(out_path).write_text(payload + "\n", encoding="utf-8")
        click.echo(f"wrote {out_path}")
    else:
        click.echo(payload)


if __name__ == "__main__":
    main()
