"""Command-line entry points: seed, serve, ask, eval, replay."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import plantdb
from .audit import AuditStore, AuditError, MissingSessionError
from .backends import make_backend
from .config import AppConfig
from .evalkit import HermeticComparison, JudgeKind, load_cases_file, run_comparison
from .gateway import Services, create_app
from .nl2sql import NL2SQL_PROMPT, Nl2SqlPipeline
from .orchestrator import ConversationState, MAIN_AGENT_PROMPT, Orchestrator


def _load_config(config_path: str | None) -> AppConfig:
    if config_path:
        return AppConfig.from_file(config_path)
    return AppConfig()


@click.group()
def main() -> None:
    """Guardrailed plant-maintenance data retrieval."""


@main.command()
@click.option("--db", "db_path", default="data/plant.db", show_default=True)
@click.option("--seed", default=42, show_default=True, type=int)
@click.option("--force", is_flag=True, help="Reseed even if the database has content.")
def seed(db_path: str, seed: int, force: bool) -> None:
    """Initialize the schema and load the deterministic fixture."""
    try:
        Path(db_path).parent.mkdir(parents=True, exist_ok=True)
        db = plantdb.init_schema(db_path)
        summary = plantdb.seed_fixture(db, seed, force=force)
    except plantdb.PlantDbError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(summary.to_json())


@main.command()
@click.option("--config", "config_path", default=None, help="JSON config file.")
@click.option("--port", default=None, type=int, help="Override the configured port.")
def serve(config_path: str | None, port: int | None) -> None:
    """Run the HTTP gateway."""
    import uvicorn

    config = _load_config(config_path)
    services = Services.from_config(config)
    app = create_app(services)
    uvicorn.run(app, host="127.0.0.1", port=port or config.port, log_level="warning")


@main.command()
@click.argument("question")
@click.option("--path", "path_kind", type=click.Choice(["fc", "nl2sql"]), default="fc",
              show_default=True)
@click.option("--backend", "backend_mode", type=click.Choice(["rules", "scripted", "http"]),
              default="rules", show_default=True)
@click.option("--config", "config_path", default=None, help="JSON config file.")
@click.option("--db", "db_path", default=None, help="Override the plant database path.")
@click.option("--script", "script_path", default=None, help="Script file for scripted mode.")
def ask(question: str, path_kind: str, backend_mode: str, config_path: str | None,
        db_path: str | None, script_path: str | None) -> None:
    """Run one question through the chosen path and print the answer and trace."""
    config = _load_config(config_path)
    if db_path:
        config.plant_db_path = db_path
    if script_path:
        config.script_path = script_path
    config.backend_mode = backend_mode.upper()
    try:
        services = Services.from_config(config)
        backend = make_backend(config.backend_config())
    except (plantdb.PlantDbError, ValueError, OSError) as exc:
        raise click.ClickException(str(exc)) from exc

    if path_kind == "fc":
        orchestrator = Orchestrator(
            backend, services.registry, services.domains, services.db, services.audit_store,
            jargon=services.jargon, r_route=config.r_route, r_func=config.r_func,
        )
        state = ConversationState.new("cli-ask", system_prompt=MAIN_AGENT_PROMPT)
        outcome = orchestrator.handle_turn(state, question)
        click.echo(outcome.answer)
        click.echo(json.dumps({"status": outcome.status.value,
                               "tool_trace": [t.to_dict() for t in outcome.tool_trace]},
                              sort_keys=True))
        if outcome.status.value == "FAILED":
            sys.exit(2)
    else:
        pipeline = Nl2SqlPipeline(
            services.db, backend, services.catalog, services.examples, services.audit_store,
            threshold=config.similarity_threshold, max_attempts=config.r_func,
        )
        state = ConversationState.new("cli-ask", system_prompt=NL2SQL_PROMPT)
        outcome = pipeline.run(state, question)
        click.echo(outcome.answer)
        click.echo(json.dumps({"status": outcome.status.value,
                               "draft": outcome.draft.to_dict() if outcome.draft else None},
                              sort_keys=True))
        if outcome.status.value == "FAILED":
            sys.exit(2)


@main.command(name="eval")
@click.option("--cases", "cases_path", default=None, help="JSON Lines cases file.")
@click.option("--profile", type=click.Choice(["hermetic", "live"]), default="hermetic",
              show_default=True)
@click.option("--config", "config_path", default=None, help="JSON config file.")
@click.option("--out", "out_path", default=None, help="Write the JSON report here.")
def eval_command(cases_path: str | None, profile: str, config_path: str | None,
                 out_path: str | None) -> None:
    """Compare both retrieval paths over a case suite and print the report."""
    config = _load_config(config_path)
    try:
        services = Services.from_config(config)
        cases = load_cases_file(cases_path or config.cases_file())
    except (OSError, ValueError, plantdb.PlantDbError) as exc:
        raise click.ClickException(str(exc)) from exc

    comparison = HermeticComparison(
        db=services.db, registry=services.registry, domains=services.domains,
        catalog=services.catalog, examples=services.examples,
        audit_store=services.audit_store, jargon=services.jargon,
        threshold=config.similarity_threshold, r_route=config.r_route, r_func=config.r_func,
    )
    if profile == "hermetic":
        report = run_comparison(cases, comparison.runners(), judge=JudgeKind.RULES)
    else:
        backend = make_backend(config.backend_config())
        report = run_comparison(
            cases, comparison.runners(), judge=JudgeKind.LLM, backend=backend
        )
    if out_path:
        Path(out_path).write_text(report.to_json() + "\n", encoding="utf-8")
    click.echo(report.render_text())


@main.command()
@click.option("--session", "session_id", required=True)
@click.option("--audit-db", "audit_db_path", default="data/audit.db", show_default=True)
@click.option("--records", is_flag=True, help="Print raw audit records as JSON Lines.")
def replay(session_id: str, audit_db_path: str, records: bool) -> None:
    """Print a session transcript reconstructed from the audit store."""
    try:
        store = AuditStore(audit_db_path)
        if records:
            for record in store.query_records(session_id=session_id):
                click.echo(json.dumps(record.to_dict(), sort_keys=True))
            return
        messages = store.replay_conversation(session_id)
    except (MissingSessionError, AuditError) as exc:
        raise click.ClickException(str(exc)) from exc
    for message in messages:
        label = message.role.value.upper()
        if message.tool_call is not None:
            click.echo(f"[{label}] tool call {message.tool_call.tool_name} "
                       f"{json.dumps(message.tool_call.arguments, sort_keys=True)}")
        if message.content:
            click.echo(f"[{label}] {message.content}")


if __name__ == "__main__":
    main()
