from __future__ import annotations

import json
import threading
import time

import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from plantquery.cli import main as cli_main
from plantquery.config import AppConfig
from plantquery.gateway import Services, create_app


@pytest.fixture()
def app_client(tmp_path):
    config = AppConfig(
        plant_db_path=str(tmp_path / "plant.db"),
        audit_db_path=str(tmp_path / "audit.db"),
    )
    services = Services.from_config(config)
    return TestClient(create_app(services))


def _create_session(client, path="FUNCTION_CALLING", backend="RULES"):
    response = client.post("/api/v1/sessions", json={"path": path, "backend_mode": backend})
    assert response.status_code == 201
    return response.json()["session_id"]


def test_create_session_and_uniqueness(app_client):
    first = _create_session(app_client)
    second = _create_session(app_client)
    assert first != second


def test_create_session_rejects_bad_enums(app_client):
    response = app_client.post("/api/v1/sessions", json={"path": "bogus"})
    assert response.status_code == 400
    body = response.json()
    assert body["code"] == "invalid_path"
    assert set(body) == {"status", "code", "message"}


def test_turn_returns_answer_and_trace(app_client):
    session_id = _create_session(app_client)
    response = app_client.post(
        f"/api/v1/sessions/{session_id}/messages",
        json={"text": "how many work orders are filed against SG2"},
    )
    assert response.status_code == 200
    body = response.json()
    assert body["status"] == "OK"
    assert len(body["tool_trace"]) == 1
    trace = body["tool_trace"][0]
    assert trace["function"] == "count_work_orders_by_equipment"
    assert trace["arguments"] == {"equip_id": "SG2"}
    assert trace["row_count"] == 1
    assert any(ch.isdigit() for ch in body["answer"])


def test_followup_turn_has_empty_trace(app_client):
    session_id = _create_session(app_client)
    app_client.post(
        f"/api/v1/sessions/{session_id}/messages",
        json={"text": "how many work orders are filed against SG2"},
    )
    response = app_client.post(
        f"/api/v1/sessions/{session_id}/messages", json={"text": "format that as a table"}
    )
    assert response.status_code == 200
    assert response.json()["tool_trace"] == []
    assert "|" in response.json()["answer"]


def test_unknown_session_404_and_empty_text_422(app_client):
    assert app_client.post("/api/v1/sessions/nope/messages",
                           json={"text": "x"}).status_code == 404
    session_id = _create_session(app_client)
    assert app_client.post(f"/api/v1/sessions/{session_id}/messages",
                           json={"text": ""}).status_code == 422


def test_history_after_two_turns(app_client):
    session_id = _create_session(app_client)
    app_client.post(f"/api/v1/sessions/{session_id}/messages",
                    json={"text": "how many work orders are filed against SG2"})
    app_client.post(f"/api/v1/sessions/{session_id}/messages",
                    json={"text": "put that in a table"})
    history = app_client.get(f"/api/v1/sessions/{session_id}/history").json()
    roles = [m["role"] for m in history]
    assert roles == ["system", "user", "assistant", "tool", "assistant", "user", "assistant"]


def test_nl2sql_session_exposes_draft_with_fixes(app_client):
    session_id = _create_session(app_client, path="NL2SQL")
    response = app_client.post(
        f"/api/v1/sessions/{session_id}/messages",
        json={"text": "Show me all the work requests entered in by John Smith"},
    )
    body = response.json()
    assert body["status"] == "OK"
    draft = body["nl2sql"]["draft"]
    assert draft["sql"].startswith("SELECT")
    assert "fixes" in draft  # raw SQL never exposed without its fix list


def test_audit_endpoint_filters_and_guardrail(app_client):
    session_id = _create_session(app_client)
    app_client.post(f"/api/v1/sessions/{session_id}/messages",
                    json={"text": "how many work orders are filed against SG2"})
    records = app_client.get(
        "/api/v1/audit/records",
        params={"step_kind": "SQL_EXECUTED", "path": "FUNCTION_CALLING"},
    ).json()
    assert records
    from plantquery.toolkit import default_registry

    templates = default_registry().templates()
    for record in records:
        assert record["payload"]["sql"] in templates


def test_eval_run_endpoint_polls_to_done(app_client):
    response = app_client.post("/api/v1/eval/run", json={})
    assert response.status_code == 202
    run_id = response.json()["run_id"]
    status = app_client.get(f"/api/v1/eval/runs/{run_id}").json()
    assert status["status"] in {"running", "done"}
    for _ in range(600):
        status = app_client.get(f"/api/v1/eval/runs/{run_id}").json()
        if status["status"] != "running":
            break
        time.sleep(0.2)
    assert status["status"] == "done"
    means = status["report"]["means"]
    assert means["FUNCTION_CALLING"]["CORRECTNESS"] > means["NL2SQL"]["CORRECTNESS"]
    assert app_client.get("/api/v1/eval/runs/missing").status_code == 404


def test_turn_latency_within_timeout_budget(app_client):
    session_id = _create_session(app_client)
    started = time.monotonic()
    app_client.post(f"/api/v1/sessions/{session_id}/messages",
                    json={"text": "how many work orders are filed against SG2"})
    assert time.monotonic() - started < AppConfig().timeout + 1.0


def test_concurrent_sessions_do_not_interleave(app_client):
    questions = [
        "how many work orders are filed against SG2",
        "put that in a table",
        "How many units of part BRG-2205 are in stock?",
        "What parts are on the bill of materials for 056-SG2?",
        "Tell me about equipment 056-SG2",
    ]
    session_ids = [_create_session(app_client) for _ in range(4)]
    errors = []

    def drive(session_id):
        try:
            for question in questions:
                response = app_client.post(
                    f"/api/v1/sessions/{session_id}/messages", json={"text": question}
                )
                assert response.status_code == 200
        except Exception as exc:  # noqa: BLE001
            errors.append(exc)

    threads = [threading.Thread(target=drive, args=(sid,)) for sid in session_ids]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert errors == []

    for session_id in session_ids:
        history = app_client.get(f"/api/v1/sessions/{session_id}/history").json()
        replay = app_client.get(f"/api/v1/sessions/{session_id}/replay").json()
        assert replay == history
        user_texts = [m["content"] for m in history if m["role"] == "user"]
        assert len(user_texts) == len(questions)


# -- CLI -------------------------------------------------------------------------


def test_cli_seed_then_refuse(tmp_path):
    runner = CliRunner()
    db = str(tmp_path / "plant.db")
    first = runner.invoke(cli_main, ["seed", "--db", db])
    assert first.exit_code == 0
    summary = json.loads(first.output)
    assert summary["counts"]["equipment"] == 12
    second = runner.invoke(cli_main, ["seed", "--db", db])
    assert second.exit_code != 0
    assert "force" in second.output
    forced = runner.invoke(cli_main, ["seed", "--db", db, "--force"])
    assert forced.exit_code == 0


def test_cli_ask_direct_answer(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    runner = CliRunner()
    result = runner.invoke(
        cli_main, ["ask", "--path", "fc", "--backend", "rules", "What day is it today?"]
    )
    assert result.exit_code == 0
    assert "calendar" in result.output
    assert '"tool_trace": []' in result.output


def test_cli_ask_fc_count(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    runner = CliRunner()
    result = runner.invoke(
        cli_main, ["ask", "how many work orders are filed against SG2"]
    )
    assert result.exit_code == 0
    assert "count_work_orders_by_equipment" in result.output


def test_cli_replay_missing_session(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    runner = CliRunner()
    result = runner.invoke(cli_main, ["replay", "--session", "ghost"])
    assert result.exit_code != 0
    assert "ghost" in result.output


def test_cli_replay_prints_transcript(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    runner = CliRunner()
    runner.invoke(cli_main, ["ask", "how many work orders are filed against SG2"])
    result = runner.invoke(cli_main, ["replay", "--session", "cli-ask"])
    assert result.exit_code == 0
    assert "[USER]" in result.output
    assert "[ASSISTANT]" in result.output


def test_cli_eval_writes_report(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    runner = CliRunner()
    result = runner.invoke(
        cli_main, ["eval", "--profile", "hermetic", "--out", "report.json"]
    )
    assert result.exit_code == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["cases_total"] == 20
    assert "CORRECTNESS" in result.output
