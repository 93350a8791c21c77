from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import pytest

from usagectl.cli import EXIT_FINDINGS, EXIT_IO, EXIT_OK, EXIT_USAGE, main

from conftest import CONSUMER_IRI, FILE1, read_fixture

PREFIXES = (
    "@prefix odrl: <http://www.w3.org/ns/odrl/2/> .\n"
    "@prefix xsd: <http://www.w3.org/2001/XMLSchema#> .\n"
)


@pytest.fixture()
def corpus_file(tmp_path) -> str:
    path = tmp_path / "policy.ttl"
    path.write_text(read_fixture("provider_bundle.ttl"), encoding="utf-8")
    return str(path)


def test_validate_corpus(corpus_file, capsys):
    assert main(["validate", corpus_file]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "valid"


def test_validate_reports_errors(tmp_path, capsys):
    path = tmp_path / "broken.ttl"
    path.write_text(PREFIXES + "<http://e.com/p> a odrl:Policy .\n", encoding="utf-8")
    assert main(["validate", str(path)]) == EXIT_FINDINGS
    findings = json.loads(capsys.readouterr().out)
    assert findings[0]["message"] == "policy has no rules"


def test_validate_warnings_go_to_stderr(tmp_path, capsys):
    path = tmp_path / "odd.ttl"
    path.write_text(
        PREFIXES
        + "@prefix ex: <http://example.com/ns/> .\n"
        "<http://e.com/p> a odrl:Policy ; odrl:permission [ odrl:action ex:juggle ] .\n",
        encoding="utf-8",
    )
    assert main(["validate", str(path)]) == EXIT_OK
    captured = capsys.readouterr()
    assert captured.out.strip() == "valid"
    assert "unknown action" in captured.err


def test_validate_with_custom_profile(tmp_path, capsys, monkeypatch):
    profile = tmp_path / "profile.ttl"
    profile.write_text(
        "@prefix odrl: <http://www.w3.org/ns/odrl/2/> .\n"
        "@prefix ex: <http://example.com/ns/> .\n"
        "ex:juggle a odrl:Action .\n",
        encoding="utf-8",
    )
    policy = tmp_path / "odd.ttl"
    policy.write_text(
        PREFIXES
        + "@prefix ex: <http://example.com/ns/> .\n"
        "<http://e.com/p> a odrl:Policy ; odrl:permission [ odrl:action ex:juggle ] .\n",
        encoding="utf-8",
    )
    monkeypatch.setenv("DSP_PROFILE", str(profile))
    assert main(["validate", str(policy)]) == EXIT_OK
    assert "unknown action" not in capsys.readouterr().err


def test_canon_idempotent(corpus_file, capsys, tmp_path):
    assert main(["canon", corpus_file]) == EXIT_OK
    once = capsys.readouterr().out
    again = tmp_path / "canon.ttl"
    again.write_text(once, encoding="utf-8")
    assert main(["canon", str(again)]) == EXIT_OK
    assert capsys.readouterr().out == once


def test_patterns_list(capsys):
    assert main(["patterns", "list"]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 22
    assert lines[0].startswith("allow-access\t")


def test_patterns_list_markdown(capsys):
    assert main(["patterns", "list", "--markdown"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("| Id | Name |")


def test_patterns_new_writes_policy(tmp_path, capsys):
    params = tmp_path / "params.json"
    params.write_text(
        json.dumps(
            {
                "target": FILE1.value,
                "assigner": "https://www.example.com/provider",
                "max_count": 3,
            }
        ),
        encoding="utf-8",
    )
    out_file = tmp_path / "policy.ttl"
    assert main(["patterns", "new", "access-count", "--params", str(params),
                 "-o", str(out_file)]) == EXIT_OK
    assert main(["validate", str(out_file)]) == EXIT_OK


def test_patterns_new_unknown_id(tmp_path):
    assert main(["patterns", "new", "nope"]) == EXIT_USAGE


def test_patterns_new_missing_param(tmp_path, capsys):
    params = tmp_path / "params.json"
    params.write_text(json.dumps({"target": FILE1.value}), encoding="utf-8")
    assert main(["patterns", "new", "access-count", "--params", str(params)]) == EXIT_USAGE
    assert "max_count" in capsys.readouterr().err


def test_classify_corpus(corpus_file, capsys):
    assert main(["classify", corpus_file]) == EXIT_OK
    mapping = json.loads(capsys.readouterr().out)
    assert mapping["http://example.com/policies#consumer-administered"] == [
        "data-amount", "deletion", "anonymization",
    ]


def _agreement_file(tmp_path: Path) -> str:
    text = read_fixture("provider_bundle.ttl").replace(
        "a odrl:Policy ;", "a odrl:Agreement ;"
    )
    path = tmp_path / "agreement.ttl"
    path.write_text(text, encoding="utf-8")
    return str(path)


def _request_file(tmp_path: Path, **overrides) -> str:
    data = {
        "requester": CONSUMER_IRI.value,
        "target": FILE1.value,
        "action": "http://www.w3.org/ns/odrl/2/read",
        "timestamp": "2023-07-01T00:00:00Z",
        "units": 1,
    }
    data.update(overrides)
    path = tmp_path / "request.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def test_evaluate_permit(tmp_path, capsys):
    code = main(
        ["evaluate", "--agreement", _agreement_file(tmp_path),
         "--request", _request_file(tmp_path)]
    )
    assert code == EXIT_OK
    decision = json.loads(capsys.readouterr().out)
    assert decision["outcome"] == "Permit"
    assert {d["action"] for d in decision["activated_duties"]} == {
        "http://www.w3.org/ns/odrl/2/delete",
        "http://www.w3.org/ns/odrl/2/anonymize",
    }


def test_evaluate_deny_with_state(tmp_path, capsys):
    state = {
        "records": [
            {
                "assignee": CONSUMER_IRI.value,
                "action": "http://www.w3.org/ns/odrl/2/read",
                "exercise_log": ["2023-06-30T00:00:00Z"] * 1024,
            }
        ]
    }
    state_file = tmp_path / "state.json"
    state_file.write_text(json.dumps(state), encoding="utf-8")
    code = main(
        ["evaluate", "--agreement", _agreement_file(tmp_path),
         "--request", _request_file(tmp_path), "--state", str(state_file)]
    )
    assert code == EXIT_OK
    decision = json.loads(capsys.readouterr().out)
    assert decision["outcome"] == "Deny"


def test_evaluate_invalid_agreement(tmp_path, capsys, corpus_file):
    code = main(
        ["evaluate", "--agreement", corpus_file, "--request", _request_file(tmp_path)]
    )
    assert code == EXIT_FINDINGS
    assert "invalid agreement" in json.loads(capsys.readouterr().out)["error"]


def test_simulate_demo(tmp_path, capsys):
    scenario_src = resources.files("usagectl") / "data" / "demo_scenario.json"
    scenario = tmp_path / "scenario.json"
    scenario.write_text(scenario_src.read_text("utf-8"), encoding="utf-8")
    out_dir = tmp_path / "out"
    assert main(["simulate", str(scenario), "-o", str(out_dir)]) == EXIT_OK
    report = json.loads((out_dir / "report.json").read_text(encoding="utf-8"))
    assert report["negotiations"] == {"vehicle-data-offer": "Agreed"}
    audit = (out_dir / "audit.ndjson").read_text(encoding="utf-8")
    assert len(audit.splitlines()) == 6


def test_simulate_violation_exits_nonzero(tmp_path):
    scenario = {
        "name": "violating",
        "provider": "https://www.example.com/provider",
        "consumer": CONSUMER_IRI.value,
        "clock_start": "2023-07-01T00:00:00Z",
        "clock_step": "PT1H",
        "end": "2023-07-11T00:00:00Z",
        "assets": [{"uid": FILE1.value, "title": "File 1"}],
        "offers": [
            {
                "id": "offer1",
                "target": FILE1.value,
                "patterns": [
                    {"id": "deletion", "params": {
                        "deadline": "2023-07-10T00:00:00Z",
                        "grant_action": "http://www.w3.org/ns/odrl/2/read",
                    }}
                ],
            }
        ],
        "script": [
            {"at": "2023-07-01T00:00:00Z", "action": "negotiate",
             "args": {"offer": "offer1"}},
            {"at": "2023-07-01T01:00:00Z", "action": "request",
             "args": {"offer": "offer1"}},
        ],
    }
    scenario_file = tmp_path / "scenario.json"
    scenario_file.write_text(json.dumps(scenario), encoding="utf-8")
    out_dir = tmp_path / "out"
    assert main(["simulate", str(scenario_file), "-o", str(out_dir)]) == EXIT_FINDINGS


def test_audit_check_detects_violation(tmp_path, capsys):
    agreement = _agreement_file(tmp_path)
    log_file = tmp_path / "audit.ndjson"
    log_file.write_text(
        json.dumps(
            {
                "seq": 1,
                "at": "2023-07-01T00:00:00+00:00",
                "actor": CONSUMER_IRI.value,
                "action": "http://www.w3.org/ns/odrl/2/read",
                "target": FILE1.value,
                "outcome": "Permitted",
                "detail": "",
            }
        )
        + "\n",
        encoding="utf-8",
    )
    code = main(
        ["audit-check", "--agreement", agreement, "--log", str(log_file),
         "--now", "2023-07-11T00:00:00Z"]
    )
    assert code == EXIT_FINDINGS
    statuses = json.loads(capsys.readouterr().out)
    violated = [s for s in statuses if s["status"] == "Violated"]
    assert len(violated) == 1
    assert violated[0]["action"] == "http://www.w3.org/ns/odrl/2/delete"


def test_audit_check_clean_log(tmp_path, capsys):
    agreement = _agreement_file(tmp_path)
    records = [
        {
            "seq": 1,
            "at": "2023-07-01T00:00:00+00:00",
            "actor": CONSUMER_IRI.value,
            "action": "http://www.w3.org/ns/odrl/2/read",
            "target": FILE1.value,
            "outcome": "Permitted",
            "detail": "",
        },
        {
            "seq": 2,
            "at": "2023-07-02T00:00:00+00:00",
            "actor": CONSUMER_IRI.value,
            "action": "http://www.w3.org/ns/odrl/2/delete",
            "target": FILE1.value,
            "outcome": "Executed",
            "detail": "",
        },
        {
            "seq": 3,
            "at": "2023-07-02T00:00:00+00:00",
            "actor": CONSUMER_IRI.value,
            "action": "http://www.w3.org/ns/odrl/2/anonymize",
            "target": FILE1.value,
            "outcome": "Executed",
            "detail": "",
        },
    ]
    log_file = tmp_path / "audit.ndjson"
    log_file.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    code = main(
        ["audit-check", "--agreement", agreement, "--log", str(log_file),
         "--now", "2023-07-11T00:00:00Z"]
    )
    assert code == EXIT_OK


def test_parse_error_exit_code(tmp_path):
    path = tmp_path / "bad.ttl"
    path.write_text("<http://e.com/p> a odrl:Policy .", encoding="utf-8")
    assert main(["validate", str(path)]) == EXIT_IO


def test_missing_file_exit_code(tmp_path):
    assert main(["validate", str(tmp_path / "ghost.ttl")]) == EXIT_IO


def test_unknown_subcommand_is_usage_error(capsys):
    assert main(["frobnicate"]) == EXIT_USAGE
    assert "usage" in capsys.readouterr().err.lower()


def test_stdout_is_machine_parseable(corpus_file, capsys):
    main(["classify", corpus_file])
    json.loads(capsys.readouterr().out)  # must not raise
