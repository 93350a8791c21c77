"""Command-line front end.

Machine-parseable output (Turtle or JSON) goes to stdout; diagnostics go to
stderr. Exit codes: 0 success, 1 validation/violation findings, 2 usage
error, 3 I/O or parse error. Set ``DSP_PROFILE`` to point at an additional
profile definition file.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import patterns, textio
from .enforcement import AuditLog, ObligationState, detective_check
from .model import (
    Iri,
    Policy,
    Severity,
    TypedLiteral,
    parse_datetime,
    validate_policy,
)
from .pdp import (
    AccessRequest,
    Decision,
    EvaluationError,
    evaluate_request,
    usage_state_from_jsonable,
)
from .pip import AttributeService, RegionHierarchy, StaticAttributeProvider
from .profile import default_registry, load_profile_file
from .simulator import load_scenario, run

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_USAGE = 2
EXIT_IO = 3


def _fail(message: str, code: int) -> int:
    print(message, file=sys.stderr)
    return code


def _read_text(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _registry():
    registry = default_registry()
    profile_path = os.environ.get("DSP_PROFILE")
    if profile_path:
        registry = load_profile_file(profile_path, registry)
    return registry


def _parse_policies(path: str) -> list[Policy]:
    return textio.parse(_read_text(path))


def _violation_json(violation) -> dict:
    return {
        "severity": violation.severity.value,
        "path": violation.path,
        "message": violation.message,
    }


def _cmd_validate(args: argparse.Namespace) -> int:
    policies = _parse_policies(args.file)
    registry = _registry()
    findings = []
    for policy in policies:
        for violation in validate_policy(policy, registry):
            findings.append((policy.uid.value, violation))
    errors = [f for f in findings if f[1].severity is Severity.ERROR]
    for uid, violation in findings:
        if violation.severity is Severity.WARNING:
            print(f"warning: {uid}: {violation.path}: {violation.message}", file=sys.stderr)
    if errors:
        print(
            json.dumps(
                [{"policy": uid, **_violation_json(v)} for uid, v in errors], indent=2
            )
        )
        return EXIT_FINDINGS
    print("valid")
    return EXIT_OK


def _cmd_canon(args: argparse.Namespace) -> int:
    policies = _parse_policies(args.file)
    sys.stdout.write(textio.serialize_document(policies))
    return EXIT_OK


def _cmd_patterns_list(args: argparse.Namespace) -> int:
    if args.markdown:
        sys.stdout.write(patterns.catalog_markdown())
        return EXIT_OK
    for descriptor in patterns.list_patterns():
        pip_roles = ",".join(sorted(role.value for role in descriptor.pip_roles))
        print(
            f"{descriptor.id}\t{pip_roles}\t{descriptor.pap_pdp_role.value}"
            f"\t{descriptor.enforcement_class.value}\t{descriptor.source.value}"
        )
    return EXIT_OK


def _cmd_patterns_new(args: argparse.Namespace) -> int:
    params = json.loads(_read_text(args.params)) if args.params else {}
    if not isinstance(params, dict):
        return _fail("parameter file must hold a JSON object", EXIT_USAGE)
    try:
        policy = patterns.instantiate(args.id, params)
    except patterns.UnknownPatternError:
        return _fail(f"unknown pattern id {args.id!r}", EXIT_USAGE)
    except patterns.PatternParameterError as exc:
        return _fail(str(exc), EXIT_USAGE)
    text = textio.serialize(policy)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_classify(args: argparse.Namespace) -> int:
    policies = _parse_policies(args.file)
    print(
        json.dumps(
            {policy.uid.value: patterns.classify(policy) for policy in policies}, indent=2
        )
    )
    return EXIT_OK


def _request_from_json(data: dict) -> AccessRequest:
    attributes = {
        Iri(key): TypedLiteral(str(value)) for key, value in data.get("attributes", {}).items()
    }
    return AccessRequest(
        requester=Iri(data["requester"]),
        target=Iri(data["target"]),
        action=Iri(data["action"]),
        timestamp=parse_datetime(data["timestamp"]),
        units_requested=int(data.get("units", 1)),
        attributes=attributes,
    )


def _decision_json(decision: Decision) -> dict:
    return {
        "outcome": decision.outcome.value,
        "reason": decision.reason,
        "activated_duties": [
            {
                "action": duty.action.action.value,
                "target": duty.target.value if duty.target else None,
                "assignee": duty.assignee.value if duty.assignee else None,
            }
            for duty in decision.activated_duties
        ],
        "trace": [
            {
                "leftOperand": entry.constraint.left_operand.value,
                "operator": entry.constraint.operator.value,
                "rightOperand": str(entry.constraint.right_operand),
                "status": entry.verdict.status.value,
                "reason": entry.verdict.reason,
            }
            for entry in decision.trace
        ],
    }


def _cmd_evaluate(args: argparse.Namespace) -> int:
    policies = _parse_policies(args.agreement)
    if len(policies) != 1:
        return _fail("agreement file must contain exactly one policy", EXIT_FINDINGS)
    request = _request_from_json(json.loads(_read_text(args.request)))
    state = usage_state_from_jsonable(json.loads(_read_text(args.state)) if args.state else {})
    providers = []
    if args.attributes:
        raw = json.loads(_read_text(args.attributes))
        values = {
            (Iri(operand), Iri(subject)): TypedLiteral(str(value))
            for subject, pairs in raw.items()
            for operand, value in pairs.items()
        }
        providers.append(StaticAttributeProvider(values))
    regions = RegionHierarchy(json.loads(_read_text(args.regions)) if args.regions else {})
    service = AttributeService(providers, regions)
    try:
        decision = evaluate_request(policies[0], request, state, service)
    except EvaluationError as exc:
        payload = {"error": str(exc), "violations": [_violation_json(v) for v in exc.violations]}
        print(json.dumps(payload, indent=2))
        return EXIT_FINDINGS
    print(json.dumps(_decision_json(decision), indent=2))
    return EXIT_OK


def _cmd_simulate(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    result = run(scenario)
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "audit.ndjson").write_text(result.log.dumps(), encoding="utf-8")
    report = result.report(scenario.name)
    (out_dir / "report.json").write_text(
        json.dumps(report, indent=2) + "\n", encoding="utf-8"
    )
    print(json.dumps(report, indent=2))
    violated = any(o["status"] == ObligationState.VIOLATED.value for o in report["obligations"])
    return EXIT_FINDINGS if violated or result.revocations else EXIT_OK


def _cmd_audit_check(args: argparse.Namespace) -> int:
    policies = _parse_policies(args.agreement)
    if len(policies) != 1:
        return _fail("agreement file must contain exactly one policy", EXIT_FINDINGS)
    with open(args.log, encoding="utf-8") as fh:
        log = AuditLog.load(fh)
    now = parse_datetime(args.now)
    window_start = parse_datetime(args.window_start) if args.window_start else None
    statuses = detective_check(policies[0], log, now, window_start=window_start)
    print(
        json.dumps(
            [
                {
                    "action": status.duty.action.action.value,
                    "target": status.duty.target.value if status.duty.target else None,
                    "status": status.status.value,
                    "deadline": status.deadline.isoformat() if status.deadline else None,
                    "fulfilled_at": status.fulfilled_at.isoformat()
                    if status.fulfilled_at
                    else None,
                    "detail": status.detail,
                }
                for status in statuses
            ],
            indent=2,
        )
    )
    if any(status.status is ObligationState.VIOLATED for status in statuses):
        return EXIT_FINDINGS
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="usagectl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate policies in a Turtle file")
    p.add_argument("file")
    p.set_defaults(handler=_cmd_validate)

    p = sub.add_parser("canon", help="canonicalize policies to stdout")
    p.add_argument("file")
    p.set_defaults(handler=_cmd_canon)

    p = sub.add_parser("patterns", help="pattern catalog operations")
    pattern_sub = p.add_subparsers(dest="patterns_command", required=True)
    p_list = pattern_sub.add_parser("list", help="list the 22 catalog entries")
    p_list.add_argument("--markdown", action="store_true")
    p_list.set_defaults(handler=_cmd_patterns_list)
    p_new = pattern_sub.add_parser("new", help="instantiate a pattern")
    p_new.add_argument("id")
    p_new.add_argument("--params", help="JSON object with template parameters")
    p_new.add_argument("-o", "--output")
    p_new.set_defaults(handler=_cmd_patterns_new)

    p = sub.add_parser("classify", help="match policies against the catalog")
    p.add_argument("file")
    p.set_defaults(handler=_cmd_classify)

    p = sub.add_parser("evaluate", help="decide one access request")
    p.add_argument("--agreement", required=True)
    p.add_argument("--request", required=True)
    p.add_argument("--state")
    p.add_argument("--attributes", help="JSON: subject -> {operand: value}")
    p.add_argument("--regions", help="JSON region hierarchy file")
    p.set_defaults(handler=_cmd_evaluate)

    p = sub.add_parser("simulate", help="run a scenario file")
    p.add_argument("scenario")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("audit-check", help="detective check of an audit log")
    p.add_argument("--agreement", required=True)
    p.add_argument("--log", required=True)
    p.add_argument("--now", required=True)
    p.add_argument("--window-start", dest="window_start")
    p.set_defaults(handler=_cmd_audit_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.handler(args)
    except textio.ParseError as exc:
        return _fail(f"parse error: {exc}", EXIT_IO)
    except FileNotFoundError as exc:
        return _fail(f"cannot open {exc.filename}", EXIT_IO)
    except json.JSONDecodeError as exc:
        return _fail(f"malformed JSON: {exc}", EXIT_IO)
    except (KeyError, ValueError) as exc:
        return _fail(f"invalid input: {exc}", EXIT_IO)


if __name__ == "__main__":
    sys.exit(main())
