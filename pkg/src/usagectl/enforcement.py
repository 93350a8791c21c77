"""Policy Enforcement Point plus detective and continuous mechanisms.

The PEP intercepts access requests, enforces PDP decisions, delays requests
guarded by unfulfilled pre-duties, and settles billing duties against the
credit balance. Every outcome lands in an append-only audit log (one JSON
record per line when persisted). Detective checking replays the log against
an agreement's duties and is idempotent; continuous monitoring re-examines
ongoing usages each clock tick and revokes violators, newest connection
first.

The audit log accepts appends from one writer at a time per agreement;
readers may scan the immutable record tuple concurrently.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timedelta
from decimal import Decimal
from enum import Enum
from typing import IO, Iterable, Mapping, Sequence

from . import vocab
from .model import (
    ActionExpression,
    Constraint,
    Iri,
    Operator,
    Policy,
    Rule,
    RuleKind,
    TypedLiteral,
    XSD_DURATION,
    duration_iso,
    literal_value,
    parse_datetime,
    rule_key,
)
from .pdp import (
    AccessRequest,
    Decision,
    DecisionOutcome,
    UsageState,
    commit_usage,
    evaluate_request,
    inherit_parties,
)
from .pip import AttributeService


class AuditOutcome(str, Enum):
    PERMITTED = "Permitted"
    DENIED = "Denied"
    DELAYED = "Delayed"
    EXECUTED = "Executed"
    DUTY_FULFILLED = "DutyFulfilled"
    DUTY_VIOLATED = "DutyViolated"
    REVOKED = "Revoked"
    NOTIFIED = "Notified"


@dataclass(frozen=True)
class AuditRecord:
    seq: int
    at: datetime
    actor: Iri
    action: Iri
    target: Iri | None
    outcome: AuditOutcome
    detail: str = ""

    def to_json_line(self) -> str:
        return json.dumps(
            {
                "seq": self.seq,
                "at": self.at.isoformat(),
                "actor": self.actor.value,
                "action": self.action.value,
                "target": self.target.value if self.target else None,
                "outcome": self.outcome.value,
                "detail": self.detail,
            },
            separators=(",", ":"),
        )

    @classmethod
    def from_json_line(cls, line: str) -> "AuditRecord":
        data = json.loads(line)
        return cls(
            seq=int(data["seq"]),
            at=parse_datetime(data["at"]),
            actor=Iri(data["actor"]),
            action=Iri(data["action"]),
            target=Iri(data["target"]) if data.get("target") else None,
            outcome=AuditOutcome(data["outcome"]),
            detail=data.get("detail", ""),
        )


class AuditLog:
    """Append-only event trail with strictly increasing sequence numbers."""

    def __init__(self, records: Iterable[AuditRecord] = ()) -> None:
        self._records: list[AuditRecord] = []
        for record in records:
            if self._records and record.seq <= self._records[-1].seq:
                raise ValueError("audit sequence numbers must be strictly increasing")
            self._records.append(record)

    @property
    def records(self) -> tuple[AuditRecord, ...]:
        return tuple(self._records)

    def append(
        self,
        at: datetime,
        actor: Iri,
        action: Iri,
        target: Iri | None,
        outcome: AuditOutcome,
        detail: str = "",
    ) -> AuditRecord:
        seq = self._records[-1].seq + 1 if self._records else 1
        record = AuditRecord(seq, at, actor, action, target, outcome, detail)
        self._records.append(record)
        return record

    def dumps(self) -> str:
        return "".join(record.to_json_line() + "\n" for record in self._records)

    def dump(self, fp: IO[str]) -> None:
        fp.write(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "AuditLog":
        records = [AuditRecord.from_json_line(line) for line in text.splitlines() if line.strip()]
        return cls(records)

    @classmethod
    def load(cls, fp: IO[str]) -> "AuditLog":
        return cls.loads(fp.read())

    def __len__(self) -> int:
        return len(self._records)


class ObligationState(str, Enum):
    PENDING = "Pending"
    FULFILLED = "Fulfilled"
    VIOLATED = "Violated"


@dataclass(frozen=True)
class ObligationStatus:
    duty: Rule
    status: ObligationState
    deadline: datetime | None = None
    fulfilled_at: datetime | None = None
    detail: str = ""


class EnforcementOutcome(str, Enum):
    ALLOWED = "allowed"
    BLOCKED = "blocked"
    DELAYED = "delayed"


@dataclass(frozen=True)
class EnforcementAction:
    outcome: EnforcementOutcome
    decision: Decision | None = None
    duties: tuple[Rule, ...] = ()
    reason: str = ""


@dataclass(frozen=True)
class OngoingUsage:
    """A long-lived transfer (stream/connection) under an agreement."""

    id: str
    requester: Iri
    action: Iri
    target: Iri
    started_at: datetime


@dataclass(frozen=True)
class RevocationEvent:
    usage_id: str
    at: datetime
    reason: str


def record_evidence(
    log: AuditLog,
    actor: Iri,
    action: Iri,
    target: Iri | None,
    at: datetime,
    attributes: Mapping[str, str] | None = None,
) -> AuditRecord:
    """Append a self-reported execution (delete, anonymize, update, ...).

    The log is append-only, so duplicates are stored as-is; out-of-order
    timestamps are accepted but flagged in the record detail.
    """
    payload: dict = {}
    if attributes:
        payload["attributes"] = dict(attributes)
    if log.records and at < log.records[-1].at:
        payload["out_of_order"] = True
    detail = json.dumps(payload, separators=(",", ":"), sort_keys=True) if payload else ""
    return log.append(at, actor, action, target, AuditOutcome.EXECUTED, detail)


def _evidence_attributes(record: AuditRecord) -> dict:
    try:
        payload = json.loads(record.detail)
    except (json.JSONDecodeError, TypeError):
        return {}
    if not isinstance(payload, dict):
        return {}
    attrs = payload.get("attributes", {})
    return attrs if isinstance(attrs, dict) else {}


def _is_precondition(duty: Rule) -> bool:
    return any(
        c.left_operand == vocab.ODRL_EVENT
        and c.operator is Operator.LT
        and c.right_operand == vocab.ODRL_POLICY_USAGE
        for c in duty.constraints
    )


def _datetime_bound(c: Constraint) -> tuple[datetime, Operator] | None:
    if c.left_operand != vocab.ODRL_DATETIME or not isinstance(c.right_operand, TypedLiteral):
        return None
    try:
        value = literal_value(c.right_operand)
    except ValueError:
        return None
    if isinstance(value, datetime):
        return value, c.operator
    return None


def _deadline_of(duty: Rule) -> tuple[datetime, Operator] | None:
    for c in duty.constraints:
        bound = _datetime_bound(c)
        if bound is not None and bound[1] in (Operator.LT, Operator.LTEQ):
            return bound
    return None


def _interval_of(duty: Rule) -> timedelta | None:
    for c in duty.constraints:
        if c.left_operand == vocab.ODRL_TIME_INTERVAL and isinstance(c.right_operand, TypedLiteral):
            try:
                value = literal_value(c.right_operand)
            except ValueError:
                continue
            if isinstance(value, timedelta):
                return value
    return None


_EVIDENCE_OUTCOMES = (AuditOutcome.EXECUTED, AuditOutcome.DUTY_FULFILLED)

# evidence relevance classification
_FULFILLS, _CONTRADICTS, _IRRELEVANT = "fulfills", "contradicts", "irrelevant"


def _check_evidence_constraint(
    c: Constraint, record: AuditRecord, service: AttributeService | None
) -> str:
    """How one constraint judges one evidence record."""
    if c.left_operand == vocab.ODRL_EVENT or c.left_operand == vocab.ODRL_TIME_INTERVAL:
        return _FULFILLS  # ordering/frequency markers are handled elsewhere
    if c.left_operand == vocab.ODRL_DATETIME:
        bound = _datetime_bound(c)
        if bound is None:
            return _FULFILLS
        value, op = bound
        ok = {
            Operator.LT: record.at < value,
            Operator.LTEQ: record.at <= value,
            Operator.GT: record.at > value,
            Operator.GTEQ: record.at >= value,
        }.get(op, True)
        return _FULFILLS if ok else _IRRELEVANT
    attrs = _evidence_attributes(record)
    value = attrs.get(c.left_operand.value)
    if value is None:
        return _IRRELEVANT
    right = (
        c.right_operand.value
        if isinstance(c.right_operand, Iri)
        else c.right_operand.lexical
    )
    if c.operator is Operator.EQ:
        return _FULFILLS if str(value) == right else _CONTRADICTS
    if c.operator is Operator.NEQ:
        return _FULFILLS if str(value) != right else _CONTRADICTS
    if c.operator is Operator.IS_PART_OF:
        if service is not None and service.contains(right, str(value)):
            return _FULFILLS
        return _CONTRADICTS
    if c.operator is Operator.IS_ANY_OF:
        allowed = [item.strip() for item in right.split(",")]
        return _FULFILLS if str(value) in allowed else _CONTRADICTS
    return _IRRELEVANT


def _classify_evidence(
    duty: Rule, record: AuditRecord, service: AttributeService | None
) -> str:
    if record.outcome not in _EVIDENCE_OUTCOMES:
        return _IRRELEVANT
    if record.action != duty.action.action:
        return _IRRELEVANT
    if duty.target is not None and record.target != duty.target:
        return _IRRELEVANT
    if duty.assignee is not None and record.actor != duty.assignee:
        return _IRRELEVANT
    outcome = _FULFILLS
    for c in (*duty.constraints, *duty.action.refinements):
        result = _check_evidence_constraint(c, record, service)
        if result == _CONTRADICTS:
            return _CONTRADICTS
        if result == _IRRELEVANT:
            outcome = _IRRELEVANT
    return outcome


def _find_fulfilment(
    duty: Rule, log: AuditLog, service: AttributeService | None
) -> tuple[AuditRecord | None, AuditRecord | None]:
    """Return (first fulfilling record, first contradicting record)."""
    fulfilled = None
    contradicted = None
    for record in log.records:
        kind = _classify_evidence(duty, record, service)
        if kind == _FULFILLS and fulfilled is None:
            fulfilled = record
        elif kind == _CONTRADICTS and contradicted is None:
            contradicted = record
    return fulfilled, contradicted


def check_up_to_dateness(
    update_events: Sequence[datetime],
    interval: timedelta,
    window: tuple[datetime, datetime],
    duty: Rule | None = None,
) -> ObligationStatus:
    """Fulfilled iff no gap between consecutive update events (including the
    window edges) exceeds the interval; only events inside the window count."""
    start, end = window
    if duty is None:
        duty = Rule(
            RuleKind.DUTY,
            action=ActionExpression(vocab.DSP_UPDATE),
            constraints=(
                Constraint(
                    vocab.ODRL_TIME_INTERVAL,
                    Operator.EQ,
                    TypedLiteral(duration_iso(interval), XSD_DURATION),
                ),
            ),
        )
    if end <= start:
        return ObligationStatus(duty, ObligationState.FULFILLED, detail="empty window")
    events = sorted(t for t in update_events if start <= t <= end)
    points = [start, *events, end]
    for previous, current in zip(points, points[1:]):
        gap = current - previous
        if gap > interval:
            return ObligationStatus(
                duty,
                ObligationState.VIOLATED,
                detail=(
                    f"gap of {duration_iso(gap)} starting {previous.isoformat()} "
                    f"exceeds {duration_iso(interval)}"
                ),
            )
    return ObligationStatus(duty, ObligationState.FULFILLED)


def _activated_duties(agreement: Policy, log: AuditLog) -> list[Rule]:
    """Top-level duties are always active; duties nested in a permission
    activate once that permission has produced a Permitted record."""
    duties: list[Rule] = []
    seen: set = set()

    def add(duty: Rule) -> None:
        key = rule_key(duty)
        if key not in seen:
            seen.add(key)
            duties.append(duty)

    for rule in agreement.rules:
        if rule.kind is RuleKind.DUTY:
            add(rule)
        elif rule.kind is RuleKind.PERMISSION and rule.duties:
            exercised = any(
                record.outcome is AuditOutcome.PERMITTED
                and (rule.target is None or record.target == rule.target)
                and (rule.assignee is None or record.actor == rule.assignee)
                and (
                    rule.action.action == record.action
                    or rule.action.action == vocab.ODRL_USE
                )
                for record in log.records
            )
            if exercised:
                for duty in rule.duties:
                    add(inherit_parties(duty, rule))
    return duties


def detective_check(
    agreement: Policy,
    log: AuditLog,
    now: datetime,
    service: AttributeService | None = None,
    window_start: datetime | None = None,
) -> list[ObligationStatus]:
    """Judge every activated duty from the audit trail.

    Fulfilled when satisfying evidence exists; Violated when a deadline
    passed without it, when evidence contradicts the duty's constraints, or
    when an update-frequency window has an oversized gap; Pending otherwise.
    Repeated calls at the same ``now`` return identical statuses.
    """
    statuses: list[ObligationStatus] = []
    for duty in _activated_duties(agreement, log):
        interval = _interval_of(duty)
        if interval is not None:
            events = [
                record.at
                for record in log.records
                if record.outcome in _EVIDENCE_OUTCOMES
                and record.action == duty.action.action
                and (duty.target is None or record.target == duty.target)
                and (duty.assignee is None or record.actor == duty.assignee)
            ]
            start = window_start
            if start is None:
                start = log.records[0].at if log.records else now
            status = check_up_to_dateness(events, interval, (start, now), duty)
            statuses.append(status)
            continue

        deadline_info = _deadline_of(duty)
        deadline = deadline_info[0] if deadline_info else None
        fulfilled, contradicted = _find_fulfilment(duty, log, service)
        # fulfilment wins over contradicting evidence: statuses never move
        # Fulfilled -> Violated on an append-only log
        if fulfilled is not None:
            statuses.append(
                ObligationStatus(
                    duty,
                    ObligationState.FULFILLED,
                    deadline=deadline,
                    fulfilled_at=fulfilled.at,
                )
            )
        elif contradicted is not None:
            statuses.append(
                ObligationStatus(
                    duty,
                    ObligationState.VIOLATED,
                    deadline=deadline,
                    detail=f"evidence at {contradicted.at.isoformat()} contradicts the duty",
                )
            )
        elif deadline is not None and (
            now >= deadline if deadline_info[1] is Operator.LT else now > deadline
        ):
            statuses.append(
                ObligationStatus(
                    duty,
                    ObligationState.VIOLATED,
                    deadline=deadline,
                    detail="deadline passed without evidence",
                )
            )
        else:
            statuses.append(ObligationStatus(duty, ObligationState.PENDING, deadline=deadline))
    return statuses


def _pay_amount(duty: Rule) -> Decimal | None:
    for c in duty.constraints:
        if c.left_operand == vocab.ODRL_PAY_AMOUNT and isinstance(c.right_operand, TypedLiteral):
            try:
                value = literal_value(c.right_operand)
            except ValueError:
                return None
            if isinstance(value, (int, Decimal)):
                return Decimal(value)
    return None


def pep_handle(
    req: AccessRequest,
    agreement: Policy,
    state: UsageState,
    service: AttributeService,
    log: AuditLog,
    revoked: bool = False,
) -> tuple[EnforcementAction, UsageState]:
    """Intercept one request: decide, enforce, audit.

    Permit commits usage and registers activated duties; a permission guarded
    by an unfulfilled pre-duty (constraint ``event lt policyUsage``) is
    delayed rather than executed; billing duties are settled immediately and
    block on insufficient credit. Deny, NotApplicable, and revoked agreements
    block with an audit record.
    """
    now = req.timestamp
    if revoked:
        log.append(now, req.requester, req.action, req.target, AuditOutcome.REVOKED,
                   "agreement revoked")
        return EnforcementAction(EnforcementOutcome.BLOCKED, None, (), "agreement revoked"), state

    decision = evaluate_request(agreement, req, state, service)
    if decision.outcome is not DecisionOutcome.PERMIT:
        log.append(
            now, req.requester, req.action, req.target, AuditOutcome.DENIED,
            f"{decision.outcome.value}: {decision.reason}",
        )
        return (
            EnforcementAction(EnforcementOutcome.BLOCKED, decision, (), decision.reason),
            state,
        )

    top_level_duties = [r for r in agreement.rules if r.kind is RuleKind.DUTY]
    pre_duties = [
        d for d in (*decision.activated_duties, *top_level_duties) if _is_precondition(d)
    ]
    for duty in pre_duties:
        fulfilled, _ = _find_fulfilment(duty, log, service)
        if fulfilled is None:
            log.append(
                now, req.requester, req.action, req.target, AuditOutcome.DELAYED,
                f"awaiting pre-duty {duty.action.action.value}",
            )
            return (
                EnforcementAction(
                    EnforcementOutcome.DELAYED,
                    decision,
                    (duty,),
                    f"pre-duty {duty.action.action.value} unfulfilled",
                ),
                state,
            )

    new_state = state
    for duty in decision.activated_duties:
        if duty.action.action != vocab.ODRL_COMPENSATE:
            continue
        amount = _pay_amount(duty)
        if amount is None:
            continue
        try:
            new_state = new_state.with_charge(req.requester, req.action, amount)
        except ValueError:
            log.append(
                now, req.requester, req.action, req.target, AuditOutcome.DENIED,
                f"insufficient credit for {amount} {state.currency}",
            )
            return (
                EnforcementAction(
                    EnforcementOutcome.BLOCKED, decision, (), "insufficient credit"
                ),
                state,
            )
        log.append(
            now, req.requester, vocab.ODRL_COMPENSATE, req.target,
            AuditOutcome.DUTY_FULFILLED, f"charged {amount} {state.currency}",
        )

    new_state = commit_usage(decision, req, new_state)
    duty_names = ",".join(d.action.action.value for d in decision.activated_duties)
    log.append(
        now, req.requester, req.action, req.target, AuditOutcome.PERMITTED,
        f"duties: {duty_names}" if duty_names else "",
    )
    log.append(
        now, req.requester, req.action, req.target, AuditOutcome.EXECUTED,
        f"units={req.units_requested}",
    )
    return (
        EnforcementAction(
            EnforcementOutcome.ALLOWED, decision, decision.activated_duties, "permitted"
        ),
        new_state,
    )


def _connection_bound(rule: Rule) -> int | None:
    for c in rule.constraints:
        if c.left_operand == vocab.DSP_CONCURRENT_CONNECTIONS and isinstance(
            c.right_operand, TypedLiteral
        ):
            try:
                value = literal_value(c.right_operand)
            except ValueError:
                continue
            if isinstance(value, int):
                return value
    return None


def _usage_matches(rule: Rule, usage: OngoingUsage) -> bool:
    if rule.kind is not RuleKind.PERMISSION:
        return False
    if rule.target is not None and rule.target != usage.target:
        return False
    if rule.assignee is not None and rule.assignee != usage.requester:
        return False
    return rule.action.action == usage.action or rule.action.action == vocab.ODRL_USE


def _has_inform_duty(agreement: Policy) -> bool:
    for rule in agreement.rules:
        if rule.kind is RuleKind.DUTY and rule.action.action == vocab.ODRL_INFORM:
            return True
        for duty in rule.duties:
            if duty.action.action == vocab.ODRL_INFORM:
                return True
    return False


def continuous_monitor_step(
    active_usages: Sequence[OngoingUsage],
    agreement: Policy,
    service: AttributeService,
    now: datetime,
    log: AuditLog,
) -> list[RevocationEvent]:
    """Re-check ongoing usages: expired time windows and changed or missing
    location attributes revoke the usage; connection-bound overflow revokes
    the newest connections first. Revocations are audited, and a Notified
    record is added when the agreement carries an inform duty."""
    events: list[RevocationEvent] = []
    revoked_ids: set[str] = set()

    def revoke(usage: OngoingUsage, reason: str) -> None:
        if usage.id in revoked_ids:
            return
        revoked_ids.add(usage.id)
        events.append(RevocationEvent(usage.id, now, reason))
        log.append(now, usage.requester, usage.action, usage.target, AuditOutcome.REVOKED, reason)
        if _has_inform_duty(agreement):
            log.append(
                now, usage.requester, vocab.ODRL_INFORM, usage.target,
                AuditOutcome.NOTIFIED, f"data owner notified: {reason}",
            )

    for usage in active_usages:
        for rule in agreement.rules:
            if not _usage_matches(rule, usage):
                continue
            for c in rule.constraints:
                if c.left_operand == vocab.ODRL_DATETIME:
                    right = c.right_operand
                    if not isinstance(right, TypedLiteral):
                        continue
                    try:
                        bound = literal_value(right)
                    except ValueError:
                        continue
                    if not isinstance(bound, datetime):
                        continue
                    ok = (
                        now < bound
                        if c.operator is Operator.LT
                        else now <= bound
                        if c.operator is Operator.LTEQ
                        else now > bound
                        if c.operator is Operator.GT
                        else now >= bound
                        if c.operator is Operator.GTEQ
                        else True
                    )
                    if not ok:
                        revoke(usage, "time restriction expired")
                elif c.left_operand == vocab.ODRL_SPATIAL:
                    value = service.get(vocab.ODRL_SPATIAL, usage.requester, now)
                    if value is None:
                        revoke(usage, "location attribute unavailable")
                        continue
                    right_code = (
                        c.right_operand.value
                        if isinstance(c.right_operand, Iri)
                        else c.right_operand.lexical
                    )
                    if c.operator is Operator.IS_PART_OF:
                        if not service.contains(right_code, value.lexical):
                            revoke(usage, "location moved outside allowed region")
                    elif c.operator is Operator.EQ and value.lexical != right_code:
                        revoke(usage, "location changed")

    # connection bounds: keep the oldest, revoke the newest beyond the bound
    for rule in agreement.rules:
        bound = _connection_bound(rule)
        if bound is None:
            continue
        matching = sorted(
            (u for u in active_usages if _usage_matches(rule, u) and u.id not in revoked_ids),
            key=lambda u: (u.started_at, u.id),
        )
        for usage in matching[bound:]:
            revoke(usage, f"concurrent connections exceed bound of {bound}")
    return events
