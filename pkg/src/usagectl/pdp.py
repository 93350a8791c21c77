"""Policy Decision Point: constraint evaluation against context and usage
state, request decisions over agreements, and the evaluate/commit protocol
for stateful counters.

Evaluation never mutates state; callers apply :func:`commit_usage` after a
permitted transfer actually happens. Completion is deny-biased: a constraint
that cannot be determined (missing PIP attribute) blocks the request.
Conflicts resolve deny-overrides. Usage state follows a single-writer
contract per agreement; distinct agreements may commit concurrently.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta
from decimal import Decimal
from enum import Enum
from typing import Mapping, Protocol, Sequence

from . import vocab
from .model import (
    Constraint,
    Iri,
    Operator,
    Policy,
    PolicyKind,
    Rule,
    RuleKind,
    TypedLiteral,
    Violation,
    is_valid,
    literal_value,
    parse_datetime,
    parse_duration,
    validate_policy,
)
from .pip import AttributeService


class EvaluationError(Exception):
    """The agreement itself is unusable (as opposed to a Deny decision)."""

    def __init__(self, message: str, violations: Sequence[Violation] = ()) -> None:
        super().__init__(message)
        self.violations = tuple(violations)


@dataclass(frozen=True)
class AccessRequest:
    """PEP-side description of an attempted action execution.

    ``units_requested`` counts executions of the action (e.g. MiB reads under
    a unit-of-count refinement). ``attributes`` carries requester-supplied
    claims such as purpose; timestamps are expected to be monotone per
    requester within a session.
    """

    requester: Iri
    target: Iri
    action: Iri
    timestamp: datetime
    units_requested: int = 1
    attributes: Mapping[Iri, TypedLiteral] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.units_requested < 1:
            raise ValueError("units_requested must be >= 1")


@dataclass(frozen=True)
class UsageRecord:
    """Counters for one (assignee, action) pair within an agreement."""

    executed_count: int = 0
    exercise_log: tuple[datetime, ...] = ()
    active_connections: int = 0
    credit_balance: Decimal = Decimal("0")

    def __post_init__(self) -> None:
        object.__setattr__(self, "exercise_log", tuple(self.exercise_log))
        if self.executed_count != len(self.exercise_log):
            raise ValueError("executed_count must equal the exercise log length")
        if self.active_connections < 0:
            raise ValueError("active_connections must be non-negative")


@dataclass(frozen=True)
class UsageState:
    """Per-agreement usage counters, updated functionally."""

    records: Mapping[tuple[str, str], UsageRecord] = field(default_factory=dict)
    default_credit: Decimal = Decimal("0")
    currency: str = "EUR"

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", dict(self.records))

    def key(self, assignee: Iri, action: Iri) -> tuple[str, str]:
        return (assignee.value, action.value)

    def record_for(self, assignee: Iri, action: Iri) -> UsageRecord:
        key = self.key(assignee, action)
        if key in self.records:
            return self.records[key]
        return UsageRecord(credit_balance=self.default_credit)

    def _with_record(self, key: tuple[str, str], record: UsageRecord) -> "UsageState":
        records = dict(self.records)
        records[key] = record
        return replace(self, records=records)

    def with_execution(
        self,
        assignee: Iri,
        action: Iri,
        units: int,
        at: datetime,
        open_connection: bool = False,
    ) -> "UsageState":
        record = self.record_for(assignee, action)
        updated = replace(
            record,
            executed_count=record.executed_count + units,
            exercise_log=record.exercise_log + (at,) * units,
            active_connections=record.active_connections + (1 if open_connection else 0),
        )
        return self._with_record(self.key(assignee, action), updated)

    def with_connection_released(self, assignee: Iri, action: Iri) -> "UsageState":
        record = self.record_for(assignee, action)
        if record.active_connections == 0:
            return self
        updated = replace(record, active_connections=record.active_connections - 1)
        return self._with_record(self.key(assignee, action), updated)

    def with_charge(self, assignee: Iri, action: Iri, amount: Decimal) -> "UsageState":
        record = self.record_for(assignee, action)
        if record.credit_balance < amount:
            raise ValueError("insufficient credit")
        updated = replace(record, credit_balance=record.credit_balance - amount)
        return self._with_record(self.key(assignee, action), updated)


class VerdictStatus(str, Enum):
    SATISFIED = "Satisfied"
    UNSATISFIED = "Unsatisfied"
    UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class ConstraintVerdict:
    status: VerdictStatus
    reason: str = ""


_SATISFIED = ConstraintVerdict(VerdictStatus.SATISFIED)


class DecisionOutcome(str, Enum):
    PERMIT = "Permit"
    DENY = "Deny"
    NOT_APPLICABLE = "NotApplicable"


@dataclass(frozen=True)
class TraceEntry:
    constraint: Constraint
    verdict: ConstraintVerdict


@dataclass(frozen=True)
class Decision:
    outcome: DecisionOutcome
    activated_duties: tuple[Rule, ...] = ()
    trace: tuple[TraceEntry, ...] = ()
    reason: str = ""


@dataclass(frozen=True)
class EvaluationContext:
    """Everything a single constraint evaluation may consult."""

    request: AccessRequest
    record: UsageRecord
    service: AttributeService
    now: datetime


def _right_value(operand: Iri | TypedLiteral) -> object:
    if isinstance(operand, Iri):
        return operand.value
    return literal_value(operand)


def _coerce_pair(left: object, right: object) -> tuple[object, object] | None:
    """Bring the two sides to a comparable type; None if impossible."""
    if isinstance(left, bool) or isinstance(right, bool):
        return (left, right) if type(left) is type(right) else None
    for a, b, swap in ((left, right, False), (right, left, True)):
        if isinstance(a, str) and isinstance(b, (int, Decimal, float)):
            try:
                converted: object = int(a)
            except ValueError:
                try:
                    converted = Decimal(a)
                except Exception:
                    return None
            return (b, converted) if swap else (converted, b)
        if isinstance(a, str) and isinstance(b, datetime):
            try:
                converted = parse_datetime(a)
            except ValueError:
                return None
            return (b, converted) if swap else (converted, b)
        if isinstance(a, str) and isinstance(b, timedelta):
            try:
                converted = parse_duration(a)
            except ValueError:
                return None
            return (b, converted) if swap else (converted, b)
    if isinstance(left, (int, Decimal, float)) and isinstance(right, (int, Decimal, float)):
        return left, right
    if type(left) is type(right) or (isinstance(left, str) and isinstance(right, str)):
        return left, right
    if isinstance(left, datetime) and isinstance(right, datetime):
        return left, right
    return None


def _compare(op: Operator, left: object, right: object) -> ConstraintVerdict:
    pair = _coerce_pair(left, right)
    if pair is None:
        return ConstraintVerdict(
            VerdictStatus.UNSATISFIED,
            f"type mismatch: cannot compare {type(left).__name__} with {type(right).__name__}",
        )
    lv, rv = pair
    if op is Operator.EQ:
        ok = lv == rv
    elif op is Operator.NEQ:
        ok = lv != rv
    elif op is Operator.LT:
        ok = lv < rv
    elif op is Operator.LTEQ:
        ok = lv <= rv
    elif op is Operator.GT:
        ok = lv > rv
    elif op is Operator.GTEQ:
        ok = lv >= rv
    else:
        return ConstraintVerdict(VerdictStatus.UNSATISFIED, f"operator {op.value} not orderable")
    if ok:
        return _SATISFIED
    return ConstraintVerdict(VerdictStatus.UNSATISFIED, f"{lv!r} {op.value} {rv!r} is false")


def _as_code(value: object) -> str:
    return value.value if isinstance(value, Iri) else str(value)


def _membership(op: Operator, left: object, right: object, ctx: EvaluationContext) -> ConstraintVerdict:
    left_code = _as_code(left)
    if op is Operator.IS_PART_OF:
        outer = _as_code(right)
        if ctx.service.contains(outer, left_code):
            return _SATISFIED
        return ConstraintVerdict(
            VerdictStatus.UNSATISFIED, f"{left_code!r} is not within {outer!r}"
        )
    # isAnyOf: right operand holds a comma-separated list of admissible values
    allowed = [item.strip() for item in str(right).split(",")]
    if left_code in allowed:
        return _SATISFIED
    return ConstraintVerdict(VerdictStatus.UNSATISFIED, f"{left_code!r} not in {allowed}")


def _evaluate_with_value(c: Constraint, value: object, ctx: EvaluationContext) -> ConstraintVerdict:
    right = _right_value(c.right_operand)
    if c.operator in (Operator.IS_PART_OF, Operator.IS_ANY_OF):
        return _membership(c.operator, value, right, ctx)
    return _compare(c.operator, value, right)


def evaluate_constraint(c: Constraint, ctx: EvaluationContext) -> ConstraintVerdict:
    """Evaluate one constraint. Pure with respect to usage state.

    Count-like operands compare the prospective total (state plus the
    requested units), so the verdict answers "may this execution happen".
    """
    operand = c.left_operand
    request = ctx.request

    if operand == vocab.ODRL_COUNT:
        prospective = ctx.record.executed_count + request.units_requested
        return _evaluate_with_value(c, prospective, ctx)
    if operand == vocab.DSP_CONCURRENT_CONNECTIONS:
        prospective = ctx.record.active_connections + 1
        return _evaluate_with_value(c, prospective, ctx)
    if operand == vocab.ODRL_TIME_INTERVAL:
        return ConstraintVerdict(
            VerdictStatus.UNDETERMINED,
            "timeInterval is only decidable paired with a count bound",
        )
    if operand == vocab.ODRL_EVENT:
        return ConstraintVerdict(
            VerdictStatus.UNDETERMINED, "usage-ordering marker is not decidable at request time"
        )
    if operand == vocab.ODRL_UNIT_OF_COUNT:
        return ConstraintVerdict(VerdictStatus.SATISFIED, "declares the metering unit")
    if operand == vocab.ODRL_DATETIME:
        supplied = ctx.service.get(operand, request.requester, ctx.now)
        value: object = ctx.now
        if supplied is not None:
            try:
                value = parse_datetime(supplied.lexical)
            except ValueError:
                return ConstraintVerdict(
                    VerdictStatus.UNSATISFIED, "type mismatch: malformed clock attribute"
                )
        return _evaluate_with_value(c, value, ctx)
    if operand == vocab.DSP_ATTESTED_CLAIM:
        if not isinstance(c.right_operand, Iri):
            return ConstraintVerdict(VerdictStatus.UNSATISFIED, "attested claim must be an IRI")
        value = ctx.service.get(c.right_operand, request.requester, ctx.now)
        if value is None:
            return ConstraintVerdict(
                VerdictStatus.UNDETERMINED,
                f"no valid attestation of {c.right_operand.value}",
            )
        return ConstraintVerdict(VerdictStatus.SATISFIED, "attested")

    # generic path: requester-supplied attribute first, then the PIP chain
    supplied = request.attributes.get(operand)
    if supplied is None:
        supplied = ctx.service.get(operand, request.requester, ctx.now)
    if supplied is None:
        return ConstraintVerdict(
            VerdictStatus.UNDETERMINED, f"attribute {operand.value} unavailable"
        )
    try:
        value = literal_value(supplied)
    except ValueError:
        return ConstraintVerdict(VerdictStatus.UNSATISFIED, "type mismatch: malformed attribute")
    return _evaluate_with_value(c, value, ctx)


def check_rate_limit(
    count_constraint: Constraint,
    interval_constraint: Constraint,
    exercise_log: Sequence[datetime],
    now: datetime,
    units: int = 1,
) -> ConstraintVerdict:
    """Sliding-window limit: executions newer than (now - window) plus the
    requested units must stay within the count bound."""
    try:
        bound = int(_right_value(count_constraint.right_operand))  # type: ignore[arg-type]
        window = _right_value(interval_constraint.right_operand)
        if isinstance(window, str):
            window = parse_duration(window)
    except (ValueError, TypeError):
        return ConstraintVerdict(VerdictStatus.UNSATISFIED, "type mismatch: malformed rate bound")
    if not isinstance(window, timedelta):
        return ConstraintVerdict(VerdictStatus.UNSATISFIED, "type mismatch: window not a duration")
    cutoff = now - window
    recent = sum(1 for t in exercise_log if t > cutoff)
    if recent + units <= bound:
        return _SATISFIED
    return ConstraintVerdict(
        VerdictStatus.UNSATISFIED,
        f"{recent} executions in the last {window} plus {units} exceeds {bound}",
    )


def _action_subsumes(rule_action: Iri, requested: Iri) -> bool:
    return rule_action == requested or rule_action == vocab.ODRL_USE


def _rule_matches(rule: Rule, req: AccessRequest) -> bool:
    if rule.target is not None and rule.target != req.target:
        return False
    if rule.assignee is not None and rule.assignee != req.requester:
        return False
    return _action_subsumes(rule.action.action, req.action)


def _is_rate_pair(rule: Rule) -> tuple[Constraint, Constraint] | None:
    counts = [c for c in rule.constraints if c.left_operand == vocab.ODRL_COUNT]
    intervals = [c for c in rule.constraints if c.left_operand == vocab.ODRL_TIME_INTERVAL]
    if counts and intervals:
        return counts[0], intervals[0]
    return None


def _evaluate_rule(rule: Rule, ctx: EvaluationContext) -> list[TraceEntry]:
    entries: list[TraceEntry] = []
    rate_pair = _is_rate_pair(rule)
    for c in rule.action.refinements:
        entries.append(TraceEntry(c, evaluate_constraint(c, ctx)))
    for c in rule.constraints:
        if rate_pair and c in rate_pair:
            continue
        entries.append(TraceEntry(c, evaluate_constraint(c, ctx)))
    if rate_pair:
        verdict = check_rate_limit(
            rate_pair[0],
            rate_pair[1],
            ctx.record.exercise_log,
            ctx.now,
            ctx.request.units_requested,
        )
        entries.append(TraceEntry(rate_pair[0], verdict))
        entries.append(TraceEntry(rate_pair[1], verdict))
    return entries


def _statuses(entries: Sequence[TraceEntry]) -> set[VerdictStatus]:
    return {e.verdict.status for e in entries}


def inherit_parties(duty: Rule, permission: Rule) -> Rule:
    """Duties nested in a permission inherit its parties and target unless
    explicitly set."""
    return replace(
        duty,
        target=duty.target or permission.target,
        assigner=duty.assigner or permission.assigner,
        assignee=duty.assignee or permission.assignee,
    )


def evaluate_request(
    agreement: Policy,
    req: AccessRequest,
    state: UsageState,
    service: AttributeService,
) -> Decision:
    """Decide an access request against an agreement.

    Rules match on (target, assignee, action) with ``use`` subsuming every
    action. A satisfied prohibition denies even when a permission would
    permit; any undetermined verdict on a matching rule denies.
    """
    if agreement.kind is not PolicyKind.AGREEMENT:
        raise EvaluationError("invalid agreement: policy kind is not Agreement")
    violations = validate_policy(agreement)
    if not is_valid(violations):
        raise EvaluationError("invalid agreement", violations)

    ctx = EvaluationContext(
        request=req,
        record=state.record_for(req.requester, req.action),
        service=service,
        now=req.timestamp,
    )

    trace: list[TraceEntry] = []
    matched_any = False
    prohibition_hit: str | None = None
    undetermined_hit: str | None = None
    permit_duties: list[Rule] = []
    permitted = False
    unsatisfied_hit: str | None = None

    for rule in agreement.rules:
        if rule.kind is RuleKind.DUTY or not _rule_matches(rule, req):
            continue
        matched_any = True
        entries = _evaluate_rule(rule, ctx)
        trace.extend(entries)
        statuses = _statuses(entries)
        if rule.kind is RuleKind.PROHIBITION:
            if VerdictStatus.UNDETERMINED in statuses:
                undetermined_hit = _first_reason(entries, VerdictStatus.UNDETERMINED)
            elif VerdictStatus.UNSATISFIED not in statuses:
                prohibition_hit = f"prohibited {rule.action.action.value}"
        else:  # permission
            if VerdictStatus.UNDETERMINED in statuses:
                undetermined_hit = _first_reason(entries, VerdictStatus.UNDETERMINED)
            elif VerdictStatus.UNSATISFIED in statuses:
                unsatisfied_hit = _first_reason(entries, VerdictStatus.UNSATISFIED)
            else:
                permitted = True
                permit_duties.extend(inherit_parties(d, rule) for d in rule.duties)

    if not matched_any:
        return Decision(DecisionOutcome.NOT_APPLICABLE, (), (), "no matching rule")
    if prohibition_hit is not None:
        return Decision(DecisionOutcome.DENY, (), tuple(trace), prohibition_hit)
    if undetermined_hit is not None:
        return Decision(DecisionOutcome.DENY, (), tuple(trace), f"undetermined: {undetermined_hit}")
    if permitted:
        return Decision(DecisionOutcome.PERMIT, tuple(permit_duties), tuple(trace), "permitted")
    return Decision(
        DecisionOutcome.DENY, (), tuple(trace), unsatisfied_hit or "no permission satisfied"
    )


def _first_reason(entries: Sequence[TraceEntry], status: VerdictStatus) -> str:
    for entry in entries:
        if entry.verdict.status is status:
            return entry.verdict.reason
    return ""


def _opens_connection(decision: Decision) -> bool:
    return any(
        e.constraint.left_operand == vocab.DSP_CONCURRENT_CONNECTIONS for e in decision.trace
    )


def commit_usage(decision: Decision, req: AccessRequest, state: UsageState) -> UsageState:
    """Record a permitted execution: bump counters and append one exercise
    timestamp per unit. The input state is left untouched."""
    if decision.outcome is not DecisionOutcome.PERMIT:
        raise ValueError("commit_usage requires a Permit decision")
    return state.with_execution(
        req.requester,
        req.action,
        req.units_requested,
        req.timestamp,
        open_connection=_opens_connection(decision),
    )


# ---------------------------------------------------------------------------
# minimal conformance checking (stand-in for full shape validation)

class ConformanceChecker(Protocol):
    def check(self, asset_data: bytes) -> bool: ...


@dataclass(frozen=True)
class PropertyShape:
    path: str
    min_count: int = 0
    datatype: str | None = None


@dataclass(frozen=True)
class NodeShape:
    properties: tuple[PropertyShape, ...]


def _value_matches(value: object, datatype: str) -> bool:
    if datatype == "string":
        return isinstance(value, str)
    if datatype == "integer":
        return isinstance(value, int) and not isinstance(value, bool)
    if datatype == "decimal":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if datatype == "boolean":
        return isinstance(value, bool)
    if datatype == "dateTime":
        if not isinstance(value, str):
            return False
        try:
            parse_datetime(value)
        except ValueError:
            return False
        return True
    return True


class MinimalShapeChecker:
    """Checks JSON records against a node shape asserting required-property
    presence, minimum cardinality, and value datatypes."""

    def __init__(self, shape: NodeShape) -> None:
        self.shape = shape

    def check(self, asset_data: bytes) -> bool:
        try:
            record = json.loads(asset_data.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            return False
        if not isinstance(record, dict):
            return False
        for prop in self.shape.properties:
            raw = record.get(prop.path)
            values = raw if isinstance(raw, list) else ([] if raw is None else [raw])
            if len(values) < prop.min_count:
                return False
            if prop.datatype is not None:
                if not all(_value_matches(v, prop.datatype) for v in values):
                    return False
        return True


def shape_from_json(data: Mapping) -> NodeShape:
    props = tuple(
        PropertyShape(
            path=entry["path"],
            min_count=int(entry.get("minCount", 0)),
            datatype=entry.get("datatype"),
        )
        for entry in data.get("properties", [])
    )
    return NodeShape(props)


class ConformanceCheckerRegistry:
    def __init__(self) -> None:
        self._checkers: dict[str, ConformanceChecker] = {}

    def register(self, shape_ref: Iri, checker: ConformanceChecker) -> None:
        self._checkers[shape_ref.value] = checker

    def lookup(self, shape_ref: Iri) -> ConformanceChecker | None:
        return self._checkers.get(shape_ref.value)


def check_conformance(
    asset_data: bytes, shape_ref: Iri, checkers: ConformanceCheckerRegistry
) -> bool:
    checker = checkers.lookup(shape_ref)
    if checker is None:
        raise LookupError(f"no checker for shape {shape_ref.value}")
    return checker.check(asset_data)


# ---------------------------------------------------------------------------
# usage-state interchange (used by the CLI)

def usage_state_to_jsonable(state: UsageState) -> dict:
    return {
        "currency": state.currency,
        "default_credit": str(state.default_credit),
        "records": [
            {
                "assignee": assignee,
                "action": action,
                "exercise_log": [t.isoformat() for t in record.exercise_log],
                "active_connections": record.active_connections,
                "credit_balance": str(record.credit_balance),
            }
            for (assignee, action), record in sorted(state.records.items())
        ],
    }


def usage_state_from_jsonable(data: Mapping) -> UsageState:
    records = {}
    for entry in data.get("records", []):
        log = tuple(parse_datetime(t) for t in entry.get("exercise_log", []))
        records[(entry["assignee"], entry["action"])] = UsageRecord(
            executed_count=len(log),
            exercise_log=log,
            active_connections=int(entry.get("active_connections", 0)),
            credit_balance=Decimal(entry.get("credit_balance", "0")),
        )
    return UsageState(
        records=records,
        default_credit=Decimal(data.get("default_credit", "0")),
        currency=data.get("currency", "EUR"),
    )
