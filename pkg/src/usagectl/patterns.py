"""Catalog of the 22 usage-control policy patterns: administration-side
templates that instantiate to policies, each annotated with the stakeholder
who supplies fulfilment information (PIP), the stakeholder who deploys and
decides (PAP/PDP), its enforcement class, and whether it originates from the
surveyed literature or was added to close a gap.

Template shapes worth knowing when reading :func:`classify`:

* grant patterns put constraints on a permission (access-count, rate-limit,
  time-restriction, ...);
* duty-attachment patterns nest a duty under a permission whose action is
  the ``grant_action`` parameter (deletion, anonymization, billing, ...);
* consumer-demanded patterns are standalone top-level duties, optionally
  carrying explicit parties (up-to-dateness, data-quality,
  encryption-by-provider). A nested ``dsp:encrypt`` duty therefore reads as
  "consumer must store encrypted", a top-level one as "provider must
  transfer encrypted".

The catalog is immutable and instantiation is pure.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from enum import Enum
from typing import Callable, Iterable, Mapping, Sequence

from . import vocab
from .model import (
    ActionExpression,
    Constraint,
    Iri,
    Operator,
    PartyRole,
    Policy,
    PolicyKind,
    Rule,
    RuleKind,
    TypedLiteral,
    XSD_DATETIME,
    XSD_DECIMAL,
    XSD_DURATION,
    XSD_INTEGER,
    constraint_key,
    parse_datetime,
    parse_duration,
    rule_key,
)


class EnforcementClass(str, Enum):
    PREVENTIVE = "Preventive"
    DETECTIVE = "Detective"


class PatternSource(str, Enum):
    LITERATURE = "Literature"
    SELF_DEFINED = "SelfDefined"


@dataclass(frozen=True)
class ParameterSpec:
    name: str
    kind: str  # iri | string | integer | decimal | dateTime | duration
    required: bool = True


@dataclass(frozen=True)
class PatternDescriptor:
    id: str
    name: str
    description: str
    pip_roles: frozenset[PartyRole]
    pap_pdp_role: PartyRole
    enforcement_class: EnforcementClass
    source: PatternSource
    parameter_schema: tuple[ParameterSpec, ...]


class UnknownPatternError(KeyError):
    pass


class PatternParameterError(ValueError):
    """A template parameter is missing, ill-typed, or unexpected."""

    def __init__(self, parameter: str, message: str) -> None:
        super().__init__(f"parameter {parameter!r}: {message}")
        self.parameter = parameter


_PROVIDER = PartyRole.PROVIDER
_CONSUMER = PartyRole.CONSUMER
_THIRD = PartyRole.THIRD_PARTY

_COMMON = (
    ParameterSpec("uid", "iri", required=False),
    ParameterSpec("target", "iri"),
    ParameterSpec("assigner", "iri", required=False),
    ParameterSpec("assignee", "iri", required=False),
)
_GRANT_ACTION = ParameterSpec("grant_action", "iri", required=False)


def _coerce(spec: ParameterSpec, value: object) -> object:
    try:
        if spec.kind == "iri":
            if isinstance(value, Iri):
                return value
            return Iri(str(value))
        if spec.kind == "string":
            if not isinstance(value, str):
                raise ValueError("expected a string")
            return value
        if spec.kind == "integer":
            if isinstance(value, bool) or not isinstance(value, (int, str)):
                raise ValueError("expected an integer")
            return int(value)
        if spec.kind == "decimal":
            if isinstance(value, bool):
                raise ValueError("expected a decimal")
            return Decimal(str(value))
        if spec.kind == "dateTime":
            parse_datetime(str(value))
            return str(value)
        if spec.kind == "duration":
            parse_duration(str(value))
            return str(value)
    except (ValueError, InvalidOperation, ArithmeticError) as exc:
        raise PatternParameterError(spec.name, str(exc) or f"not a valid {spec.kind}") from None
    raise PatternParameterError(spec.name, f"unknown parameter kind {spec.kind}")


def _checked_params(descriptor: PatternDescriptor, params: Mapping[str, object]) -> dict:
    known = {spec.name for spec in descriptor.parameter_schema}
    unexpected = sorted(set(params) - known)
    if unexpected:
        raise PatternParameterError(unexpected[0], "unexpected parameter")
    out: dict = {}
    for spec in descriptor.parameter_schema:
        if spec.name not in params or params[spec.name] is None:
            if spec.required:
                raise PatternParameterError(spec.name, "required parameter is missing")
            continue
        out[spec.name] = _coerce(spec, params[spec.name])
    return out


def _plain(text: object) -> TypedLiteral:
    return TypedLiteral(str(text))


def _permission(p: Mapping, action: ActionExpression, constraints=(), duties=()) -> Rule:
    return Rule(
        kind=RuleKind.PERMISSION,
        action=action,
        target=p.get("target"),
        assigner=p.get("assigner"),
        assignee=p.get("assignee"),
        constraints=tuple(constraints),
        duties=tuple(duties),
    )


def _grant_with_duty(p: Mapping, duty: Rule) -> Rule:
    action = p.get("grant_action", vocab.ODRL_USE)
    return _permission(p, ActionExpression(action), duties=(duty,))


def _top_duty(p: Mapping, action: ActionExpression, constraints=()) -> Rule:
    return Rule(
        kind=RuleKind.DUTY,
        action=action,
        target=p.get("target"),
        assigner=p.get("assigner"),
        assignee=p.get("assignee"),
        constraints=tuple(constraints),
    )


def _build_allow_access(p: Mapping) -> tuple[Rule, ...]:
    action = p.get("action", vocab.ODRL_USE)
    return (_permission(p, ActionExpression(action)),)


def _build_location_access(p: Mapping) -> tuple[Rule, ...]:
    c = Constraint(vocab.ODRL_SPATIAL, Operator.IS_PART_OF, _plain(p["region"]))
    action = p.get("action", vocab.ODRL_USE)
    return (_permission(p, ActionExpression(action), constraints=(c,)),)


def _build_location_storage(p: Mapping) -> tuple[Rule, ...]:
    duty = Rule(
        kind=RuleKind.DUTY,
        action=ActionExpression(vocab.DSP_STORE),
        target=p.get("target"),
        constraints=(
            Constraint(vocab.DSP_STORAGE_REGION, Operator.IS_PART_OF, _plain(p["region"])),
        ),
    )
    return (_grant_with_duty(p, duty),)


def _build_time_restriction(p: Mapping) -> tuple[Rule, ...]:
    action = p.get("action", vocab.ODRL_USE)
    constraints = (
        Constraint(vocab.ODRL_DATETIME, Operator.GTEQ, TypedLiteral(p["start"], XSD_DATETIME)),
        Constraint(vocab.ODRL_DATETIME, Operator.LTEQ, TypedLiteral(p["end"], XSD_DATETIME)),
    )
    return (_permission(p, ActionExpression(action), constraints=constraints),)


def _build_access_count(p: Mapping) -> tuple[Rule, ...]:
    action = p.get("action", vocab.ODRL_USE)
    c = Constraint(vocab.ODRL_COUNT, Operator.LTEQ, _plain(p["max_count"]))
    return (_permission(p, ActionExpression(action), constraints=(c,)),)


def _build_rate_limit(p: Mapping) -> tuple[Rule, ...]:
    action = p.get("action", vocab.ODRL_USE)
    constraints = (
        Constraint(vocab.ODRL_COUNT, Operator.LTEQ, _plain(p["max_count"])),
        Constraint(
            vocab.ODRL_TIME_INTERVAL, Operator.EQ, TypedLiteral(p["interval"], XSD_DURATION)
        ),
    )
    return (_permission(p, ActionExpression(action), constraints=constraints),)


def _build_concurrent_connections(p: Mapping) -> tuple[Rule, ...]:
    action = p.get("action", vocab.ODRL_USE)
    c = Constraint(
        vocab.DSP_CONCURRENT_CONNECTIONS,
        Operator.LTEQ,
        TypedLiteral(str(p["max_connections"]), XSD_INTEGER),
    )
    return (_permission(p, ActionExpression(action), constraints=(c,)),)


def _build_data_amount(p: Mapping) -> tuple[Rule, ...]:
    action = p.get("action", vocab.ODRL_READ)
    expression = ActionExpression(
        action,
        refinements=(Constraint(vocab.ODRL_UNIT_OF_COUNT, Operator.EQ, _plain(p["unit"])),),
    )
    c = Constraint(vocab.ODRL_COUNT, Operator.LTEQ, _plain(p["max_amount"]))
    return (_permission(p, expression, constraints=(c,)),)


def _build_processing_power(p: Mapping) -> tuple[Rule, ...]:
    action = p.get("action", vocab.ODRL_USE)
    c = Constraint(
        vocab.DSP_PROCESSING_POWER, Operator.LTEQ, TypedLiteral(str(p["max_power"]), XSD_DECIMAL)
    )
    return (_permission(p, ActionExpression(action), constraints=(c,)),)


def _build_bandwidth(p: Mapping) -> tuple[Rule, ...]:
    action = p.get("action", vocab.ODRL_USE)
    c = Constraint(
        vocab.DSP_BANDWIDTH, Operator.LTEQ, TypedLiteral(str(p["max_bandwidth"]), XSD_DECIMAL)
    )
    return (_permission(p, ActionExpression(action), constraints=(c,)),)


def _build_billing(p: Mapping) -> tuple[Rule, ...]:
    duty = Rule(
        kind=RuleKind.DUTY,
        action=ActionExpression(vocab.ODRL_COMPENSATE),
        target=p.get("target"),
        constraints=(
            Constraint(
                vocab.ODRL_PAY_AMOUNT, Operator.EQ, TypedLiteral(str(p["amount"]), XSD_DECIMAL)
            ),
        ),
    )
    return (_grant_with_duty(p, duty),)


def _build_data_quality(p: Mapping) -> tuple[Rule, ...]:
    expression = ActionExpression(
        vocab.DSP_QUALITY_CONTROL,
        refinements=(Constraint(vocab.DSP_CONFORMS_TO, Operator.EQ, p["shape"]),),
    )
    pre = Constraint(vocab.ODRL_EVENT, Operator.LT, vocab.ODRL_POLICY_USAGE)
    return (_top_duty(p, expression, constraints=(pre,)),)


def _build_deletion(p: Mapping) -> tuple[Rule, ...]:
    duty = Rule(
        kind=RuleKind.DUTY,
        action=ActionExpression(vocab.ODRL_DELETE),
        target=p.get("target"),
        constraints=(
            Constraint(
                vocab.ODRL_DATETIME, Operator.LT, TypedLiteral(p["deadline"], XSD_DATETIME)
            ),
        ),
    )
    return (_grant_with_duty(p, duty),)


def _build_purpose(p: Mapping) -> tuple[Rule, ...]:
    action = p.get("action", vocab.ODRL_USE)
    c = Constraint(vocab.ODRL_PURPOSE, Operator.EQ, p["purpose"])
    return (_permission(p, ActionExpression(action), constraints=(c,)),)


def _build_provable_attribute(p: Mapping) -> tuple[Rule, ...]:
    action = p.get("action", vocab.ODRL_USE)
    c = Constraint(vocab.DSP_ATTESTED_CLAIM, Operator.EQ, p["claim"])
    return (_permission(p, ActionExpression(action), constraints=(c,)),)


def _build_encryption_consumer(p: Mapping) -> tuple[Rule, ...]:
    duty = Rule(
        kind=RuleKind.DUTY,
        action=ActionExpression(vocab.DSP_ENCRYPT),
        target=p.get("target"),
    )
    return (_grant_with_duty(p, duty),)


def _build_encryption_provider(p: Mapping) -> tuple[Rule, ...]:
    return (_top_duty(p, ActionExpression(vocab.DSP_ENCRYPT)),)


def _build_aggregation(p: Mapping) -> tuple[Rule, ...]:
    duty = Rule(
        kind=RuleKind.DUTY,
        action=ActionExpression(vocab.ODRL_AGGREGATE),
        target=p.get("target"),
    )
    return (_grant_with_duty(p, duty),)


def _build_anonymization(p: Mapping) -> tuple[Rule, ...]:
    duty = Rule(
        kind=RuleKind.DUTY,
        action=ActionExpression(vocab.ODRL_ANONYMIZE),
        target=p.get("target"),
    )
    return (_grant_with_duty(p, duty),)


def _build_activity_logging(p: Mapping) -> tuple[Rule, ...]:
    duty = Rule(
        kind=RuleKind.DUTY,
        action=ActionExpression(vocab.ODRL_INFORM),
        target=p.get("target"),
    )
    return (_grant_with_duty(p, duty),)


def _build_delegation(p: Mapping) -> tuple[Rule, ...]:
    duty = Rule(
        kind=RuleKind.DUTY,
        action=ActionExpression(vocab.ODRL_NEXT_POLICY),
        target=p["next_policy"],
    )
    grant = dict(p)
    grant.setdefault("grant_action", vocab.ODRL_DISTRIBUTE)
    return (_grant_with_duty(grant, duty),)


def _build_up_to_dateness(p: Mapping) -> tuple[Rule, ...]:
    c = Constraint(
        vocab.ODRL_TIME_INTERVAL, Operator.EQ, TypedLiteral(p["interval"], XSD_DURATION)
    )
    return (_top_duty(p, ActionExpression(vocab.DSP_UPDATE), constraints=(c,)),)


# --- classification helpers -------------------------------------------------

def _all_duties(policy: Policy) -> list[tuple[Rule, bool]]:
    """(duty, nested) pairs across the whole policy."""
    out: list[tuple[Rule, bool]] = []
    for rule in policy.rules:
        if rule.kind is RuleKind.DUTY:
            out.append((rule, False))
        for duty in rule.duties:
            out.append((duty, True))
    return out


def _has(rule: Rule, operand: Iri, *ops: Operator) -> bool:
    return any(
        c.left_operand == operand and (not ops or c.operator in ops) for c in rule.constraints
    )


def _has_refinement(rule: Rule, operand: Iri) -> bool:
    return any(c.left_operand == operand for c in rule.action.refinements)


def _permissions(policy: Policy) -> list[Rule]:
    return [r for r in policy.rules if r.kind is RuleKind.PERMISSION]


def _duty_matches(policy: Policy, action: Iri, nested: bool | None = None) -> list[Rule]:
    return [
        duty
        for duty, is_nested in _all_duties(policy)
        if duty.action.action == action and (nested is None or is_nested == nested)
    ]


def _match_allow_access(policy: Policy) -> bool:
    return any(
        not r.constraints and not r.action.refinements and not r.duties
        for r in _permissions(policy)
    )


def _match_location_access(policy: Policy) -> bool:
    return any(
        _has(r, vocab.ODRL_SPATIAL, Operator.IS_PART_OF, Operator.EQ, Operator.IS_ANY_OF)
        for r in _permissions(policy)
    )


def _match_location_storage(policy: Policy) -> bool:
    return any(_has(d, vocab.DSP_STORAGE_REGION) for d in _duty_matches(policy, vocab.DSP_STORE))


def _match_time_restriction(policy: Policy) -> bool:
    return any(
        _has(r, vocab.ODRL_DATETIME, Operator.GTEQ, Operator.GT)
        and _has(r, vocab.ODRL_DATETIME, Operator.LTEQ, Operator.LT)
        for r in _permissions(policy)
    )


def _match_access_count(policy: Policy) -> bool:
    return any(
        _has(r, vocab.ODRL_COUNT)
        and not _has(r, vocab.ODRL_TIME_INTERVAL)
        and not _has_refinement(r, vocab.ODRL_UNIT_OF_COUNT)
        for r in _permissions(policy)
    )


def _match_rate_limit(policy: Policy) -> bool:
    return any(
        _has(r, vocab.ODRL_COUNT) and _has(r, vocab.ODRL_TIME_INTERVAL)
        for r in _permissions(policy)
    )


def _match_concurrent_connections(policy: Policy) -> bool:
    return any(_has(r, vocab.DSP_CONCURRENT_CONNECTIONS) for r in _permissions(policy))


def _match_data_amount(policy: Policy) -> bool:
    return any(
        _has(r, vocab.ODRL_COUNT) and _has_refinement(r, vocab.ODRL_UNIT_OF_COUNT)
        for r in _permissions(policy)
    )


def _match_processing_power(policy: Policy) -> bool:
    return any(_has(r, vocab.DSP_PROCESSING_POWER) for r in _permissions(policy))


def _match_bandwidth(policy: Policy) -> bool:
    return any(_has(r, vocab.DSP_BANDWIDTH) for r in _permissions(policy))


def _match_billing(policy: Policy) -> bool:
    return any(
        _has(d, vocab.ODRL_PAY_AMOUNT) for d in _duty_matches(policy, vocab.ODRL_COMPENSATE)
    )


def _match_data_quality(policy: Policy) -> bool:
    return any(
        _has_refinement(d, vocab.DSP_CONFORMS_TO)
        for d in _duty_matches(policy, vocab.DSP_QUALITY_CONTROL)
    )


def _match_deletion(policy: Policy) -> bool:
    return any(
        _has(d, vocab.ODRL_DATETIME, Operator.LT, Operator.LTEQ)
        for d in _duty_matches(policy, vocab.ODRL_DELETE)
    )


def _match_purpose(policy: Policy) -> bool:
    return any(_has(r, vocab.ODRL_PURPOSE) for r in _permissions(policy))


def _match_provable_attribute(policy: Policy) -> bool:
    return any(_has(r, vocab.DSP_ATTESTED_CLAIM) for r in _permissions(policy))


def _match_encryption_consumer(policy: Policy) -> bool:
    return bool(_duty_matches(policy, vocab.DSP_ENCRYPT, nested=True))


def _match_encryption_provider(policy: Policy) -> bool:
    return bool(_duty_matches(policy, vocab.DSP_ENCRYPT, nested=False))


def _match_aggregation(policy: Policy) -> bool:
    return bool(_duty_matches(policy, vocab.ODRL_AGGREGATE))


def _match_anonymization(policy: Policy) -> bool:
    return bool(_duty_matches(policy, vocab.ODRL_ANONYMIZE))


def _match_activity_logging(policy: Policy) -> bool:
    return bool(_duty_matches(policy, vocab.ODRL_INFORM))


def _match_delegation(policy: Policy) -> bool:
    return bool(_duty_matches(policy, vocab.ODRL_NEXT_POLICY))


def _match_up_to_dateness(policy: Policy) -> bool:
    return any(
        _has(d, vocab.ODRL_TIME_INTERVAL) for d in _duty_matches(policy, vocab.DSP_UPDATE)
    )


@dataclass(frozen=True)
class _Pattern:
    descriptor: PatternDescriptor
    build: Callable[[Mapping], tuple[Rule, ...]]
    match: Callable[[Policy], bool]
    uses_extension: bool = False


def _descriptor(
    id_: str,
    name: str,
    description: str,
    pip: Iterable[PartyRole],
    pap_pdp: PartyRole,
    enforcement: EnforcementClass,
    source: PatternSource,
    extra_params: Sequence[ParameterSpec] = (),
    with_grant_action: bool = False,
    target_required: bool = True,
) -> PatternDescriptor:
    schema = list(_COMMON)
    if not target_required:
        schema[1] = ParameterSpec("target", "iri", required=False)
    if with_grant_action:
        schema.append(_GRANT_ACTION)
    schema.extend(extra_params)
    return PatternDescriptor(
        id=id_,
        name=name,
        description=description,
        pip_roles=frozenset(pip),
        pap_pdp_role=pap_pdp,
        enforcement_class=enforcement,
        source=source,
        parameter_schema=tuple(schema),
    )


_ACTION_PARAM = ParameterSpec("action", "iri", required=False)

_CATALOG: tuple[_Pattern, ...] = (
    _Pattern(
        _descriptor(
            "allow-access",
            "Allow access",
            "Grant a consumer access to the asset with no further conditions.",
            {_PROVIDER}, _PROVIDER, EnforcementClass.PREVENTIVE, PatternSource.LITERATURE,
            extra_params=(_ACTION_PARAM,),
        ),
        _build_allow_access,
        _match_allow_access,
    ),
    _Pattern(
        _descriptor(
            "location-access",
            "Regional access restriction",
            "Access is allowed only while the consumer is located inside the "
            "named region.",
            {_PROVIDER}, _PROVIDER, EnforcementClass.DETECTIVE, PatternSource.LITERATURE,
            extra_params=(_ACTION_PARAM, ParameterSpec("region", "string")),
        ),
        _build_location_access,
        _match_location_access,
    ),
    _Pattern(
        _descriptor(
            "location-storage",
            "Regional storage restriction",
            "The consumer must keep stored copies of the asset inside the "
            "named region.",
            {_CONSUMER, _THIRD}, _PROVIDER, EnforcementClass.DETECTIVE,
            PatternSource.LITERATURE,
            extra_params=(ParameterSpec("region", "string"),),
            with_grant_action=True,
        ),
        _build_location_storage,
        _match_location_storage,
        uses_extension=True,
    ),
    _Pattern(
        _descriptor(
            "time-restriction",
            "Time restriction",
            "Access is allowed only between a configured start and end time.",
            {_PROVIDER}, _PROVIDER, EnforcementClass.PREVENTIVE, PatternSource.LITERATURE,
            extra_params=(
                _ACTION_PARAM,
                ParameterSpec("start", "dateTime"),
                ParameterSpec("end", "dateTime"),
            ),
        ),
        _build_time_restriction,
        _match_time_restriction,
    ),
    _Pattern(
        _descriptor(
            "access-count",
            "Access count",
            "The action may be executed at most a fixed number of times in "
            "total.",
            {_PROVIDER}, _PROVIDER, EnforcementClass.PREVENTIVE, PatternSource.LITERATURE,
            extra_params=(_ACTION_PARAM, ParameterSpec("max_count", "integer")),
        ),
        _build_access_count,
        _match_access_count,
    ),
    _Pattern(
        _descriptor(
            "rate-limit",
            "Rate limit",
            "The action may be executed at most a fixed number of times "
            "within any sliding window of the given length.",
            {_PROVIDER}, _PROVIDER, EnforcementClass.PREVENTIVE, PatternSource.LITERATURE,
            extra_params=(
                _ACTION_PARAM,
                ParameterSpec("max_count", "integer"),
                ParameterSpec("interval", "duration"),
            ),
        ),
        _build_rate_limit,
        _match_rate_limit,
    ),
    _Pattern(
        _descriptor(
            "concurrent-connections",
            "Concurrent active connections",
            "At most the given number of simultaneous connections may "
            "retrieve the asset.",
            {_PROVIDER}, _PROVIDER, EnforcementClass.PREVENTIVE, PatternSource.LITERATURE,
            extra_params=(_ACTION_PARAM, ParameterSpec("max_connections", "integer")),
        ),
        _build_concurrent_connections,
        _match_concurrent_connections,
        uses_extension=True,
    ),
    _Pattern(
        _descriptor(
            "data-amount",
            "Amount of data",
            "Transfer volume is capped: each execution moves one unit and "
            "the total number of executions is bounded.",
            {_PROVIDER}, _PROVIDER, EnforcementClass.PREVENTIVE, PatternSource.LITERATURE,
            extra_params=(
                _ACTION_PARAM,
                ParameterSpec("unit", "string"),
                ParameterSpec("max_amount", "integer"),
            ),
        ),
        _build_data_amount,
        _match_data_amount,
    ),
    _Pattern(
        _descriptor(
            "processing-power",
            "Processing power",
            "The computing capacity used to prepare or serve the asset is "
            "capped.",
            {_PROVIDER}, _PROVIDER, EnforcementClass.PREVENTIVE, PatternSource.LITERATURE,
            extra_params=(_ACTION_PARAM, ParameterSpec("max_power", "decimal")),
        ),
        _build_processing_power,
        _match_processing_power,
        uses_extension=True,
    ),
    _Pattern(
        _descriptor(
            "bandwidth",
            "Bandwidth",
            "The transfer or streaming bandwidth is capped.",
            {_PROVIDER, _THIRD}, _PROVIDER, EnforcementClass.PREVENTIVE,
            PatternSource.LITERATURE,
            extra_params=(_ACTION_PARAM, ParameterSpec("max_bandwidth", "decimal")),
        ),
        _build_bandwidth,
        _match_bandwidth,
        uses_extension=True,
    ),
    _Pattern(
        _descriptor(
            "billing",
            "Billing",
            "Each access is charged against the consumer's credit balance.",
            {_PROVIDER}, _PROVIDER, EnforcementClass.PREVENTIVE, PatternSource.LITERATURE,
            extra_params=(ParameterSpec("amount", "decimal"),),
            with_grant_action=True,
        ),
        _build_billing,
        _match_billing,
    ),
    _Pattern(
        _descriptor(
            "data-quality",
            "Data quality",
            "The asset must conform to a referenced schema shape before it "
            "is used.",
            {_CONSUMER}, _CONSUMER, EnforcementClass.DETECTIVE, PatternSource.SELF_DEFINED,
            extra_params=(ParameterSpec("shape", "iri"),),
            target_required=False,
        ),
        _build_data_quality,
        _match_data_quality,
        uses_extension=True,
    ),
    _Pattern(
        _descriptor(
            "deletion",
            "Deletion",
            "The consumer must delete the asset before a deadline.",
            {_CONSUMER, _THIRD}, _PROVIDER, EnforcementClass.DETECTIVE,
            PatternSource.LITERATURE,
            extra_params=(ParameterSpec("deadline", "dateTime"),),
            with_grant_action=True,
        ),
        _build_deletion,
        _match_deletion,
    ),
    _Pattern(
        _descriptor(
            "purpose",
            "Purpose restriction",
            "The asset may be used only for the declared purpose.",
            {_CONSUMER, _THIRD}, _PROVIDER, EnforcementClass.DETECTIVE,
            PatternSource.LITERATURE,
            extra_params=(_ACTION_PARAM, ParameterSpec("purpose", "iri")),
        ),
        _build_purpose,
        _match_purpose,
    ),
    _Pattern(
        _descriptor(
            "provable-attribute",
            "Provable attribute",
            "Access requires a valid third-party attestation of the named "
            "claim (e.g. membership).",
            {_PROVIDER, _THIRD}, _PROVIDER, EnforcementClass.PREVENTIVE,
            PatternSource.LITERATURE,
            extra_params=(_ACTION_PARAM, ParameterSpec("claim", "iri")),
        ),
        _build_provable_attribute,
        _match_provable_attribute,
        uses_extension=True,
    ),
    _Pattern(
        _descriptor(
            "encryption-consumer",
            "Encryption by consumer",
            "The consumer must store the received asset encrypted.",
            {_CONSUMER}, _PROVIDER, EnforcementClass.DETECTIVE, PatternSource.LITERATURE,
            with_grant_action=True,
        ),
        _build_encryption_consumer,
        _match_encryption_consumer,
        uses_extension=True,
    ),
    _Pattern(
        _descriptor(
            "encryption-provider",
            "Encryption by provider",
            "The provider must transfer the asset encrypted.",
            {_CONSUMER}, _CONSUMER, EnforcementClass.PREVENTIVE, PatternSource.SELF_DEFINED,
        ),
        _build_encryption_provider,
        _match_encryption_provider,
        uses_extension=True,
    ),
    _Pattern(
        _descriptor(
            "aggregation",
            "Aggregation",
            "The consumer must aggregate the asset before processing it.",
            {_CONSUMER}, _PROVIDER, EnforcementClass.DETECTIVE, PatternSource.LITERATURE,
            with_grant_action=True,
        ),
        _build_aggregation,
        _match_aggregation,
    ),
    _Pattern(
        _descriptor(
            "anonymization",
            "Anonymization",
            "The consumer must anonymize the asset before processing it.",
            {_CONSUMER}, _PROVIDER, EnforcementClass.DETECTIVE, PatternSource.LITERATURE,
            with_grant_action=True,
        ),
        _build_anonymization,
        _match_anonymization,
    ),
    _Pattern(
        _descriptor(
            "activity-logging",
            "Activity logging",
            "The consumer must report its processing activity to the "
            "provider's shared log.",
            {_CONSUMER}, _PROVIDER, EnforcementClass.DETECTIVE, PatternSource.LITERATURE,
            with_grant_action=True,
        ),
        _build_activity_logging,
        _match_activity_logging,
    ),
    _Pattern(
        _descriptor(
            "delegation",
            "Delegation of permission",
            "When redistributing the asset, the consumer must attach the "
            "referenced downstream policy.",
            {_CONSUMER}, _PROVIDER, EnforcementClass.DETECTIVE, PatternSource.LITERATURE,
            extra_params=(ParameterSpec("next_policy", "iri"),),
            with_grant_action=True,
        ),
        _build_delegation,
        _match_delegation,
    ),
    _Pattern(
        _descriptor(
            "up-to-dateness",
            "Up-to-dateness",
            "The provider must refresh the asset at least once per interval.",
            {_CONSUMER}, _PROVIDER, EnforcementClass.DETECTIVE, PatternSource.SELF_DEFINED,
            extra_params=(ParameterSpec("interval", "duration"),),
        ),
        _build_up_to_dateness,
        _match_up_to_dateness,
        uses_extension=True,
    ),
)

_BY_ID: dict[str, _Pattern] = {p.descriptor.id: p for p in _CATALOG}


def list_patterns() -> list[PatternDescriptor]:
    """All 22 descriptors in stable catalog order."""
    return [p.descriptor for p in _CATALOG]


def get_pattern(pattern_id: str) -> PatternDescriptor:
    try:
        return _BY_ID[pattern_id].descriptor
    except KeyError:
        raise UnknownPatternError(pattern_id) from None


def _default_uid(pattern_id: str) -> Iri:
    return Iri(f"http://example.com/policies/{pattern_id}")


def instantiate(pattern_id: str, params: Mapping[str, object]) -> Policy:
    """Build a validating policy from a catalog template."""
    pattern = _BY_ID.get(pattern_id)
    if pattern is None:
        raise UnknownPatternError(pattern_id)
    checked = _checked_params(pattern.descriptor, params)
    uid = checked.get("uid", _default_uid(pattern_id))
    profile = vocab.DSP_PROFILE if pattern.uses_extension else vocab.ODRL_CORE_PROFILE
    return Policy(
        uid=uid,
        kind=PolicyKind.SET,
        profiles=(profile,),
        rules=pattern.build(checked),
    )


def classify(policy: Policy) -> list[str]:
    """Every pattern id whose template shape matches a rule of the policy,
    in catalog order."""
    return [p.descriptor.id for p in _CATALOG if p.match(policy)]


def _merge_rules(rules: Sequence[Rule]) -> tuple[Rule, ...]:
    merged: list[Rule] = []
    index: dict[tuple, int] = {}
    for rule in rules:
        if rule.kind is RuleKind.DUTY:
            if rule_key(rule) not in index:
                index[rule_key(rule)] = len(merged)
                merged.append(rule)
            continue
        key = (
            rule.kind,
            rule.target,
            rule.assigner,
            rule.assignee,
            rule.action.action,
        )
        if key not in index:
            index[key] = len(merged)
            merged.append(rule)
            continue
        base = merged[index[key]]
        refinements = list(base.action.refinements)
        for ref in rule.action.refinements:
            if constraint_key(ref) not in {constraint_key(r) for r in refinements}:
                refinements.append(ref)
        constraints = list(base.constraints)
        for c in rule.constraints:
            if constraint_key(c) not in {constraint_key(x) for x in constraints}:
                constraints.append(c)
        duties = list(base.duties)
        for duty in rule.duties:
            if rule_key(duty) not in {rule_key(d) for d in duties}:
                duties.append(duty)
        merged[index[key]] = Rule(
            kind=base.kind,
            action=ActionExpression(base.action.action, tuple(refinements)),
            target=base.target,
            assigner=base.assigner,
            assignee=base.assignee,
            constraints=tuple(constraints),
            duties=tuple(duties),
            annotations=base.annotations + rule.annotations,
        )
    return tuple(merged)


def combine(policies: Sequence[Policy], uid: Iri | None = None) -> Policy:
    """Merge several pattern instances into one policy.

    Permissions and prohibitions that agree on (target, parties, action)
    are folded together, unioning refinements, constraints, and duties;
    standalone duties are concatenated. Profiles are unioned.
    """
    if not policies:
        raise ValueError("combine requires at least one policy")
    profiles: list[Iri] = []
    for policy in policies:
        for profile in policy.profiles:
            if profile not in profiles:
                profiles.append(profile)
    rules = [rule for policy in policies for rule in policy.rules]
    return Policy(
        uid=uid or policies[0].uid,
        kind=PolicyKind.SET,
        profiles=tuple(sorted(profiles, key=lambda p: p.value)),
        rules=_merge_rules(rules),
    )


def catalog_markdown() -> str:
    """The catalog as a Markdown reference table."""
    lines = [
        "| Id | Name | PIP | PAP/PDP | Enforcement | Source |",
        "| --- | --- | --- | --- | --- | --- |",
    ]
    for descriptor in list_patterns():
        pip = ", ".join(sorted(role.value for role in descriptor.pip_roles))
        lines.append(
            f"| {descriptor.id} | {descriptor.name} | {pip} | "
            f"{descriptor.pap_pdp_role.value} | {descriptor.enforcement_class.value} | "
            f"{descriptor.source.value} |"
        )
    return "\n".join(lines) + "\n"
