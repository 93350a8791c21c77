"""ODRL-style policy model: immutable AST types, structural validation, and
order/blank-node-insensitive equality.

Everything here is a frozen dataclass; instances are safe to share between
threads. Hard structural rules (duty nesting, IRI shape) are enforced at
construction, while recoverable problems (missing parties on an agreement,
malformed literals, unknown vocabulary) are reported by :func:`validate_policy`
so that broken policies remain representable and inspectable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from datetime import datetime, timedelta, timezone
from decimal import Decimal, InvalidOperation
from enum import Enum
from typing import Iterable, Sequence, Union

XSD = "http://www.w3.org/2001/XMLSchema#"

_INTEGER_RE = re.compile(r"^[+-]?\d+$")
_DURATION_RE = re.compile(
    r"^(?P<sign>-)?P(?!$)"
    r"(?:(?P<weeks>\d+)W)?"
    r"(?:(?P<days>\d+)D)?"
    r"(?:T?(?=\d)"
    r"(?:(?P<hours>\d+)H)?"
    r"(?:(?P<minutes>\d+)M)?"
    r"(?:(?P<seconds>\d+(?:\.\d+)?)S)?"
    r")?$"
)


@dataclass(frozen=True, order=True)
class Iri:
    """Absolute IRI. Must carry a scheme separator, e.g. ``http://...``."""

    value: str

    def __post_init__(self) -> None:
        if not self.value:
            raise ValueError("IRI must be non-empty")
        if "://" not in self.value:
            raise ValueError(f"not an absolute IRI: {self.value!r}")

    def __str__(self) -> str:
        return self.value


XSD_STRING = Iri(XSD + "string")
XSD_INTEGER = Iri(XSD + "integer")
XSD_DECIMAL = Iri(XSD + "decimal")
XSD_BOOLEAN = Iri(XSD + "boolean")
XSD_DATETIME = Iri(XSD + "dateTime")
XSD_DURATION = Iri(XSD + "duration")


@dataclass(frozen=True)
class TypedLiteral:
    """A lexical form plus datatype IRI.

    The lexical form is kept verbatim; whether it actually parses under the
    datatype is checked by :func:`literal_value` and reported by
    :func:`validate_policy`.
    """

    lexical: str
    datatype: Iri = XSD_STRING

    def __str__(self) -> str:
        return self.lexical


RightOperand = Union[TypedLiteral, Iri]


def parse_datetime(lexical: str) -> datetime:
    """Parse an ISO 8601 timestamp; naive inputs are taken as UTC."""
    s = lexical.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    dt = datetime.fromisoformat(s)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt


def parse_duration(lexical: str) -> timedelta:
    """Parse an ISO 8601 duration into a timedelta.

    The ``T`` separator may be omitted before time components (``P30S`` is
    read as 30 seconds). Calendar components (years, months) are rejected;
    an ``M`` component therefore always means minutes.
    """
    m = _DURATION_RE.match(lexical.strip())
    if m is None:
        raise ValueError(f"not a duration: {lexical!r}")
    parts = m.groupdict()
    delta = timedelta(
        weeks=int(parts["weeks"] or 0),
        days=int(parts["days"] or 0),
        hours=int(parts["hours"] or 0),
        minutes=int(parts["minutes"] or 0),
        seconds=float(parts["seconds"] or 0),
    )
    return -delta if parts["sign"] else delta


def duration_iso(delta: timedelta) -> str:
    """Render a timedelta as an ISO 8601 duration (time components only)."""
    total = delta.total_seconds()
    sign = "-" if total < 0 else ""
    total = abs(total)
    days, rest = divmod(total, 86400)
    hours, rest = divmod(rest, 3600)
    minutes, seconds = divmod(rest, 60)
    out = f"{sign}P"
    if days:
        out += f"{int(days)}D"
    time_part = ""
    if hours:
        time_part += f"{int(hours)}H"
    if minutes:
        time_part += f"{int(minutes)}M"
    if seconds or not (days or hours or minutes):
        seconds_text = f"{seconds:.6f}".rstrip("0").rstrip(".")
        time_part += f"{seconds_text}S"
    return out + ("T" + time_part if time_part else "")


_BOOLEAN_LEXICALS = {"true": True, "false": False, "1": True, "0": False}


def literal_value(lit: TypedLiteral) -> object:
    """Convert a literal to its Python value; raises ValueError if the
    lexical form does not parse under the datatype. Unknown datatypes pass
    through as strings."""
    dt = lit.datatype
    if dt == XSD_STRING:
        return lit.lexical
    if dt == XSD_INTEGER:
        if not _INTEGER_RE.match(lit.lexical):
            raise ValueError(f"not an integer: {lit.lexical!r}")
        return int(lit.lexical)
    if dt == XSD_DECIMAL:
        try:
            value = Decimal(lit.lexical)
        except InvalidOperation as exc:
            raise ValueError(f"not a decimal: {lit.lexical!r}") from exc
        if not value.is_finite():
            raise ValueError(f"not a finite decimal: {lit.lexical!r}")
        return value
    if dt == XSD_BOOLEAN:
        try:
            return _BOOLEAN_LEXICALS[lit.lexical]
        except KeyError:
            raise ValueError(f"not a boolean: {lit.lexical!r}") from None
    if dt == XSD_DATETIME:
        return parse_datetime(lit.lexical)
    if dt == XSD_DURATION:
        return parse_duration(lit.lexical)
    return lit.lexical


def literal_is_valid(lit: TypedLiteral) -> bool:
    try:
        literal_value(lit)
    except ValueError:
        return False
    return True


class PartyRole(str, Enum):
    PROVIDER = "Provider"
    CONSUMER = "Consumer"
    THIRD_PARTY = "ThirdParty"


class Operator(str, Enum):
    EQ = "eq"
    NEQ = "neq"
    LT = "lt"
    LTEQ = "lteq"
    GT = "gt"
    GTEQ = "gteq"
    IS_PART_OF = "isPartOf"
    IS_ANY_OF = "isAnyOf"


class RuleKind(str, Enum):
    PERMISSION = "Permission"
    PROHIBITION = "Prohibition"
    DUTY = "Duty"


class PolicyKind(str, Enum):
    SET = "Set"
    OFFER = "Offer"
    AGREEMENT = "Agreement"


@dataclass(frozen=True)
class Annotation:
    """An unknown predicate preserved verbatim on a policy or rule."""

    predicate: Iri
    value: RightOperand


@dataclass(frozen=True)
class Constraint:
    left_operand: Iri
    operator: Operator
    right_operand: RightOperand


@dataclass(frozen=True)
class ActionExpression:
    """An action IRI, optionally narrowed by refinement constraints."""

    action: Iri
    refinements: tuple[Constraint, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "refinements", tuple(self.refinements))


@dataclass(frozen=True)
class Rule:
    kind: RuleKind
    action: ActionExpression
    target: Iri | None = None
    assigner: Iri | None = None
    assignee: Iri | None = None
    constraints: tuple[Constraint, ...] = ()
    duties: tuple[Rule, ...] = ()
    annotations: tuple[Annotation, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "constraints", tuple(self.constraints))
        object.__setattr__(self, "duties", tuple(self.duties))
        object.__setattr__(self, "annotations", tuple(self.annotations))
        if self.duties and self.kind is not RuleKind.PERMISSION:
            raise ValueError("duties may be nested only under permissions")
        for duty in self.duties:
            if duty.kind is not RuleKind.DUTY:
                raise ValueError("nested rules must be duties")
            if duty.duties:
                raise ValueError("duties must not nest further duties")


@dataclass(frozen=True)
class Policy:
    uid: Iri
    kind: PolicyKind = PolicyKind.SET
    profiles: tuple[Iri, ...] = ()
    rules: tuple[Rule, ...] = ()
    annotations: tuple[Annotation, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "profiles", tuple(self.profiles))
        object.__setattr__(self, "rules", tuple(self.rules))
        object.__setattr__(self, "annotations", tuple(self.annotations))

    def rules_of_kind(self, kind: RuleKind) -> tuple[Rule, ...]:
        return tuple(r for r in self.rules if r.kind is kind)


@dataclass(frozen=True)
class Asset:
    uid: Iri
    title: str | None = None


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class Violation:
    severity: Severity
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.severity.value}: {self.path}: {self.message}"


def _operand_key(operand: RightOperand) -> tuple:
    if isinstance(operand, Iri):
        return ("iri", operand.value)
    return ("lit", operand.lexical, operand.datatype.value)


def _constraint_key(c: Constraint) -> tuple:
    op = c.operator.value if isinstance(c.operator, Operator) else str(c.operator)
    return ("constraint", c.left_operand.value, op, _operand_key(c.right_operand))


def _annotation_key(a: Annotation) -> tuple:
    return ("ann", a.predicate.value, _operand_key(a.value))


def _action_key(a: ActionExpression) -> tuple:
    return ("action", a.action.value, tuple(sorted(_constraint_key(r) for r in a.refinements)))


def rule_key(rule: Rule) -> tuple:
    """Canonical, order-insensitive key for a rule; equal keys mean the
    rules are semantically the same."""
    return (
        "rule",
        rule.kind.value,
        rule.target.value if rule.target else "",
        rule.assigner.value if rule.assigner else "",
        rule.assignee.value if rule.assignee else "",
        _action_key(rule.action),
        tuple(sorted(_constraint_key(c) for c in rule.constraints)),
        tuple(sorted(rule_key(d) for d in rule.duties)),
        tuple(sorted(_annotation_key(a) for a in rule.annotations)),
    )


def policy_key(policy: Policy) -> tuple:
    return (
        "policy",
        policy.uid.value,
        policy.kind.value,
        tuple(sorted(p.value for p in policy.profiles)),
        tuple(sorted(rule_key(r) for r in policy.rules)),
        tuple(sorted(_annotation_key(a) for a in policy.annotations)),
    )


def semantic_equals(a: Policy, b: Policy) -> bool:
    """True iff the two policies are isomorphic up to ordering of rules,
    constraints, duties, profiles, and annotations."""
    return policy_key(a) == policy_key(b)


def constraint_key(c: Constraint) -> tuple:
    return _constraint_key(c)


def iter_rules(policy: Policy) -> Iterable[tuple[str, Rule]]:
    """Yield (path, rule) for every rule including nested duties."""
    for i, rule in enumerate(policy.rules):
        path = f"rules[{i}]"
        yield path, rule
        for j, duty in enumerate(rule.duties):
            yield f"{path}.duties[{j}]", duty


def _check_literals(path: str, constraints: Sequence[Constraint], out: list[Violation]) -> None:
    for i, c in enumerate(constraints):
        if not isinstance(c.operator, Operator):
            out.append(
                Violation(Severity.ERROR, f"{path}[{i}]", f"unknown operator {c.operator!r}")
            )
        if isinstance(c.right_operand, TypedLiteral) and not literal_is_valid(c.right_operand):
            out.append(
                Violation(
                    Severity.ERROR,
                    f"{path}[{i}]",
                    f"malformed literal {c.right_operand.lexical!r} for "
                    f"{c.right_operand.datatype.value}",
                )
            )


def validate_policy(policy: Policy, registry=None) -> list[Violation]:
    """Structural validation. Errors make a policy invalid; warnings flag
    unknown vocabulary terms when a profile registry is supplied.

    Party completeness is checked on top-level rules only: duties nested
    under a permission inherit its parties at evaluation time.
    """
    out: list[Violation] = []
    if not policy.rules:
        out.append(Violation(Severity.ERROR, "rules", "policy has no rules"))
    for i, rule in enumerate(policy.rules):
        path = f"rules[{i}]"
        if policy.kind is PolicyKind.OFFER and rule.assigner is None:
            out.append(Violation(Severity.ERROR, path, "offer rule lacks an assigner"))
        if policy.kind is PolicyKind.AGREEMENT:
            if rule.assigner is None:
                out.append(Violation(Severity.ERROR, path, "agreement rule lacks an assigner"))
            if rule.assignee is None:
                out.append(Violation(Severity.ERROR, path, "agreement rule lacks an assignee"))
    for path, rule in iter_rules(policy):
        _check_literals(f"{path}.constraints", rule.constraints, out)
        _check_literals(f"{path}.action.refinements", rule.action.refinements, out)
        if registry is not None:
            if registry.resolve(rule.action.action) is None:
                out.append(
                    Violation(
                        Severity.WARNING,
                        f"{path}.action",
                        f"unknown action {rule.action.action}",
                    )
                )
            for c in (*rule.constraints, *rule.action.refinements):
                if registry.resolve(c.left_operand) is None:
                    out.append(
                        Violation(
                            Severity.WARNING,
                            path,
                            f"unknown left operand {c.left_operand}",
                        )
                    )
    return out


def is_valid(violations: Iterable[Violation]) -> bool:
    """True when no error-severity violation is present."""
    return all(v.severity is not Severity.ERROR for v in violations)


def _bind_parties(rule: Rule, assigner: Iri | None, assignee: Iri | None) -> Rule:
    changes = {}
    if rule.assigner is None and assigner is not None:
        changes["assigner"] = assigner
    if rule.assignee is None and assignee is not None:
        changes["assignee"] = assignee
    return replace(rule, **changes) if changes else rule


def as_offer(policy: Policy, assigner: Iri | None = None, uid: Iri | None = None) -> Policy:
    """Derive an offer: every top-level rule gets an assigner."""
    rules = tuple(_bind_parties(r, assigner, None) for r in policy.rules)
    return replace(policy, kind=PolicyKind.OFFER, rules=rules, uid=uid or policy.uid)


def as_agreement(
    policy: Policy,
    assigner: Iri | None = None,
    assignee: Iri | None = None,
    uid: Iri | None = None,
) -> Policy:
    """Derive an agreement, binding missing parties on top-level rules."""
    rules = tuple(_bind_parties(r, assigner, assignee) for r in policy.rules)
    return replace(policy, kind=PolicyKind.AGREEMENT, rules=rules, uid=uid or policy.uid)
