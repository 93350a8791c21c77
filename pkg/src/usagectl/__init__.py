"""Usage-control policy engine and connector simulator for data spaces.

Parses and serializes a Turtle subset of ODRL policies, evaluates access
requests (PDP) against usage state with pluggable context attributes (PIP),
enforces decisions with audit, detective, and continuous mechanisms (PEP),
ships a 22-entry policy-pattern catalog (PAP), and replays deterministic
provider/consumer negotiation scenarios.
"""

from .model import (
    ActionExpression,
    Annotation,
    Asset,
    Constraint,
    Iri,
    Operator,
    PartyRole,
    Policy,
    PolicyKind,
    Rule,
    RuleKind,
    Severity,
    TypedLiteral,
    Violation,
    as_agreement,
    as_offer,
    is_valid,
    semantic_equals,
    validate_policy,
)
from .textio import ParseError, parse, serialize, serialize_document

__version__ = "0.1.0"

__all__ = [
    "ActionExpression",
    "Annotation",
    "Asset",
    "Constraint",
    "Iri",
    "Operator",
    "ParseError",
    "PartyRole",
    "Policy",
    "PolicyKind",
    "Rule",
    "RuleKind",
    "Severity",
    "TypedLiteral",
    "Violation",
    "__version__",
    "as_agreement",
    "as_offer",
    "is_valid",
    "parse",
    "semantic_equals",
    "serialize",
    "serialize_document",
    "validate_policy",
]
