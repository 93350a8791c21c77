"""Policy Information Point: pluggable attribute providers for contextual
values (clock, location, certified capacities), a region containment forest,
and integrity-protected third-party attestations.

Providers are read-only after construction and safe for concurrent queries.
``None`` stands for "attribute unavailable" throughout.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import json
import logging
from dataclasses import dataclass
from datetime import datetime
from typing import Callable, Iterable, Mapping, Protocol, Sequence

from . import vocab
from .model import Iri, TypedLiteral, XSD_DATETIME, parse_datetime

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AttributeQuery:
    operand: Iri
    subject: Iri
    at: datetime


class AttributeProvider(Protocol):
    def provides(self, operand: Iri) -> bool: ...

    def get(self, query: AttributeQuery) -> TypedLiteral | None: ...


def get_attribute(
    query: AttributeQuery, providers: Sequence[AttributeProvider]
) -> TypedLiteral | None:
    """First provider claiming the operand answers; None if nobody does."""
    for provider in providers:
        if provider.provides(query.operand):
            return provider.get(query)
    return None


class StaticAttributeProvider:
    """Fixture-backed attributes keyed by (operand, subject)."""

    def __init__(self, values: Mapping[tuple[Iri, Iri], TypedLiteral]) -> None:
        self._values = dict(values)
        self._operands = {operand for operand, _ in values}

    def provides(self, operand: Iri) -> bool:
        return operand in self._operands

    def get(self, query: AttributeQuery) -> TypedLiteral | None:
        return self._values.get((query.operand, query.subject))


class ClockProvider:
    """Answers odrl:dateTime from a logical clock callable."""

    def __init__(self, now: Callable[[], datetime]) -> None:
        self._now = now

    def provides(self, operand: Iri) -> bool:
        return operand == vocab.ODRL_DATETIME

    def get(self, query: AttributeQuery) -> TypedLiteral | None:
        return TypedLiteral(self._now().isoformat(), XSD_DATETIME)


class CallableAttributeProvider:
    """Adapter for a single operand computed by a function."""

    def __init__(
        self, operand: Iri, fn: Callable[[Iri, datetime], TypedLiteral | None]
    ) -> None:
        self._operand = operand
        self._fn = fn

    def provides(self, operand: Iri) -> bool:
        return operand == self._operand

    def get(self, query: AttributeQuery) -> TypedLiteral | None:
        return self._fn(query.subject, query.at)


# ---------------------------------------------------------------------------
# region containment

class RegionHierarchy:
    """Forest of region codes; containment is reflexive-transitive descent."""

    def __init__(self, children: Mapping[str, Sequence[str]]) -> None:
        self._parent: dict[str, str] = {}
        self._codes: set[str] = set(children)
        for parent, kids in children.items():
            for kid in kids:
                if kid in self._parent:
                    raise ValueError(f"region {kid!r} has more than one parent")
                self._parent[kid] = parent
                self._codes.add(kid)
        for code in self._codes:
            seen = {code}
            cursor = code
            while cursor in self._parent:
                cursor = self._parent[cursor]
                if cursor in seen:
                    raise ValueError(f"region hierarchy has a cycle through {cursor!r}")
                seen.add(cursor)

    def knows(self, code: str) -> bool:
        return code in self._codes

    def contains(self, outer: str, inner: str) -> bool:
        if outer not in self._codes or inner not in self._codes:
            logger.warning("unknown region code in containment check: %r / %r", outer, inner)
            return False
        cursor: str | None = inner
        while cursor is not None:
            if cursor == outer:
                return True
            cursor = self._parent.get(cursor)
        return False


def region_contains(outer: str, inner: str, hierarchy: RegionHierarchy) -> bool:
    return hierarchy.contains(outer, inner)


def load_region_hierarchy(path: str) -> RegionHierarchy:
    """Region file: JSON object mapping region code to list of child codes."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("region hierarchy file must contain a JSON object")
    return RegionHierarchy(data)


# ---------------------------------------------------------------------------
# attestations

@dataclass(frozen=True)
class Attestation:
    """Third-party claim about a subject, authenticated with a shared-secret
    MAC; any field mutation invalidates the tag."""

    issuer: Iri
    subject: Iri
    claim: Iri
    value: TypedLiteral
    expires: datetime
    tag: str

    def payload(self) -> bytes:
        return _attestation_payload(
            self.issuer, self.subject, self.claim, self.value, self.expires
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "issuer": self.issuer.value,
                "subject": self.subject.value,
                "claim": self.claim.value,
                "value": {"lexical": self.value.lexical, "datatype": self.value.datatype.value},
                "expires": self.expires.isoformat(),
                "tag": self.tag,
            },
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, line: str) -> "Attestation":
        data = json.loads(line)
        return cls(
            issuer=Iri(data["issuer"]),
            subject=Iri(data["subject"]),
            claim=Iri(data["claim"]),
            value=TypedLiteral(data["value"]["lexical"], Iri(data["value"]["datatype"])),
            expires=parse_datetime(data["expires"]),
            tag=data["tag"],
        )


def _attestation_payload(
    issuer: Iri, subject: Iri, claim: Iri, value: TypedLiteral, expires: datetime
) -> bytes:
    blob = json.dumps(
        [issuer.value, subject.value, claim.value, value.lexical, value.datatype.value,
         expires.isoformat()],
        separators=(",", ":"),
    )
    return blob.encode("utf-8")


def issue_attestation(
    issuer: Iri,
    subject: Iri,
    claim: Iri,
    value: TypedLiteral,
    expires: datetime,
    key: bytes,
) -> Attestation:
    payload = _attestation_payload(issuer, subject, claim, value, expires)
    tag = base64.b64encode(hmac.new(key, payload, hashlib.sha256).digest()).decode("ascii")
    return Attestation(issuer, subject, claim, value, expires, tag)


def verify_attestation(attestation: Attestation, issuer_key: bytes, now: datetime) -> bool:
    """True iff the MAC verifies under the issuer key and the attestation has
    not expired."""
    expected = hmac.new(issuer_key, attestation.payload(), hashlib.sha256).digest()
    try:
        actual = base64.b64decode(attestation.tag.encode("ascii"), validate=True)
    except Exception:
        return False
    if not hmac.compare_digest(expected, actual):
        return False
    return now < attestation.expires


class AttestationClaimProvider:
    """Exposes verified attestation claims as attributes keyed by claim IRI.

    An attestation from an issuer without a registered key never verifies
    (unknown issuer), and expired attestations are skipped.
    """

    def __init__(
        self, attestations: Iterable[Attestation], issuer_keys: Mapping[Iri, bytes]
    ) -> None:
        self._attestations = list(attestations)
        self._keys = dict(issuer_keys)
        self._claims = {a.claim for a in self._attestations}

    def provides(self, operand: Iri) -> bool:
        return operand == vocab.DSP_ATTESTED_CLAIM or operand in self._claims

    def get(self, query: AttributeQuery) -> TypedLiteral | None:
        for attestation in self._attestations:
            if attestation.subject != query.subject or attestation.claim != query.operand:
                continue
            key = self._keys.get(attestation.issuer)
            if key is None:
                logger.warning("unknown issuer %s", attestation.issuer)
                continue
            if verify_attestation(attestation, key, query.at):
                return attestation.value
        return None


# ---------------------------------------------------------------------------
# service facade used by the decision point

class AttributeService:
    """Bundles an ordered provider chain with a region hierarchy."""

    def __init__(
        self,
        providers: Sequence[AttributeProvider] = (),
        regions: RegionHierarchy | None = None,
    ) -> None:
        self.providers = tuple(providers)
        self.regions = regions or RegionHierarchy({})

    def get(self, operand: Iri, subject: Iri, at: datetime) -> TypedLiteral | None:
        return get_attribute(AttributeQuery(operand, subject, at), self.providers)

    def contains(self, outer: str, inner: str) -> bool:
        return self.regions.contains(outer, inner)
