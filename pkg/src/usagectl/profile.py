"""Vocabulary registry: ODRL core/common terms plus the data-spaces profile
extension, with term kind and expected operand datatype.

The built-in registry is compiled in; additional terms can be loaded from a
Turtle definition file (see :func:`load_profile_file`) that types each term
as ``odrl:Action``, ``odrl:LeftOperand``, or ``odrl:Operator`` and may attach
``dsp:datatype`` and ``dsp:definedBy``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping

from . import vocab
from .model import (
    Iri,
    XSD_DATETIME,
    XSD_DECIMAL,
    XSD_DURATION,
    XSD_INTEGER,
    XSD_STRING,
)


class TermKind(str, Enum):
    ACTION = "Action"
    LEFT_OPERAND = "LeftOperand"
    OPERATOR = "Operator"
    CLASS = "Class"
    PROPERTY = "Property"


@dataclass(frozen=True)
class TermInfo:
    iri: Iri
    kind: TermKind
    expected_datatype: Iri | None = None
    defining_profile: Iri = vocab.ODRL_CORE_PROFILE


class ProfileRegistry:
    """Immutable IRI -> TermInfo lookup. Profile spelling variants of the
    data-spaces namespace are collapsed before lookup."""

    def __init__(self, terms: Iterable[TermInfo]) -> None:
        self._terms: dict[str, TermInfo] = {}
        for term in terms:
            self._terms[vocab.normalize_profile_iri(term.iri).value] = term

    def resolve(self, iri: Iri) -> TermInfo | None:
        return self._terms.get(vocab.normalize_profile_iri(iri).value)

    def registered_terms(self) -> list[TermInfo]:
        return sorted(self._terms.values(), key=lambda t: t.iri.value)

    def with_terms(self, terms: Iterable[TermInfo]) -> "ProfileRegistry":
        return ProfileRegistry([*self._terms.values(), *terms])

    def __len__(self) -> int:
        return len(self._terms)


def _core(iri: Iri, kind: TermKind, datatype: Iri | None = None) -> TermInfo:
    return TermInfo(iri, kind, datatype, vocab.ODRL_CORE_PROFILE)


def _dsp(iri: Iri, kind: TermKind, datatype: Iri | None = None) -> TermInfo:
    return TermInfo(iri, kind, datatype, vocab.DSP_PROFILE)


_CORE_TERMS: tuple[TermInfo, ...] = (
    # actions
    _core(vocab.ODRL_USE, TermKind.ACTION),
    _core(vocab.ODRL_READ, TermKind.ACTION),
    _core(vocab.ODRL_DELETE, TermKind.ACTION),
    _core(vocab.ODRL_ANONYMIZE, TermKind.ACTION),
    _core(vocab.ODRL_AGGREGATE, TermKind.ACTION),
    _core(vocab.ODRL_INFORM, TermKind.ACTION),
    _core(vocab.ODRL_COMPENSATE, TermKind.ACTION),
    _core(vocab.ODRL_NEXT_POLICY, TermKind.ACTION),
    _core(vocab.ODRL_DISTRIBUTE, TermKind.ACTION),
    # left operands
    _core(vocab.ODRL_COUNT, TermKind.LEFT_OPERAND, XSD_INTEGER),
    _core(vocab.ODRL_UNIT_OF_COUNT, TermKind.LEFT_OPERAND, XSD_STRING),
    _core(vocab.ODRL_DATETIME, TermKind.LEFT_OPERAND, XSD_DATETIME),
    _core(vocab.ODRL_TIME_INTERVAL, TermKind.LEFT_OPERAND, XSD_DURATION),
    _core(vocab.ODRL_SPATIAL, TermKind.LEFT_OPERAND, XSD_STRING),
    _core(vocab.ODRL_EVENT, TermKind.LEFT_OPERAND),
    _core(vocab.ODRL_PURPOSE, TermKind.LEFT_OPERAND),
    _core(vocab.ODRL_PAY_AMOUNT, TermKind.LEFT_OPERAND, XSD_DECIMAL),
    _core(vocab.ODRL_RECIPIENT, TermKind.LEFT_OPERAND),
    # right-operand marker
    _core(vocab.ODRL_POLICY_USAGE, TermKind.PROPERTY),
    # operators
    *(_core(iri, TermKind.OPERATOR) for iri in vocab.OPERATOR_IRIS),
    # classes
    _core(vocab.ODRL_POLICY, TermKind.CLASS),
    _core(vocab.ODRL_SET, TermKind.CLASS),
    _core(vocab.ODRL_OFFER, TermKind.CLASS),
    _core(vocab.ODRL_AGREEMENT, TermKind.CLASS),
    _core(vocab.ODRL_PERMISSION_CLASS, TermKind.CLASS),
    _core(vocab.ODRL_PROHIBITION_CLASS, TermKind.CLASS),
    _core(vocab.ODRL_DUTY_CLASS, TermKind.CLASS),
    _core(vocab.ODRL_OBLIGATION_CLASS, TermKind.CLASS),
    _core(vocab.ODRL_ACTION_CLASS, TermKind.CLASS),
    _core(vocab.ODRL_CONSTRAINT_CLASS, TermKind.CLASS),
    _core(vocab.ODRL_ASSET_CLASS, TermKind.CLASS),
    _core(vocab.ODRL_LEFT_OPERAND_CLASS, TermKind.CLASS),
    _core(vocab.ODRL_OPERATOR_CLASS, TermKind.CLASS),
    _core(vocab.ODRL_CORE_PROFILE, TermKind.CLASS),
    # properties
    _core(vocab.ODRL_PROFILE_PROP, TermKind.PROPERTY),
    _core(vocab.ODRL_PERMISSION, TermKind.PROPERTY),
    _core(vocab.ODRL_PROHIBITION, TermKind.PROPERTY),
    _core(vocab.ODRL_OBLIGATION, TermKind.PROPERTY),
    _core(vocab.ODRL_DUTY, TermKind.PROPERTY),
    _core(vocab.ODRL_TARGET, TermKind.PROPERTY),
    _core(vocab.ODRL_ASSIGNER, TermKind.PROPERTY),
    _core(vocab.ODRL_ASSIGNEE, TermKind.PROPERTY),
    _core(vocab.ODRL_ACTION, TermKind.PROPERTY),
    _core(vocab.ODRL_CONSTRAINT, TermKind.PROPERTY),
    _core(vocab.ODRL_REFINEMENT, TermKind.PROPERTY),
    _core(vocab.ODRL_LEFT_OPERAND, TermKind.PROPERTY),
    _core(vocab.ODRL_OPERATOR, TermKind.PROPERTY),
    _core(vocab.ODRL_RIGHT_OPERAND, TermKind.PROPERTY),
    TermInfo(vocab.RDF_VALUE, TermKind.PROPERTY, None, vocab.ODRL_CORE_PROFILE),
    TermInfo(vocab.DC11_TITLE, TermKind.PROPERTY, XSD_STRING, vocab.ODRL_CORE_PROFILE),
)

_DSP_TERMS: tuple[TermInfo, ...] = (
    _dsp(vocab.DSP_UPDATE, TermKind.ACTION),
    _dsp(vocab.DSP_QUALITY_CONTROL, TermKind.ACTION),
    _dsp(vocab.DSP_STORE, TermKind.ACTION),
    _dsp(vocab.DSP_ENCRYPT, TermKind.ACTION),
    _dsp(vocab.DSP_CONFORMS_TO, TermKind.LEFT_OPERAND),
    _dsp(vocab.DSP_CONCURRENT_CONNECTIONS, TermKind.LEFT_OPERAND, XSD_INTEGER),
    _dsp(vocab.DSP_BANDWIDTH, TermKind.LEFT_OPERAND, XSD_DECIMAL),
    _dsp(vocab.DSP_PROCESSING_POWER, TermKind.LEFT_OPERAND, XSD_DECIMAL),
    _dsp(vocab.DSP_ATTESTED_CLAIM, TermKind.LEFT_OPERAND),
    _dsp(vocab.DSP_STORAGE_REGION, TermKind.LEFT_OPERAND, XSD_STRING),
)


def default_registry() -> ProfileRegistry:
    return ProfileRegistry(_CORE_TERMS + _DSP_TERMS)


_TERM_KIND_CLASSES: Mapping[Iri, TermKind] = {
    vocab.ODRL_ACTION_CLASS: TermKind.ACTION,
    vocab.ODRL_LEFT_OPERAND_CLASS: TermKind.LEFT_OPERAND,
    vocab.ODRL_OPERATOR_CLASS: TermKind.OPERATOR,
}


def parse_profile_text(text: str, default_profile: Iri = vocab.DSP_PROFILE) -> list[TermInfo]:
    """Read term definitions from a Turtle subset document."""
    from .textio import parse_graph  # local import keeps module load light

    graph = parse_graph(text)
    terms: list[TermInfo] = []
    for subject in graph.order:
        if not isinstance(subject, Iri):
            continue
        kinds = [
            _TERM_KIND_CLASSES[t]
            for t in graph.objects(subject, vocab.RDF_TYPE)
            if isinstance(t, Iri) and t in _TERM_KIND_CLASSES
        ]
        if not kinds:
            continue
        datatype = next(
            (o for o in graph.objects(subject, vocab.DSP_DATATYPE) if isinstance(o, Iri)), None
        )
        defined_by = next(
            (o for o in graph.objects(subject, vocab.DSP_DEFINED_BY) if isinstance(o, Iri)),
            default_profile,
        )
        terms.append(TermInfo(subject, kinds[0], datatype, defined_by))
    return terms


def load_profile_file(path: str, base: ProfileRegistry | None = None) -> ProfileRegistry:
    """Extend a registry (default: the built-in one) with terms from a file."""
    with open(path, encoding="utf-8") as fh:
        terms = parse_profile_text(fh.read())
    return (base or default_registry()).with_terms(terms)
