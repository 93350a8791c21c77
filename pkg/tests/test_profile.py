from __future__ import annotations

from usagectl import vocab
from usagectl.model import Iri, XSD_INTEGER
from usagectl.profile import (
    TermKind,
    default_registry,
    load_profile_file,
    parse_profile_text,
)

EXPECTED_ACTIONS = [
    vocab.ODRL_READ,
    vocab.ODRL_DELETE,
    vocab.ODRL_ANONYMIZE,
    vocab.ODRL_AGGREGATE,
    vocab.ODRL_INFORM,
    vocab.ODRL_COMPENSATE,
    vocab.ODRL_NEXT_POLICY,
    vocab.ODRL_DISTRIBUTE,
    vocab.ODRL_USE,
    vocab.DSP_UPDATE,
    vocab.DSP_QUALITY_CONTROL,
    vocab.DSP_STORE,
    vocab.DSP_ENCRYPT,
]

EXPECTED_LEFT_OPERANDS = [
    vocab.ODRL_COUNT,
    vocab.ODRL_UNIT_OF_COUNT,
    vocab.ODRL_DATETIME,
    vocab.ODRL_TIME_INTERVAL,
    vocab.ODRL_SPATIAL,
    vocab.ODRL_EVENT,
    vocab.ODRL_PURPOSE,
    vocab.ODRL_PAY_AMOUNT,
    vocab.ODRL_RECIPIENT,
    vocab.DSP_CONFORMS_TO,
    vocab.DSP_CONCURRENT_CONNECTIONS,
    vocab.DSP_BANDWIDTH,
    vocab.DSP_PROCESSING_POWER,
    vocab.DSP_ATTESTED_CLAIM,
    vocab.DSP_STORAGE_REGION,
]


def test_read_is_a_core_action():
    info = default_registry().resolve(vocab.ODRL_READ)
    assert info is not None
    assert info.kind is TermKind.ACTION
    assert info.defining_profile == vocab.ODRL_CORE_PROFILE


def test_update_is_an_extension_action():
    info = default_registry().resolve(vocab.DSP_UPDATE)
    assert info is not None
    assert info.kind is TermKind.ACTION
    assert info.defining_profile == vocab.DSP_PROFILE


def test_unregistered_iri_is_unknown():
    assert default_registry().resolve(Iri("http://example.com/unregistered")) is None


def test_minimum_term_coverage():
    registry = default_registry()
    for action in EXPECTED_ACTIONS:
        info = registry.resolve(action)
        assert info is not None and info.kind is TermKind.ACTION, action
    for operand in EXPECTED_LEFT_OPERANDS:
        info = registry.resolve(operand)
        assert info is not None and info.kind is TermKind.LEFT_OPERAND, operand
    marker = registry.resolve(vocab.ODRL_POLICY_USAGE)
    assert marker is not None


def test_conforms_to_registered_as_left_operand():
    info = default_registry().resolve(vocab.DSP_CONFORMS_TO)
    assert info.kind is TermKind.LEFT_OPERAND


def test_listing_sorted_and_stable():
    registry = default_registry()
    first = registry.registered_terms()
    second = registry.registered_terms()
    assert first == second
    values = [t.iri.value for t in first]
    assert values == sorted(values)


def test_resolve_consistent_with_listing():
    registry = default_registry()
    for term in registry.registered_terms():
        assert registry.resolve(term.iri) == term


def test_profile_alias_spellings_resolve():
    registry = default_registry()
    for base in vocab.DSP_ALIASES:
        assert registry.resolve(Iri(base + "update")) is not None


def test_parse_profile_text_reads_datatypes():
    text = (
        "@prefix odrl: <http://www.w3.org/ns/odrl/2/> .\n"
        "@prefix dsp: <http://www.w3id.org/dataspaces-policies/> .\n"
        "@prefix xsd: <http://www.w3.org/2001/XMLSchema#> .\n"
        "@prefix ex: <http://example.com/profile/> .\n"
        "ex:maxRows a odrl:LeftOperand ; dsp:datatype xsd:integer ;\n"
        "  dsp:definedBy ex: .\n"
    )
    terms = parse_profile_text(text)
    assert len(terms) == 1
    term = terms[0]
    assert term.kind is TermKind.LEFT_OPERAND
    assert term.expected_datatype == XSD_INTEGER
    assert term.defining_profile == Iri("http://example.com/profile/")


def test_load_profile_file_extends_default(tmp_path):
    path = tmp_path / "extra.ttl"
    path.write_text(
        "@prefix odrl: <http://www.w3.org/ns/odrl/2/> .\n"
        "@prefix ex: <http://example.com/profile/> .\n"
        "ex:replicate a odrl:Action .\n",
        encoding="utf-8",
    )
    registry = load_profile_file(str(path))
    assert registry.resolve(Iri("http://example.com/profile/replicate")).kind is TermKind.ACTION
    assert registry.resolve(vocab.ODRL_READ) is not None  # built-ins still there


def test_shipped_profile_file_matches_builtin():
    from importlib import resources

    text = (resources.files("usagectl") / "data" / "dataspaces_profile.ttl").read_text("utf-8")
    registry = default_registry()
    for term in parse_profile_text(text):
        built_in = registry.resolve(term.iri)
        assert built_in is not None
        assert built_in.kind == term.kind
