from __future__ import annotations

import json
from pathlib import Path

import pytest

from usagectl import textio
from usagectl.model import Iri, Policy

FIXTURES = Path(__file__).parent / "fixtures"
DATA = Path(__file__).parent / "data"

PROVIDER_IRI = Iri("https://www.example.com/provider")
CONSUMER_IRI = Iri("https://www.example.com/consumer")
FILE1 = Iri("http://example.com/files/file1")


def read_fixture(name: str) -> str:
    return (FIXTURES / name).read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def provider_bundle_text() -> str:
    return read_fixture("provider_bundle.ttl")


@pytest.fixture(scope="session")
def consumer_bundle_text() -> str:
    return read_fixture("consumer_bundle.ttl")


@pytest.fixture(scope="session")
def provider_bundle(provider_bundle_text) -> Policy:
    policies = textio.parse(provider_bundle_text)
    assert len(policies) == 1
    return policies[0]


@pytest.fixture(scope="session")
def consumer_bundle(consumer_bundle_text) -> Policy:
    policies = textio.parse(consumer_bundle_text)
    assert len(policies) == 1
    return policies[0]


@pytest.fixture(scope="session")
def catalog_reference() -> list[dict]:
    return json.loads((DATA / "catalog_reference.json").read_text(encoding="utf-8"))
