import pytest

from gramfuzz.grammar import bundled_grammar


@pytest.fixture(scope="session")
def minijs():
    return bundled_grammar("minijs")


@pytest.fixture(scope="session")
def plist():
    return bundled_grammar("plist-xml")
