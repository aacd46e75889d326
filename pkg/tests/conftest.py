"""Shared fixtures; also puts the oracle module on the import path."""
from __future__ import annotations

import sys
from pathlib import Path

import pytest

from bugloc import synthetic

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def desk_corpus():
    return synthetic.generate(0)


@pytest.fixture(scope="session")
def desk_store(desk_corpus):
    """``(kept reports, FeatureStore)`` for the default generated corpus."""
    return synthetic.curated_store(desk_corpus)


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance check that ran."""
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance")
    for name, (ok, detail) in results.items():
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
