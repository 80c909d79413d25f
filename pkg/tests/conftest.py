from __future__ import annotations

import sys
from pathlib import Path

import pytest

from hochc.syntax import parse_hors

DATA = Path(__file__).parent / "data"
CORPUS = DATA / "corpus"
CORPUS_NAMES = sorted(p.stem for p in CORPUS.glob("*.hors"))


def corpus_text(name: str) -> str:
    return (CORPUS / f"{name}.hors").read_text()


def load(name: str):
    return parse_hors(corpus_text(name))


@pytest.fixture(params=CORPUS_NAMES)
def corpus_grammar(request):
    return request.param, load(request.param)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is not None and acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in acceptance.RESULTS:
            terminalreporter.write_line(line)
