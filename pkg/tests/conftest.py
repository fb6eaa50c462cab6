from __future__ import annotations

import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(Path(__file__).resolve().parent))

from nestsub.cli import load  # noqa: E402
from nestsub.subtype import Checker  # noqa: E402

CORPUS = ROOT / "corpus"


def corpus_text(name: str) -> str:
    return (CORPUS / name).read_text(encoding="utf-8")


def load_corpus(name: str):
    return load(corpus_text(name)).renamed


class InvertedPlusChecker(Checker):
    """Deliberately broken: internal choice demands a label superset."""

    def _plus_labels(self, lower, upper):
        return set(lower) >= set(upper), upper


@pytest.fixture
def corpus():
    return load_corpus


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None:
        return
    lines = module.summary_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
