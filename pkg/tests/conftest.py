from pathlib import Path

import pytest

from aptc.dsl import parse_model, parse_term

ROOT = Path(__file__).resolve().parents[1]
MODELS = ROOT / "models"
GOLDEN = Path(__file__).resolve().parent / "golden"

BASIC_MODEL_TEXT = """\
model basic;
act a, b, c;
comm a | b = c;
"""


@pytest.fixture(scope="session")
def basic_model():
    return parse_model(BASIC_MODEL_TEXT)


@pytest.fixture
def term(basic_model):
    return lambda text: parse_term(text, basic_model)


def read_golden(name: str) -> str:
    return (GOLDEN / name).read_text(encoding="utf-8")


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_report():
    """Record one PASS or FAIL line per acceptance criterion."""
    def record(criterion: int, ok: bool, detail: str) -> None:
        ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
