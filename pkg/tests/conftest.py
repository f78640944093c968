import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from szclass.synthgen import GenSpec, generate_corpus  # noqa: E402


@pytest.fixture(scope="session")
def small_spec():
    return GenSpec(patients_per_class=3, seizures_per_patient=2, duration=16.0, n_channels=4,
                   padding=1.0, seed=3)


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory, small_spec):
    out = tmp_path_factory.mktemp("small_corpus")
    manifest = generate_corpus(small_spec, out)
    return out, manifest


_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    """``check(n, title, ok, detail)`` records one PASS/FAIL line and asserts ``ok``."""

    def check(n, title, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {n:>2}: {title}"
        if detail:
            line += f" ({detail})"
        _ACCEPTANCE.append(line)
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
