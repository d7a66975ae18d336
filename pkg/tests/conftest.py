import numpy as np
import pytest

from physrisk.anomaly import build_anomaly_panel
from physrisk.data import generate_synthetic_bundle


@pytest.fixture(scope="session")
def bundle():
    """Ten firms, six regions, 1940-01..2025-12 temperatures, seven years of returns."""
    return generate_synthetic_bundle(7, 10, 6, 1032, return_months=84)


@pytest.fixture(scope="session")
def anomalies(bundle):
    return build_anomaly_panel(bundle.temperatures)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def write_text(path, text):
    path.write_text(text, encoding="utf-8")
    return path


_VERDICTS = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    lines = request.config.stash.setdefault(_VERDICTS, [])

    def record(number: int, title: str, ok: bool, detail: str = ""):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
        lines.append((number, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
