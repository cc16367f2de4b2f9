import os

import pytest


@pytest.fixture(autouse=True)
def _isolated_cache(tmp_path, monkeypatch):
    """Keep every test away from the user's cache directory."""
    monkeypatch.setenv("LATCAP_CACHE_DIR", str(tmp_path / "cache"))
    yield


def pytest_report_header(config):
    return f"LATCAP_NUMBA={os.environ.get('LATCAP_NUMBA', '1')}"


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
