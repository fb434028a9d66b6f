import pytest

from storyalign.align import _backend

BACKENDS = ["python"] + (["cython"] if _backend.compiled is not None else [])

# filled by test_acceptance; printed after the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run the test once per available DP kernel implementation."""
    mod = _backend.pure if request.param == "python" else _backend.compiled
    monkeypatch.setattr(_backend, "kernels", mod)
    return request.param


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
