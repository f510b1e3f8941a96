import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def pmf_weights(draw, min_size=1, max_size=32):
    n = draw(st.integers(min_size, max_size))
    raw = draw(st.lists(st.floats(0.0, 1.0), min_size=n, max_size=n))
    w = np.asarray(raw) + 1e-3
    return w / w.sum()


@pytest.fixture
def rng():
    return np.random.default_rng(20261019)


_ACCEPTANCE: list[str] = []


@pytest.fixture
def verdict_line(request):
    """Record one PASS/FAIL line per acceptance criterion and print it live."""

    def emit(num: int, ok: bool, detail: str):
        line = f"CRITERION {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE.append(line)
        capman = request.config.pluginmanager.getplugin("capturemanager")
        with capman.global_and_fixture_disabled():
            print("\n" + line, flush=True)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
