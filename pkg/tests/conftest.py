import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "floodscope", deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("floodscope")


@pytest.fixture
def gt():
    from floodscope.raster import GeoTransform

    return GeoTransform(500_000.0, 3_000_000.0, 30.0, 30.0, "EPSG:32642")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --- acceptance verdicts ----------------------------------------------------------

ACCEPTANCE: dict = {}


class Criterion:
    """Collects named checks for one acceptance criterion and records a verdict."""

    def __init__(self, number: int, title: str):
        self.number, self.title = number, title
        self.failures: list[str] = []
        self.notes: list[str] = []

    def check(self, name: str, ok: bool, detail: str = "") -> None:
        (self.notes if ok else self.failures).append(f"{name}{': ' + detail if detail else ''}")

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None:
            self.failures.append(f"error: {exc_type.__name__}: {exc}")
        ok = not self.failures
        detail = "; ".join(self.failures + self.notes)
        line = f"CRITERION {self.number} {'PASS' if ok else 'FAIL'} [{self.title}] {detail}"
        ACCEPTANCE[self.number] = line
        print(line)
        if exc is None:
            assert ok, line
        return False


@pytest.fixture
def criterion():
    return Criterion


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
