import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rsmoments.coeffs import WeightConfig, compute_coeffs, compute_fourier  # noqa: E402
from rsmoments.errterm import calibrate  # noqa: E402


@pytest.fixture(scope="session")
def fourier_small():
    return compute_fourier(WeightConfig(N=2000))


@pytest.fixture(scope="session")
def table_small(fourier_small):
    return compute_coeffs(fourier_small)


@pytest.fixture(scope="session")
def fourier_1e5():
    return compute_fourier(WeightConfig(N=100_000))


@pytest.fixture(scope="session")
def table_1e5(fourier_1e5):
    return compute_coeffs(fourier_1e5)


@pytest.fixture(scope="session")
def cal_1e5(table_1e5):
    return calibrate(table_1e5, rho=3)


_VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Record one pass/fail line for an acceptance criterion."""
    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        _VERDICTS.append(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
