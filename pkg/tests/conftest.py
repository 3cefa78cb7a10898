from __future__ import annotations

from datetime import date

import pytest

from ledgercast.core import FiscalCalendar
from ledgercast.synthgen import SynthConfig, generate

CAL = FiscalCalendar(date(2020, 1, 6), n_years=10)


@pytest.fixture
def cal() -> FiscalCalendar:
    return CAL


@pytest.fixture(scope="session")
def small_dataset():
    """Two observed years, few customers; fast enough for unit tests."""
    cfg = SynthConfig(seed=7, weeks=104, n_customers_per_segment={"CSB": 4, "Commercial": 3, "Enterprise": 2})
    return generate(cfg)


@pytest.fixture(scope="session")
def acceptance_dataset():
    from ledgercast.presets import acceptance_synth

    return generate(acceptance_synth(1))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS):
            terminalreporter.write_line(line)
