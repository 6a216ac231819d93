from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

import pytest


@pytest.fixture(scope="session")
def calibrated():
    from netten.calibration import calibrate_gain
    from netten.network import NetworkConfig

    cfg = NetworkConfig()
    return cfg.with_gain(calibrate_gain(cfg).gain)


_ACCEPTANCE = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion."""
    def record(criterion, ok, detail):
        line = f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} ({detail})"
        _ACCEPTANCE.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
