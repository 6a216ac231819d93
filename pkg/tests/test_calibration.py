import numpy as np
import pytest

from netten.calibration import (BURST_RATE_HZ, BURST_S, burst_inputs, burst_probe,
                                calibrate_gain, poisson_inputs)
from netten.errors import CalibrationError
from netten.network import NetworkConfig


def test_burst_inputs_shape():
    up, dw, dur = burst_inputs()
    assert len(up) == int(BURST_RATE_HZ * BURST_S) and len(dw) == 0
    assert np.allclose(np.diff(up.times_s), 1e-3)
    assert dur == pytest.approx(1.25)


def test_poisson_inputs_seeded():
    a = poisson_inputs(seed=3)
    b = poisson_inputs(seed=3)
    assert a[0] == b[0] and a[1] == b[1]
    assert 0 < len(a[0]) < 20


def test_calibration_brackets_the_boundary():
    cfg = NetworkConfig()
    cal = calibrate_gain(cfg)
    assert cal.gain == pytest.approx(1.1 * cal.burst_threshold_gain)
    # just below the boundary the burst no longer gets through
    assert not burst_probe(cfg.with_gain(cal.burst_threshold_gain * 0.99))[0]
    assert burst_probe(cfg.with_gain(cal.burst_threshold_gain))[0]


def test_calibration_independent_of_start_gain():
    lo = calibrate_gain(NetworkConfig(epsc_to_model_gain=1e-3))
    hi = calibrate_gain(NetworkConfig(epsc_to_model_gain=50.0))
    assert lo.burst_threshold_gain == pytest.approx(hi.burst_threshold_gain, rel=2e-3)


def test_calibration_fails_when_probes_conflict():
    with pytest.raises(CalibrationError, match="no gain satisfies"):
        calibrate_gain(NetworkConfig(), headroom=1000.0)
