"""Calibration of the EPSC-to-model-current gain.

The silicon maps synaptic current onto the neuron's membrane through an
unpublished transconductance, so the gain is fixed empirically:

1. Burst probe: a 200 ms regular UP burst at 1 kHz followed by 1 s of silence.
   It *passes* when at least one output neuron fires during the burst and no
   output neuron fires later than ``grace_s`` after the burst ends.
2. Baseline probe: 1 s of independent Poisson input at 5 Hz on UP and DW.
   It *passes* when no output neuron fires.

Firing under the burst is monotone in the gain, so the smallest passing gain is
found by bisection (after doubling to bracket it). The calibrated gain is that
boundary times ``headroom``; it is accepted only if both probes pass there.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .encoding import DW, UP, SpikeTrain
from .errors import CalibrationError
from .network import NetworkConfig, simulate

log = logging.getLogger(__name__)

BURST_RATE_HZ = 1000.0
BURST_S = 0.2
SILENCE_S = 1.0
BASELINE_RATE_HZ = 5.0
BASELINE_S = 1.0
LEAD_S = 0.05
DEFAULT_HEADROOM = 1.1


@dataclass(frozen=True)
class GainCalibration:
    gain: float
    burst_threshold_gain: float
    iterations: int
    burst_fires: bool
    baseline_silent: bool


def burst_inputs(rate_hz=BURST_RATE_HZ, burst_s=BURST_S, silence_s=SILENCE_S, lead_s=LEAD_S):
    n = int(round(burst_s * rate_hz))
    up = SpikeTrain(UP, lead_s + np.arange(n) / rate_hz)
    return up, SpikeTrain(DW, []), lead_s + burst_s + silence_s


def poisson_inputs(rate_hz=BASELINE_RATE_HZ, duration_s=BASELINE_S, seed=0):
    rng = np.random.default_rng(seed)
    trains = []
    for ch in (UP, DW):
        t = np.sort(rng.uniform(0.0, duration_s, size=rng.poisson(rate_hz * duration_s)))
        trains.append(SpikeTrain(ch, np.unique(t)))
    return trains[0], trains[1], duration_s


def burst_probe(config: NetworkConfig, grace_s=0.05):
    """(fires during burst, silent afterwards) for the burst probe."""
    up, dw, dur = burst_inputs()
    res = simulate(config, up, dw, dur)
    t_end = LEAD_S + BURST_S
    fired = any(len(tr.window(LEAD_S, t_end + grace_s)) for tr in res.output_trains)
    late = any(len(tr.window(t_end + grace_s, dur)) for tr in res.output_trains)
    return fired, not late


def baseline_probe(config: NetworkConfig, seed=0) -> bool:
    up, dw, dur = poisson_inputs(seed=seed)
    res = simulate(config, up, dw, dur)
    return not any(len(tr) for tr in res.output_trains)


def calibrate_gain(config: NetworkConfig, headroom=DEFAULT_HEADROOM, rel_tol=1e-3,
                   max_iter=100, seed=0) -> GainCalibration:
    """Fix ``epsc_to_model_gain`` by bisection on the burst probe."""
    lo = hi = config.epsc_to_model_gain
    it = 0
    if burst_probe(config.with_gain(hi))[0]:
        while burst_probe(config.with_gain(lo))[0]:
            lo /= 2
            it += 1
            if it > max_iter:
                raise CalibrationError("burst fires at every gain tried")
    else:
        while not burst_probe(config.with_gain(hi))[0]:
            hi *= 2
            it += 1
            if it > max_iter:
                raise CalibrationError("burst never elicits output firing")
    while hi - lo > rel_tol * hi and it < max_iter:
        mid = 0.5 * (lo + hi)
        if burst_probe(config.with_gain(mid))[0]:
            hi = mid
        else:
            lo = mid
        it += 1
    gain = hi * headroom
    cfg = config.with_gain(gain)
    fires, quiet_after = burst_probe(cfg)
    silent = baseline_probe(cfg, seed=seed)
    log.info("gain boundary %.6g, calibrated %.6g after %d probes", hi, gain, it)
    if not (fires and quiet_after and silent):
        raise CalibrationError(
            f"no gain satisfies both probes: at {gain:.6g} burst fires={fires}, "
            f"silent after burst={quiet_after}, silent on baseline={silent}")
    return GainCalibration(gain, hi, it, fires and quiet_after, silent)
