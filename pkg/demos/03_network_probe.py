"""
Calibrating and probing the 10-10-10 network
============================================

The EPSC-to-model gain is unknown, so it is calibrated: the smallest gain at
which a 1 kHz burst reaches the output, plus 10% headroom, provided 5 Hz
Poisson input stays silent. Membrane traces of one neuron per layer are then
written to CSV as a software oscilloscope.
"""

import numpy as np

from netten import NetworkConfig, SpikeTrain, calibrate_gain
from netten.calibration import baseline_probe, burst_probe
from netten.encoding import DW, UP
from netten.network import probe

cfg = NetworkConfig()
cal = calibrate_gain(cfg)
print(f"burst boundary {cal.burst_threshold_gain:.4f}, calibrated gain {cal.gain:.4f} "
      f"({cal.iterations} probes)")
cfg = cfg.with_gain(cal.gain)
print("burst probe (fires, quiet after):", burst_probe(cfg))
print("5 Hz baseline silent:", baseline_probe(cfg))

# a 200 ms, 1.5 kHz Poisson volley on UP
rng = np.random.default_rng(0)
up = SpikeTrain(UP, np.unique(rng.uniform(0.05, 0.25, 300)))
ids = [0, 11, 21]           # input 0, hidden 1, output 1
traces, res = probe(cfg, up, SpikeTrain(DW, []), 0.4, ids)
for nid, tr in zip(ids, (res.input_trains[0], res.hidden_trains[1], res.output_trains[1])):
    print(f"neuron {nid:2d}: {len(tr)} spikes, v range [{traces[nid].min():.1f}, "
          f"{traces[nid].max():.1f}] mV")

t = np.arange(len(traces[ids[0]])) * cfg.dt_ms * 1e-3
np.savetxt("probe_traces.csv", np.column_stack([t] + [traces[i] for i in ids]),
           delimiter=",", header="time_s,v_in0,v_hid1,v_out1", comments="", fmt="%.6g")
print("wrote probe_traces.csv")
