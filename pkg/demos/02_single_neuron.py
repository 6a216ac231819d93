"""
One neuron, one synapse
=======================

The regular-spiking neuron under constant drive, the EPSC kernel and the
STDP window, each checked against a closed form or a fine-step reference.
"""

import math

import numpy as np

from netten.dynamics import (EpscParams, NeuronParams, StdpParams, SynapseState, epsc_on_pre,
                             epsc_step, simulate_neuron, stdp_window)

p = NeuronParams()
print("f-I curve (1 s, dt 0.1 ms):")
for current in (3, 4, 6, 10, 15, 20):
    spikes = simulate_neuron(p, current, dt_ms=0.1, duration_ms=1000.0)
    print(f"  I={current:>2}: {len(spikes):3d} spikes", end="")
    if len(spikes) > 2:
        print(f", first ISI {spikes[1] - spikes[0]:.1f} ms, last ISI {spikes[-1] - spikes[-2]:.1f} ms")
    else:
        print()

# step-size convergence of spike times
ref = simulate_neuron(p, 10.0, dt_ms=0.001, duration_ms=1000.0)
for dt in (0.5, 0.25, 0.1):
    s = simulate_neuron(p, 10.0, dt_ms=dt, duration_ms=1000.0)
    m = min(len(s), len(ref))
    print(f"dt {dt:4} ms: {len(s)} spikes, max shift {np.max(np.abs(s[:m] - ref[:m])):.3f} ms")

# EPSC: instant rise, exponential decay
e = EpscParams()
s = epsc_on_pre(SynapseState(weight=1.0), e)
for k in range(4):
    print(f"EPSC after {k} tau: {s.epsc_current:7.2f} pA")
    s = epsc_step(s, e, e.tau_decay_s)

sp = StdpParams()
for dt_ms in (-20, -10, -5, 0, 5, 10, 20):
    print(f"W({dt_ms:+3d} ms) = {stdp_window(dt_ms * 1e-3, sp):+.4f}")
print(f"W(tau+)/A+ = {stdp_window(sp.tau_plus_s, sp) / sp.a_plus:.6f} (1/e = {1 / math.e:.6f})")
