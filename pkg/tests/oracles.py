"""Independent reference implementations used as test oracles."""

import numpy as np


def izhikevich_euler(a, b, c, d, current, dt_ms, duration_ms, v_peak=30.0, v0=None, u0=None):
    """Plain forward Euler with the textbook reset; returns spike times in ms."""
    v = c if v0 is None else v0
    u = b * c if u0 is None else u0
    n = int(round(duration_ms / dt_ms))
    out = []
    for k in range(n):
        v, u = (v + dt_ms * (0.04 * v * v + 5 * v + 140 - u + current),
                u + dt_ms * a * (b * v - u))
        if v >= v_peak:
            out.append((k + 1) * dt_ms)
            v, u = c, u + d
    return np.array(out)
