import math

import pytest
from hypothesis import given, strategies as st

from netten.dynamics import (EPSC_PEAK_PA, EPSC_TAU_S, EpscParams, NeuronParams, NeuronState,
                             StdpParams, SynapseState, epsc_on_pre, epsc_step, neuron_step, reset,
                             simulate_neuron, stdp_on_post, stdp_on_pre, stdp_window, weight_leak)
from netten.errors import InputError, NumericError, OrderingError

from oracles import izhikevich_euler

RS = NeuronParams()


def test_regular_spiking_defaults():
    assert (RS.a, RS.b, RS.c, RS.d, RS.v_peak) == (0.02, 0.2, -65.0, 8.0, 30.0)


def test_derivative_at_reset_state():
    # dv = 0.04*4225 - 325 + 140 + 13 = -3, du = 0
    s, spiked = neuron_step(NeuronState(-65.0, -13.0), RS, 0.0, dt_ms=1e-4)
    assert not spiked
    assert (s.v_mem + 65.0) / 1e-4 == pytest.approx(-3.0, rel=1e-4)
    assert abs(s.u + 13.0) < 1e-9


def test_reset_is_exact():
    s = reset(NeuronState(31.0, -5.0), RS)
    assert s == NeuronState(RS.c, 3.0)


def test_spike_step_applies_reset():
    s, spiked = neuron_step(NeuronState(29.9, -13.0), RS, 0.0, dt_ms=0.1)
    assert spiked
    assert s.v_mem < RS.v_peak
    # the rest of the step is integrated from (c, u + d)
    assert s.v_mem == pytest.approx(RS.c, abs=1.5)
    assert s.u == pytest.approx(-13.0 + RS.d, abs=0.1)


def test_rest_is_a_fixed_point():
    rest = NeuronState.rest(RS)
    assert (rest.v_mem, rest.u) == pytest.approx((-70.0, -14.0))
    s, _ = neuron_step(rest, RS, 0.0)
    assert s.v_mem == pytest.approx(rest.v_mem, abs=1e-12)


def test_neuron_step_errors():
    with pytest.raises(InputError):
        neuron_step(NeuronState(-65, -13), RS, 0.0, dt_ms=0.6)
    with pytest.raises(InputError):
        neuron_step(NeuronState(-65, -13), RS, 0.0, dt_ms=0.0)
    with pytest.raises(NumericError):
        neuron_step(NeuronState(float("nan"), -13), RS, 0.0)
    with pytest.raises(NumericError):
        neuron_step(NeuronState(29.9, -13), RS, float("inf"))


def test_param_invariants():
    with pytest.raises(InputError):
        NeuronParams(a=0.0)
    with pytest.raises(InputError):
        NeuronParams(c=40.0)


def test_tonic_spiking_matches_fine_reference():
    fast = simulate_neuron(RS, 10.0, dt_ms=0.1, duration_ms=1000.0)
    ref = izhikevich_euler(0.02, 0.2, -65.0, 8.0, 10.0, 0.001, 1000.0)
    assert len(fast) > 5
    assert abs(len(fast) - len(ref)) <= 1


@given(st.lists(st.floats(-20, 60), min_size=1, max_size=400))
def test_reset_property(currents):
    s = NeuronState.initial(RS)
    for i in currents:
        s, spiked = neuron_step(s, RS, i)
        assert s.v_mem < RS.v_peak
        assert math.isfinite(s.u)


# -- EPSC ------------------------------------------------------------------

def test_epsc_defaults():
    p = EpscParams()
    assert p.peak_per_unit_weight == EPSC_PEAK_PA == 486.39
    assert p.tau_decay_s == EPSC_TAU_S == 212.83e-6
    s = epsc_on_pre(SynapseState(1.0), p)
    assert s.epsc_current == 486.39
    assert epsc_step(s, p, p.tau_decay_s).epsc_current == pytest.approx(178.93, abs=0.01)


def test_epsc_zero_weight_and_superposition():
    p = EpscParams()
    assert epsc_on_pre(SynapseState(0.0), p).epsc_current == 0.0
    s = epsc_on_pre(epsc_on_pre(SynapseState(0.5), p), p)
    assert s.epsc_current == pytest.approx(486.39)
    assert epsc_step(SynapseState(0.3), p, 1e-3).epsc_current == 0.0


def test_epsc_cap():
    p = EpscParams(epsc_max=600.0)
    s = epsc_on_pre(epsc_on_pre(SynapseState(1.0), p), p)
    assert s.epsc_current == 600.0


@given(st.floats(1e-7, 1e-2), st.floats(0, 1e4))
def test_epsc_half_steps(dt, i0):
    p = EpscParams()
    s = SynapseState(1.0, epsc_current=i0)
    a = epsc_step(epsc_step(s, p, dt / 2), p, dt / 2).epsc_current
    b = epsc_step(s, p, dt).epsc_current
    assert a == pytest.approx(b, rel=1e-12, abs=1e-300)


# -- STDP ------------------------------------------------------------------

P = StdpParams()


def test_stdp_window_examples():
    assert stdp_window(0.0, P) == P.a_plus
    assert stdp_window(P.tau_plus_s, P) == pytest.approx(P.a_plus / math.e, rel=1e-15)
    assert stdp_window(-P.tau_minus_s, P) == pytest.approx(-P.a_minus / math.e, rel=1e-15)


def test_pre_then_post_potentiates():
    s = stdp_on_pre(SynapseState(0.5), 0.0, P)
    s = stdp_on_post(s, 5e-3, P)
    assert s.weight == pytest.approx(0.5 + 0.1 * math.exp(-0.5), rel=1e-14)


def test_post_then_pre_depresses():
    s = stdp_on_post(SynapseState(0.5), 0.0, P)
    s = stdp_on_pre(s, 5e-3, P)
    assert s.weight == pytest.approx(0.5 - 0.1 * math.exp(-0.5), rel=1e-14)


def test_clamp_at_bounds():
    s = stdp_on_post(stdp_on_pre(SynapseState(0.97), 0.0, P), 0.0, P)
    assert s.weight == P.w_max
    s = stdp_on_pre(stdp_on_post(SynapseState(0.02), 0.0, P), 1e-6, P)
    assert s.weight == P.w_min


def test_ordering_errors():
    with pytest.raises(OrderingError):
        stdp_on_pre(SynapseState(0.5, last_pre_s=1.0), 0.5, P)
    with pytest.raises(OrderingError):
        stdp_on_post(SynapseState(0.5, last_post_s=1.0), 0.5, P)


@given(st.lists(st.tuples(st.booleans(), st.floats(0, 0.05)), max_size=60),
       st.floats(0, 1), st.floats(0, 2), st.floats(0, 2))
def test_weight_bounded(events, w0, ap, am):
    p = StdpParams(a_plus=ap, a_minus=am)
    s, t = SynapseState(w0), 0.0
    for is_pre, gap in events:
        t += gap
        s = stdp_on_pre(s, t, p) if is_pre else stdp_on_post(s, t, p)
        if gap > 0:
            s = weight_leak(s, gap, p)
        assert p.w_min <= s.weight <= p.w_max


def test_weight_leak():
    assert P.w_rest == P.w_min
    s = weight_leak(SynapseState(P.w_max), P.tau_retention_s, P)
    assert s.weight == pytest.approx(P.w_min + P.span / math.e, rel=1e-15)
    assert weight_leak(SynapseState(P.w_min), 0.01, P).weight == P.w_min
    one = weight_leak(SynapseState(0.8), 0.02, P).weight
    two = weight_leak(weight_leak(SynapseState(0.8), 0.01, P), 0.01, P).weight
    assert one == pytest.approx(two, rel=1e-12)
    q = StdpParams(w_rest=0.5)
    assert weight_leak(SynapseState(0.5), 0.01, q).weight == 0.5


def test_stdp_param_invariants():
    with pytest.raises(InputError):
        StdpParams(a_plus=-1)
    with pytest.raises(InputError):
        StdpParams(w_min=1, w_max=1)
    with pytest.raises(InputError):
        StdpParams(tau_retention_s=0)
