"""The 10-10-10 feed-forward network: topology, device mismatch and simulation.

Neurons are numbered globally: 0-9 input layer, 10-19 hidden layer, 20-29
output layer. UP spikes drive input neurons 0-4 and DW spikes drive 5-9, each
through a static-weight EPSC. Input->hidden and hidden->output synapses are
plastic.

Every time step runs in phases, and every phase reads only state written by
earlier phases (or the previous step):

1. deliver pre-synaptic events binned to this step (external inputs, and
   neuron spikes from the previous step) into the EPSC filters;
2. decay all EPSC filters by one step;
3. integrate every neuron with the summed, gain-scaled EPSC current;
4. apply STDP per synapse to this step's pre/post spikes in time order;
5. relax plastic weights toward their resting value.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numba
import numpy as np
from numba.typed import List

from .dynamics import (MAX_DT_MS, EpscParams, NeuronParams, StdpParams, izhikevich_advance,
                       resting_point, stdp_delta)
from .encoding import DW, UP, SpikeTrain
from .errors import ConfigError, InputError, NumericError

N_PER_LAYER = 10
N_NEURONS = 3 * N_PER_LAYER
LAYERS = ("input", "hidden", "output")
SCHEMA_VERSION = 1

NEURON_KEYS = ("a", "b", "c", "d", "v_peak")
EPSC_KEYS = ("peak_per_unit_weight", "tau_decay_s")
STDP_KEYS = ("a_plus", "a_minus", "tau_plus_s", "tau_minus_s", "tau_retention_s")
MISMATCH_KEYS = NEURON_KEYS + EPSC_KEYS + STDP_KEYS
MAX_REDRAWS = 1000


def neuron_name(idx):
    layer, i = divmod(int(idx), N_PER_LAYER)
    return f"{('in', 'hid', 'out')[layer]}{i}"


# --------------------------------------------------------------------------
# topology
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Topology:
    n_per_layer: int
    hidden_edges: tuple    # (input i, hidden j) pairs
    output_edges: tuple    # (hidden j, output j) pairs

    @property
    def input_channel(self):
        """Channel driving each input neuron."""
        half = self.n_per_layer // 2
        return tuple(UP if i < half else DW for i in range(self.n_per_layer))

    def check(self):
        n = self.n_per_layer
        out_deg = np.bincount([i for i, _ in self.hidden_edges], minlength=n)
        in_deg = np.bincount([j for _, j in self.hidden_edges], minlength=n)
        if len(set(self.hidden_edges)) != len(self.hidden_edges):
            raise ConfigError("duplicate input->hidden edge")
        if not (np.all(out_deg == 2) and np.all(in_deg == 2)):
            raise ConfigError("input->hidden wiring must be 2-regular")
        if sorted(self.output_edges) != [(j, j) for j in range(n)]:
            raise ConfigError("hidden->output wiring must be one-to-one")


def build_topology(seed=0, n_per_layer=N_PER_LAYER) -> Topology:
    """Seed 0 gives the ring wiring ``i -> i, i+1``; other seeds draw a uniform
    simple 2-regular bipartite wiring by rejection from the configuration model."""
    n = n_per_layer
    if seed == 0:
        edges = [(i, j) for i in range(n) for j in (i, (i + 1) % n)]
    else:
        rng = np.random.default_rng(seed)
        stubs = np.repeat(np.arange(n), 2)
        while True:
            partner = rng.permutation(stubs)
            edges = list(zip(stubs.tolist(), partner.tolist()))
            if len(set(edges)) == len(edges):
                break
        edges.sort()
    topo = Topology(n, tuple(edges), tuple((j, j) for j in range(n)))
    topo.check()
    return topo


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MismatchSpec:
    relative_sigma: Mapping[str, float] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        sig = dict(self.relative_sigma)
        for k, v in sig.items():
            if k not in MISMATCH_KEYS:
                raise ConfigError(f"unknown mismatch parameter {k!r}")
            if not v >= 0:
                raise ConfigError(f"mismatch sigma for {k} must be non-negative")
        object.__setattr__(self, "relative_sigma", sig)

    @classmethod
    def uniform(cls, sigma, seed=0, keys=MISMATCH_KEYS):
        return cls({k: sigma for k in keys}, seed)


# A weak static input weight makes input neurons integrate several encoder
# spikes before firing; the stronger resting weights of the plastic stages let
# hidden and output neurons relay the spikes that do get through.
DEFAULT_STDP_HIDDEN = StdpParams(a_plus=0.1, a_minus=0.1, w_rest=0.5)
DEFAULT_STDP_OUTPUT = StdpParams(a_plus=0.1, a_minus=0.1, w_rest=0.9)


@dataclass(frozen=True)
class NetworkConfig:
    input_neuron: NeuronParams = NeuronParams()
    hidden_neuron: NeuronParams = NeuronParams()
    output_neuron: NeuronParams = NeuronParams()
    epsc: EpscParams = EpscParams()
    stdp_hidden: StdpParams = DEFAULT_STDP_HIDDEN
    stdp_output: StdpParams = DEFAULT_STDP_OUTPUT
    static_input_weight: float = 0.1
    initial_weight: Optional[float] = None
    epsc_to_model_gain: float = 10.0 / EpscParams().peak_per_unit_weight
    dt_ms: float = 0.1
    mismatch: MismatchSpec = MismatchSpec()
    topology_seed: int = 0

    def __post_init__(self):
        if not 0 <= self.static_input_weight <= 1:
            raise ConfigError("static_input_weight must lie in [0, 1]")
        if not self.epsc_to_model_gain > 0:
            raise ConfigError("epsc_to_model_gain must be positive")
        if not 0 < self.dt_ms <= MAX_DT_MS:
            raise ConfigError(f"dt_ms must lie in (0, {MAX_DT_MS}]")
        for st in (self.stdp_hidden, self.stdp_output):
            w0 = self.initial_weight if self.initial_weight is not None else st.w_rest
            if not st.w_min <= w0 <= st.w_max:
                raise ConfigError("initial_weight outside the STDP weight bounds")

    def neuron_params(self, layer) -> NeuronParams:
        return (self.input_neuron, self.hidden_neuron, self.output_neuron)[layer]

    def with_gain(self, gain) -> "NetworkConfig":
        return replace(self, epsc_to_model_gain=float(gain))

    # -- serialization ----------------------------------------------------
    def to_dict(self):
        d = {"schema_version": SCHEMA_VERSION}
        for f in fields(self):
            val = getattr(self, f.name)
            if f.name == "mismatch":
                val = {"relative_sigma": dict(sorted(val.relative_sigma.items())), "seed": val.seed}
            elif hasattr(val, "__dataclass_fields__"):
                val = asdict(val)
            d[f.name] = val
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        version = d.pop("schema_version", None)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported config schema_version {version!r}")
        types = {"input_neuron": NeuronParams, "hidden_neuron": NeuronParams,
                 "output_neuron": NeuronParams, "epsc": EpscParams,
                 "stdp_hidden": StdpParams, "stdp_output": StdpParams,
                 "mismatch": MismatchSpec}
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        kwargs = {}
        try:
            for k, v in d.items():
                kwargs[k] = types[k](**v) if k in types else v
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None


def save_config(config: NetworkConfig, path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2) + "\n")


def load_config(path) -> NetworkConfig:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return NetworkConfig.from_dict(d)


# --------------------------------------------------------------------------
# mismatch
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ParameterTables:
    """Per-instance parameters after mismatch.

    ``neurons`` has one row per neuron and columns :data:`NEURON_KEYS`;
    ``synapses`` maps each of :data:`EPSC_KEYS` and :data:`STDP_KEYS` to an
    array over synapses (STDP entries of static synapses stay nominal).
    """

    neurons: np.ndarray
    synapses: dict

    def __eq__(self, other):
        return (np.array_equal(self.neurons, other.neurons)
                and self.synapses.keys() == other.synapses.keys()
                and all(np.array_equal(v, other.synapses[k]) for k, v in self.synapses.items()))


_NEURON_STREAM, _SYNAPSE_STREAM = 0, 1


def _draw(rng, nominal, sigma, valid, what):
    if sigma == 0:
        return nominal
    for _ in range(MAX_REDRAWS):
        x = nominal * (1.0 + sigma * rng.standard_normal())
        if (nominal == 0 or np.sign(x) == np.sign(nominal)) and valid(x):
            return x
    raise ConfigError(f"mismatch on {what} rejected {MAX_REDRAWS} draws; sigma too large")


def _always(x):
    return True


def synapse_layout(topology: Topology):
    """(pre, post, stage) per synapse; pre is -1 for UP, -2 for DW inputs.
    Stage 0 = static input, 1 = input->hidden, 2 = hidden->output."""
    n = topology.n_per_layer
    pre, post, stage = [], [], []
    for i, ch in enumerate(topology.input_channel):
        pre.append(-1 if ch == UP else -2)
        post.append(i)
        stage.append(0)
    for i, j in topology.hidden_edges:
        pre.append(i)
        post.append(n + j)
        stage.append(1)
    for j, k in topology.output_edges:
        pre.append(n + j)
        post.append(2 * n + k)
        stage.append(2)
    return np.array(pre), np.array(post), np.array(stage)


def apply_mismatch(config: NetworkConfig, topology: Optional[Topology] = None) -> ParameterTables:
    """Draw ``nominal * (1 + N(0, sigma))`` per instance and parameter.

    Each neuron and synapse uses its own generator seeded by
    ``(mismatch.seed, kind, instance id)``, so tables are reproducible and a
    parameter's draw does not depend on other instances.
    """
    topology = topology or build_topology(config.topology_seed)
    sig = config.mismatch.relative_sigma
    seed = config.mismatch.seed
    n = topology.n_per_layer
    neurons = np.empty((3 * n, len(NEURON_KEYS)))
    for idx in range(3 * n):
        p = config.neuron_params(idx // n)
        rng = np.random.default_rng([seed, _NEURON_STREAM, idx])
        vp = _draw(rng, p.v_peak, sig.get("v_peak", 0.0), _always, f"{neuron_name(idx)}.v_peak")
        row = {
            "a": _draw(rng, p.a, sig.get("a", 0.0), lambda x: x > 0, f"{neuron_name(idx)}.a"),
            "b": _draw(rng, p.b, sig.get("b", 0.0), _always, f"{neuron_name(idx)}.b"),
            "c": _draw(rng, p.c, sig.get("c", 0.0), lambda x: x < vp, f"{neuron_name(idx)}.c"),
            "d": _draw(rng, p.d, sig.get("d", 0.0), _always, f"{neuron_name(idx)}.d"),
            "v_peak": vp,
        }
        neurons[idx] = [row[k] for k in NEURON_KEYS]

    _, _, stage = synapse_layout(topology)
    syn = {k: np.empty(len(stage)) for k in EPSC_KEYS + STDP_KEYS}
    for s, st in enumerate(stage):
        rng = np.random.default_rng([seed, _SYNAPSE_STREAM, s])
        for k in EPSC_KEYS:
            syn[k][s] = _draw(rng, getattr(config.epsc, k), sig.get(k, 0.0),
                              lambda x: x > 0, f"synapse{s}.{k}")
        stdp = config.stdp_hidden if st == 1 else config.stdp_output
        for k in STDP_KEYS:
            nominal = getattr(stdp, k)
            syn[k][s] = (nominal if st == 0 else
                         _draw(rng, nominal, sig.get(k, 0.0), lambda x: x >= 0,
                               f"synapse{s}.{k}"))
    return ParameterTables(neurons, syn)


# --------------------------------------------------------------------------
# simulation
# --------------------------------------------------------------------------

@dataclass(eq=False)
class SimulationResult:
    output_trains: list
    hidden_trains: list
    input_trains: list
    traces: dict
    final_weights: np.ndarray
    duration_s: float
    dt_ms: float
    wall_time_s: float = 0.0

    def trains(self):
        return self.input_trains + self.hidden_trains + self.output_trains

    def same_spikes(self, other) -> bool:
        return (all(a == b for a, b in zip(self.trains(), other.trains()))
                and np.array_equal(self.final_weights, other.final_weights)
                and self.traces.keys() == other.traces.keys()
                and all(np.array_equal(v, other.traces[k]) for k, v in self.traces.items()))


def n_steps(duration_s, dt_ms):
    x = duration_s * 1000.0 / dt_ms
    return int(math.floor(x + 1e-9))


def _bin(times_s, dt_ms, n):
    steps = np.floor(np.asarray(times_s) * 1000.0 / dt_ms + 1e-9).astype(np.int64)
    return np.ascontiguousarray(steps[(steps >= 0) & (steps < n)])


def _csr(groups, n):
    ptr = np.zeros(n + 1, dtype=np.int64)
    for g, _ in groups:
        ptr[g + 1] += 1
    ptr = np.cumsum(ptr)
    idx = np.empty(ptr[-1], dtype=np.int64)
    fill = ptr[:-1].copy()
    for g, s in groups:
        idx[fill[g]] = s
        fill[g] += 1
    return ptr, idx


@numba.njit(cache=True, inline="always")
def _clip(s, weight, w_min, w_max):
    if weight[s] < w_min[s]:
        weight[s] = w_min[s]
    elif weight[s] > w_max[s]:
        weight[s] = w_max[s]


@numba.njit(cache=True)
def _stdp_pre(s, t, weight, last_pre, last_post, a_plus, a_minus, tau_plus, tau_minus,
              w_min, w_max):
    if not np.isnan(last_post[s]):
        weight[s] += stdp_delta(-(t - last_post[s]), a_plus[s], a_minus[s], tau_plus[s],
                                tau_minus[s]) * (w_max[s] - w_min[s])
        _clip(s, weight, w_min, w_max)
    last_pre[s] = t


@numba.njit(cache=True)
def _stdp_post(s, t, weight, last_pre, last_post, a_plus, a_minus, tau_plus, tau_minus,
               w_min, w_max):
    if not np.isnan(last_pre[s]):
        weight[s] += stdp_delta(t - last_pre[s], a_plus[s], a_minus[s], tau_plus[s],
                                tau_minus[s]) * (w_max[s] - w_min[s])
        _clip(s, weight, w_min, w_max)
    last_post[s] = t


@numba.njit(cache=True)
def _simulate_kernel(na, nb, nc, nd, nvp,
                     syn_pre, syn_post, syn_plastic, weight, peak, decay,
                     a_plus, a_minus, tau_plus, tau_minus, w_min, w_max, w_rest, leak,
                     in_ptr, in_idx, up_steps, dw_steps, gain, dt_ms, n, epsc_max,
                     order, probe, traces, spike_ids, spike_times, v0, u0):
    n_neu = len(na)
    n_syn = len(syn_pre)
    v = v0.copy()
    u = u0.copy()
    current = np.zeros(n_syn)
    fired_prev = np.zeros(n_neu, dtype=np.bool_)
    fired = np.zeros(n_neu, dtype=np.bool_)
    t_spike = np.zeros(n_neu)
    last_pre = np.full(n_syn, np.nan)
    last_post = np.full(n_syn, np.nan)
    dt_s = dt_ms * 1e-3
    pu = 0
    pd = 0
    for p in range(len(probe)):
        traces[p, 0] = v[probe[p]]
    for k in range(n):
        # 1. deliver pre-synaptic events of this step
        n_up = 0
        while pu < len(up_steps) and up_steps[pu] == k:
            n_up += 1
            pu += 1
        n_dw = 0
        while pd < len(dw_steps) and dw_steps[pd] == k:
            n_dw += 1
            pd += 1
        for s in range(n_syn):
            pre = syn_pre[s]
            if pre == -1:
                cnt = n_up
            elif pre == -2:
                cnt = n_dw
            else:
                cnt = 1 if fired_prev[pre] else 0
            if cnt > 0:
                wn = (weight[s] - w_min[s]) / (w_max[s] - w_min[s])
                c = current[s] + cnt * wn * peak[s]
                current[s] = c if c < epsc_max else epsc_max
        # 2. decay EPSC filters
        for s in range(n_syn):
            current[s] *= decay[s]
        # 3. neurons, in the requested order; each reads only its own inputs
        for oi in range(n_neu):
            i = order[oi]
            i_syn = 0.0
            for q in range(in_ptr[i], in_ptr[i + 1]):
                i_syn += current[in_idx[q]]
            vi, ui, frac = izhikevich_advance(v[i], u[i], na[i], nb[i], nc[i], nd[i], nvp[i],
                                              gain * i_syn, dt_ms)
            if not (np.isfinite(vi) and np.isfinite(ui)):
                return 1, i, k
            v[i] = vi
            u[i] = ui
            fired[i] = frac > 0.0
            if frac > 0.0:
                t_spike[i] = (k + frac) * dt_s
        for i in range(n_neu):
            if fired[i]:
                spike_ids.append(i)
                spike_times.append(t_spike[i])
        # 4. STDP, per synapse, events in chronological order (pre first on ties)
        for s in range(n_syn):
            if not syn_plastic[s]:
                continue
            pre = syn_pre[s]
            post = syn_post[s]
            has_pre = fired[pre]
            has_post = fired[post]
            if not (has_pre or has_post):
                continue
            if has_pre and has_post and t_spike[post] < t_spike[pre]:
                _stdp_post(s, t_spike[post], weight, last_pre, last_post, a_plus, a_minus,
                           tau_plus, tau_minus, w_min, w_max)
                _stdp_pre(s, t_spike[pre], weight, last_pre, last_post, a_plus, a_minus,
                          tau_plus, tau_minus, w_min, w_max)
            else:
                if has_pre:
                    _stdp_pre(s, t_spike[pre], weight, last_pre, last_post, a_plus, a_minus,
                              tau_plus, tau_minus, w_min, w_max)
                if has_post:
                    _stdp_post(s, t_spike[post], weight, last_pre, last_post, a_plus, a_minus,
                               tau_plus, tau_minus, w_min, w_max)
        # 5. volatile weights relax toward rest
        for s in range(n_syn):
            if syn_plastic[s]:
                weight[s] = w_rest[s] + (weight[s] - w_rest[s]) * leak[s]
        for i in range(n_neu):
            fired_prev[i] = fired[i]
        for p in range(len(probe)):
            traces[p, k + 1] = v[probe[p]]
    return 0, -1, -1


def simulate(config: NetworkConfig, up: SpikeTrain, dw: SpikeTrain, duration_s,
             probe: Iterable[int] = (), order: Optional[Sequence[int]] = None,
             tables: Optional[ParameterTables] = None,
             topology: Optional[Topology] = None) -> SimulationResult:
    """Run the network on UP/DW input trains for ``duration_s`` seconds.

    ``probe`` lists neuron ids whose membrane voltage is recorded at every
    step (``n_steps + 1`` samples, starting with the initial state).
    ``order`` permutes the within-step neuron update order; results do not
    depend on it.
    """
    t_start = time.perf_counter()
    topology = topology or build_topology(config.topology_seed)
    tables = tables or apply_mismatch(config, topology)
    n_neu = 3 * topology.n_per_layer
    probe = np.array(sorted(set(int(p) for p in probe)), dtype=np.int64)
    if len(probe) and (probe.min() < 0 or probe.max() >= n_neu):
        raise InputError(f"probe ids must lie in [0, {n_neu - 1}]")
    if order is None:
        order = np.arange(n_neu)
    order = np.asarray(order, dtype=np.int64)
    if sorted(order.tolist()) != list(range(n_neu)):
        raise InputError("order must be a permutation of the neuron ids")
    for tr in (up, dw):
        if len(tr) and (tr.times_s[0] < 0 or tr.times_s[-1] > duration_s):
            raise InputError(f"{tr.channel} spikes fall outside [0, {duration_s}] s")

    dt_ms = config.dt_ms
    n = n_steps(duration_s, dt_ms)
    dt_s = dt_ms * 1e-3
    pre, post, stage = synapse_layout(topology)
    syn = tables.synapses
    stdp_of = [config.stdp_output, config.stdp_hidden, config.stdp_output]
    w_min = np.array([stdp_of[s].w_min if s else 0.0 for s in stage])
    w_max = np.array([stdp_of[s].w_max if s else 1.0 for s in stage])
    w_rest = np.array([stdp_of[s].w_rest if s else 0.0 for s in stage])
    weight = np.array([
        config.static_input_weight if s == 0
        else (config.initial_weight if config.initial_weight is not None else stdp_of[s].w_rest)
        for s in stage], dtype=np.float64)
    in_ptr, in_idx = _csr([(int(p), s) for s, p in enumerate(post)], n_neu)
    traces = np.zeros((len(probe), n + 1))
    spike_ids = List.empty_list(numba.int64)
    spike_times = List.empty_list(numba.float64)
    nt = tables.neurons
    # every neuron starts at rest
    v0, u0 = resting_point(nt[:, 1], nt[:, 2])
    status, bad_neuron, bad_step = _simulate_kernel(
        np.ascontiguousarray(nt[:, 0]), np.ascontiguousarray(nt[:, 1]),
        np.ascontiguousarray(nt[:, 2]), np.ascontiguousarray(nt[:, 3]),
        np.ascontiguousarray(nt[:, 4]),
        pre, post, stage > 0, weight, syn["peak_per_unit_weight"],
        np.exp(-dt_s / syn["tau_decay_s"]),
        syn["a_plus"], syn["a_minus"], syn["tau_plus_s"], syn["tau_minus_s"],
        w_min, w_max, w_rest, np.exp(-dt_s / syn["tau_retention_s"]),
        in_ptr, in_idx, _bin(up.times_s, dt_ms, n), _bin(dw.times_s, dt_ms, n),
        float(config.epsc_to_model_gain), float(dt_ms), n,
        float(config.epsc.epsc_max) if config.epsc.epsc_max is not None else np.inf,
        order, probe, traces, spike_ids, spike_times, v0, u0)
    if status:
        raise NumericError(
            f"non-finite state in neuron {neuron_name(bad_neuron)} at "
            f"t={bad_step * dt_s:.6f} s")
    ids = np.fromiter(spike_ids, dtype=np.int64, count=len(spike_ids))
    ts = np.fromiter(spike_times, dtype=np.float64, count=len(spike_times))
    trains = [SpikeTrain(neuron_name(i), ts[ids == i]) for i in range(n_neu)]
    m = topology.n_per_layer
    return SimulationResult(
        output_trains=trains[2 * m:], hidden_trains=trains[m:2 * m], input_trains=trains[:m],
        traces={int(p): traces[j] for j, p in enumerate(probe)}, final_weights=weight,
        duration_s=float(duration_s), dt_ms=dt_ms,
        wall_time_s=time.perf_counter() - t_start)


def probe(config: NetworkConfig, up: SpikeTrain, dw: SpikeTrain, duration_s, neuron_ids,
          **kwargs):
    """Simulate and return ``(traces, result)`` for the requested neurons."""
    ids = list(neuron_ids)
    result = simulate(config, up, dw, duration_s, probe=ids, **kwargs)
    return {i: result.traces[int(i)] for i in ids}, result
