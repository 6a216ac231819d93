"""Labeled LFP records: CSV ingestion, label/event views and a surrogate generator.

Label codes follow the recording convention 0 = baseline, 1 = interictal,
2 = ictal. Artifacts exist only as synthesis events; their samples carry
label 0 because the label track has no artifact code.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import RecordFormatError, SpecError

BASELINE, INTERICTAL, ICTAL = 0, 1, 2
VALID_LABELS = (BASELINE, INTERICTAL, ICTAL)
EVENT_CLASSES = ("interictal", "ictal", "artifact")
_LABEL_OF_CLASS = {"interictal": INTERICTAL, "ictal": ICTAL}
_CLASS_OF_LABEL = {INTERICTAL: "interictal", ICTAL: "ictal"}

CSV_HEADER = ("time_s", "value_uv", "label")
DEFAULT_SAMPLE_RATE_HZ = 2000.0


@dataclass(frozen=True, eq=False)
class LfpRecord:
    """A uniformly sampled, labeled LFP trace.

    ``samples`` are in microvolts. ``start_s`` is the timestamp of the first
    sample; sample ``i`` sits at ``start_s + i / sample_rate_hz``.
    """

    id: str
    sample_rate_hz: float
    samples: np.ndarray
    labels: np.ndarray
    start_s: float = 0.0

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64)
        labels = np.array(self.labels, dtype=np.int8)
        if samples.ndim != 1 or labels.ndim != 1:
            raise RecordFormatError("samples and labels must be one-dimensional")
        if len(samples) != len(labels):
            raise RecordFormatError(
                f"{len(labels)} labels for {len(samples)} samples")
        if not (self.sample_rate_hz > 0 and math.isfinite(self.sample_rate_hz)):
            raise RecordFormatError(f"sample rate must be positive, got {self.sample_rate_hz}")
        bad = ~np.isin(labels, VALID_LABELS)
        if bad.any():
            raise RecordFormatError(
                f"unknown label code {int(labels[bad][0])} at sample {int(np.argmax(bad))}")
        samples.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))
        object.__setattr__(self, "start_s", float(self.start_s))

    def __len__(self):
        return len(self.samples)

    def __eq__(self, other):
        if not isinstance(other, LfpRecord):
            return NotImplemented
        return (self.id == other.id
                and self.sample_rate_hz == other.sample_rate_hz
                and self.start_s == other.start_s
                and np.array_equal(self.samples, other.samples)
                and np.array_equal(self.labels, other.labels))

    __hash__ = None

    @property
    def times(self) -> np.ndarray:
        return self.start_s + np.arange(len(self.samples)) / self.sample_rate_hz

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz

    def time_of(self, index):
        return self.start_s + index / self.sample_rate_hz

    def index_of(self, t):
        """Nearest sample index for time ``t`` (seconds)."""
        return int(round((t - self.start_s) * self.sample_rate_hz))


@dataclass(frozen=True)
class LabelEvent:
    kind: str
    onset_s: float
    offset_s: float

    def __post_init__(self):
        if self.kind not in EVENT_CLASSES:
            raise ValueError(f"unknown event class {self.kind!r}")
        # A one-sample run has onset == offset.
        if self.offset_s < self.onset_s:
            raise ValueError("event offset precedes onset")

    @property
    def duration_s(self):
        return self.offset_s - self.onset_s

    def contains(self, t):
        return self.onset_s <= t <= self.offset_s


# --------------------------------------------------------------------------
# CSV I/O
# --------------------------------------------------------------------------

def _infer_rate(times: np.ndarray) -> float:
    n = len(times)
    if n < 2:
        raise RecordFormatError("need at least two rows to infer a sample rate")
    dt = (times[-1] - times[0]) / (n - 1)
    if not dt > 0:
        raise RecordFormatError("timestamps must increase")
    expected = times[0] + np.arange(n) * dt
    tol = 1e-9 * np.maximum(np.abs(times), dt)
    dev = np.abs(times - expected)
    bad = dev > tol
    if bad.any():
        i = int(np.argmax(bad))
        raise RecordFormatError(
            f"non-uniform timestamps: row {i + 2} is at {float(times[i])!r}, "
            f"expected {float(expected[i])!r}")
    # The rate is only known to the precision of the rendered timestamps.
    return float(f"{1.0 / dt:.10g}")


def load_record(path, format="csv", record_id=None) -> LfpRecord:
    """Read a ``time_s,value_uv,label`` CSV into an :class:`LfpRecord`."""
    if format != "csv":
        raise RecordFormatError(f"unsupported record format {format!r}")
    path = Path(path)
    times, values, labels = [], [], []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise RecordFormatError("empty file", line=1) from None
        if tuple(h.strip() for h in header) != CSV_HEADER:
            raise RecordFormatError(
                f"expected header {','.join(CSV_HEADER)}, got {','.join(header)}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise RecordFormatError(f"expected 3 fields, got {len(row)}", line=lineno)
            try:
                t, v, lab = float(row[0]), float(row[1]), int(row[2])
            except ValueError as exc:
                raise RecordFormatError(str(exc), line=lineno) from None
            if not (math.isfinite(t) and math.isfinite(v)):
                raise RecordFormatError("non-finite value", line=lineno)
            if lab not in VALID_LABELS:
                raise RecordFormatError(f"unknown label code {lab}", line=lineno)
            times.append(t)
            values.append(v)
            labels.append(lab)
    times = np.asarray(times)
    rate = _infer_rate(times)
    return LfpRecord(id=record_id or path.stem, sample_rate_hz=rate,
                     samples=np.asarray(values), labels=np.asarray(labels),
                     start_s=float(times[0]))


def save_record(record: LfpRecord, path) -> None:
    """Write ``record`` as CSV; values are rendered with 9 significant digits."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(",".join(CSV_HEADER) + "\n")
        for t, v, lab in zip(record.times, record.samples, record.labels):
            fh.write(f"{float(t)!r},{v:.9g},{int(lab)}\n")


# --------------------------------------------------------------------------
# label <-> event views
# --------------------------------------------------------------------------

def _runs(labels: np.ndarray):
    """Yield (value, first_index, last_index) for maximal runs."""
    if len(labels) == 0:
        return
    change = np.flatnonzero(np.diff(labels)) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change, [len(labels)])) - 1
    for s, e in zip(starts, ends):
        yield int(labels[s]), int(s), int(e)


def labels_to_events(record: LfpRecord) -> list[LabelEvent]:
    """Maximal runs of label 1/2 as interictal/ictal events, sorted by onset."""
    return [LabelEvent(_CLASS_OF_LABEL[val], record.time_of(s), record.time_of(e))
            for val, s, e in _runs(record.labels) if val != BASELINE]


def events_to_labels(events: Sequence[LabelEvent], n_samples, sample_rate_hz,
                     start_s=0.0) -> np.ndarray:
    """Rasterize events back to a per-sample label track (artifacts map to 0)."""
    labels = np.zeros(n_samples, dtype=np.int8)
    for ev in events:
        code = _LABEL_OF_CLASS.get(ev.kind, BASELINE)
        i0 = int(round((ev.onset_s - start_s) * sample_rate_hz))
        i1 = int(round((ev.offset_s - start_s) * sample_rate_hz))
        labels[max(i0, 0):min(i1, n_samples - 1) + 1] = code
    return labels


# --------------------------------------------------------------------------
# surrogate generator
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SynthEvent:
    kind: str
    onset_s: float
    duration_s: float
    amplitude_uv: float
    intra_burst_hz: float = 10.0

    def __post_init__(self):
        if self.kind not in EVENT_CLASSES:
            raise SpecError(f"unknown event class {self.kind!r}")
        if not self.duration_s > 0:
            raise SpecError("event duration must be positive")
        if self.kind == "interictal" and self.duration_s > 0.1:
            raise SpecError("interictal transients last at most 100 ms")
        if self.kind == "ictal" and not self.intra_burst_hz > 0:
            raise SpecError("ictal events need a positive intra-burst frequency")

    @property
    def offset_s(self):
        return self.onset_s + self.duration_s


@dataclass(frozen=True)
class SynthSpec:
    duration_s: float = 100.0
    baseline_noise_uv: float = 10.0
    events: tuple = ()
    seed: int = 0
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ
    record_id: str = "synth"

    def __post_init__(self):
        evs = tuple(e if isinstance(e, SynthEvent) else SynthEvent(**e) for e in self.events)
        object.__setattr__(self, "events", evs)
        if not self.duration_s > 0:
            raise SpecError("duration must be positive")
        if self.baseline_noise_uv < 0:
            raise SpecError("baseline noise must be non-negative")
        if not self.sample_rate_hz > 0:
            raise SpecError("sample rate must be positive")
        for ev in evs:
            if ev.onset_s < 0 or ev.offset_s > self.duration_s:
                raise SpecError(
                    f"{ev.kind} event [{ev.onset_s}, {ev.offset_s}] s lies outside "
                    f"[0, {self.duration_s}] s")
        ordered = sorted(evs, key=lambda e: e.onset_s)
        for prev, nxt in zip(ordered, ordered[1:]):
            if nxt.onset_s <= prev.offset_s:
                raise SpecError(
                    f"overlapping events: {prev.kind} at {prev.onset_s} s and "
                    f"{nxt.kind} at {nxt.onset_s} s")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["events"] = tuple(SynthEvent(**e) for e in d.get("events", ()))
        try:
            return cls(**d)
        except TypeError as exc:
            raise SpecError(str(exc)) from None


DISCHARGE_RISE_S = 2e-3
DISCHARGE_DECAY_S = 10e-3


def _discharge(t):
    """Unit-peak sharp discharge kernel (difference of exponentials), zero for t < 0."""
    r, d = DISCHARGE_RISE_S, DISCHARGE_DECAY_S
    t_pk = r * d / (d - r) * np.log(d / r)
    norm = np.exp(-t_pk / d) - np.exp(-t_pk / r)
    tt = np.maximum(t, 0.0)
    return np.where(t >= 0, (np.exp(-tt / d) - np.exp(-tt / r)) / norm, 0.0)


def _ictal_waveform(n, rate, ev, rng):
    """Train of sharp negative discharges riding on a slow wave.

    Discharges start at the event onset and recur at ``intra_burst_hz``,
    slowing fourfold by the end of the event (tonic -> clonic).
    """
    t = np.arange(n) / rate
    T = ev.duration_s
    wave = np.zeros(n)
    onsets = []
    tk = 0.0
    while tk < T:
        onsets.append(tk)
        tk += 1.0 / (ev.intra_burst_hz * 0.25 ** (tk / T))
    for tk in onsets:
        i0 = int(round(tk * rate))
        seg = slice(i0, min(n, i0 + int(0.1 * rate)))
        amp = rng.uniform(0.7, 1.3)
        wave[seg] -= amp * _discharge(t[seg] - t[i0])
    phase = 2 * np.pi * np.cumsum(ev.intra_burst_hz * 0.25 ** (t / T)) / rate
    wave += 0.25 * (1 - np.cos(phase - phase[0]))
    return ev.amplitude_uv * wave


def _interictal_waveform(n, rate, ev):
    """Sharp negative spike followed by a slower positive wave."""
    t = np.arange(n) / rate
    x = t / max(t[-1], 1e-12)
    slow = 0.3 * np.sin(np.pi * x) ** 2
    return ev.amplitude_uv * (slow - _discharge(t))


def synthesize(spec: SynthSpec) -> LfpRecord:
    """Build a labeled surrogate recording; a pure function of ``spec``."""
    rate = spec.sample_rate_hz
    n = int(round(spec.duration_s * rate))
    rng = np.random.default_rng(spec.seed)
    samples = (rng.normal(0.0, spec.baseline_noise_uv, size=n)
               if spec.baseline_noise_uv > 0 else np.zeros(n))
    labels = np.zeros(n, dtype=np.int8)
    for ev in sorted(spec.events, key=lambda e: e.onset_s):
        i0 = int(round(ev.onset_s * rate))
        i1 = min(int(round(ev.offset_s * rate)), n - 1)
        m = i1 - i0 + 1
        if ev.kind == "ictal":
            samples[i0:i1 + 1] += _ictal_waveform(m, rate, ev, rng)
        elif ev.kind == "interictal":
            samples[i0:i1 + 1] += _interictal_waveform(m, rate, ev)
        else:
            samples[i0:i1 + 1] += ev.amplitude_uv
        if ev.kind in _LABEL_OF_CLASS:
            labels[i0:i1 + 1] = _LABEL_OF_CLASS[ev.kind]
    return LfpRecord(id=spec.record_id, sample_rate_hz=rate, samples=samples, labels=labels)


def surrogate_spec(seed, n_interictal=None) -> SynthSpec:
    """One record of the standard surrogate set.

    A 100 s trace with one ictal event (onset 20-60 s, 8-20 s long, 300-600 uV,
    8-16 Hz discharges) over 5-20 uV noise. Odd seeds (or ``n_interictal``)
    add interictal transients 10 s before and 8 s after the seizure.
    """
    rng = np.random.default_rng([1000, seed])
    noise = float(rng.uniform(5, 20))
    onset = float(rng.uniform(20, 60))
    dur = float(rng.uniform(8, 20))
    events = [SynthEvent("ictal", onset, dur, float(rng.uniform(300, 600)),
                         float(rng.uniform(8, 16)))]
    if n_interictal is None:
        n_interictal = 2 if seed % 2 else 0
    for t in (onset - 10.0, onset + dur + 8.0)[:n_interictal]:
        events.append(SynthEvent("interictal", t, 0.08, float(rng.uniform(150, 300))))
    return SynthSpec(100.0, noise, tuple(events), seed, record_id=f"surrogate{seed:02d}")
