"""Scoring of network outputs against a label track.

Output spikes are point events, so delays and inter-spike intervals use spike
times directly (scope measurements use half-maximum edge crossings; the
difference is bounded by one pulse width).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .encoding import SpikeTrain
from .errors import InputError
from .signals import BASELINE, LabelEvent, LfpRecord, labels_to_events

UNDETECTED = "Undetected"


def _select(outputs: Sequence[SpikeTrain], mask):
    if mask is None:
        return list(range(len(outputs)))
    idx = sorted(set(int(m) for m in mask))
    if idx and (idx[0] < 0 or idx[-1] >= len(outputs)):
        raise InputError(f"channel mask {idx} out of range for {len(outputs)} channels")
    return idx


# --------------------------------------------------------------------------
# precision
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PrecisionResult:
    value: Optional[float]
    tp: int
    fp: int


def spike_labels(train: SpikeTrain, record: LfpRecord) -> np.ndarray:
    """Label of the sample nearest to each spike."""
    idx = np.round((train.times_s - record.start_s) * record.sample_rate_hz).astype(np.int64)
    if len(idx) and (idx[0] < 0 or idx[-1] >= len(record)):
        raise InputError(f"spikes of {train.channel} fall outside the label track")
    return record.labels[idx]


def precision(outputs: Sequence[SpikeTrain], record: LfpRecord, mask=None) -> PrecisionResult:
    """TP / (TP + FP) over spikes pooled from the masked-in channels.

    A spike is a true positive when the label at its time is interictal or
    ictal. With no spikes at all the value is ``None``.
    """
    tp = fp = 0
    for i in _select(outputs, mask):
        lab = spike_labels(outputs[i], record)
        fp += int(np.count_nonzero(lab == BASELINE))
        tp += int(np.count_nonzero(lab != BASELINE))
    total = tp + fp
    return PrecisionResult(tp / total if total else None, tp, fp)


# --------------------------------------------------------------------------
# detection delay
# --------------------------------------------------------------------------

def _check_events(events: Sequence[LabelEvent]):
    for a, b in zip(events, events[1:]):
        if b.onset_s < a.onset_s:
            raise InputError("events must be sorted by onset")
        if b.onset_s <= a.offset_s:
            raise InputError(f"overlapping events at {a.onset_s} s and {b.onset_s} s")


@dataclass(frozen=True)
class DelayTable:
    """Per-event, per-channel detection delays in ms (``None`` = undetected)."""

    kind: str
    channels: tuple
    events: tuple
    rows: tuple

    def channel_means(self):
        """Mean delay per channel over the events it detected."""
        out = []
        for c in range(len(self.channels)):
            vals = [r[c] for r in self.rows if r[c] is not None]
            out.append(float(np.mean(vals)) if vals else None)
        return out


def detection_delay(outputs: Sequence[SpikeTrain], events: Sequence[LabelEvent], kind,
                    mask=None) -> DelayTable:
    """Delay from each event onset to the first spike inside [onset, offset]."""
    _check_events(list(events))
    chans = _select(outputs, mask)
    sel = [e for e in events if e.kind == kind]
    rows = []
    for ev in sel:
        row = []
        for c in chans:
            w = outputs[c].window(ev.onset_s, ev.offset_s)
            row.append(float((w[0] - ev.onset_s) * 1e3) if len(w) else None)
        rows.append(tuple(row))
    return DelayTable(kind, tuple(outputs[c].channel for c in chans), tuple(sel), tuple(rows))


@dataclass(frozen=True)
class Stat:
    mean: float
    sd: float
    n: int


@dataclass(frozen=True)
class DelayStats:
    per_channel: tuple
    overall: Optional[Stat]


def _stat(values):
    if not values:
        return None
    v = np.asarray(values, dtype=np.float64)
    # population SD; a single value has sd 0
    return Stat(float(v.mean()), float(v.std()), len(v))


def aggregate_delays(rows) -> DelayStats:
    """Mean and population SD per channel and pooled, over detected entries.

    ``rows`` is a :class:`DelayTable` or a sequence of per-channel rows (for a
    dataset, one row per record holding that record's channel means).
    """
    if isinstance(rows, DelayTable):
        rows = rows.rows
    rows = [tuple(r) for r in rows]
    n_ch = len(rows[0]) if rows else 0
    per = tuple(_stat([r[c] for r in rows if r[c] is not None]) for c in range(n_ch))
    pooled = [x for r in rows for x in r if x is not None]
    return DelayStats(per, _stat(pooled))


# --------------------------------------------------------------------------
# ISI and spike counts
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class IsiResult:
    per_channel: tuple
    mean_ms: Optional[float]
    degenerate: bool


def first_pair_isi(outputs: Sequence[SpikeTrain], event: LabelEvent, mask=None) -> IsiResult:
    """Interval between the first two spikes inside the event, per channel,
    and its mean over channels that have one."""
    per = []
    for c in _select(outputs, mask):
        w = outputs[c].window(event.onset_s, event.offset_s)
        per.append(float((w[1] - w[0]) * 1e3) if len(w) >= 2 else None)
    vals = [x for x in per if x is not None]
    return IsiResult(tuple(per), float(np.mean(vals)) if vals else None,
                     any(x == 0 for x in vals))


def event_spike_count(outputs: Sequence[SpikeTrain], event: LabelEvent, mask=None):
    """Spikes inside [onset, offset] per masked-in channel."""
    return [len(outputs[c].window(event.onset_s, event.offset_s)) for c in _select(outputs, mask)]


@dataclass(frozen=True)
class CountSummary:
    median: float
    q1: float
    q3: float

    @property
    def iqr(self):
        return self.q3 - self.q1


def count_summary(counts) -> CountSummary:
    """Median and quartiles with linear-interpolation quantiles."""
    x = np.asarray(counts, dtype=np.float64)
    if len(x) == 0:
        raise InputError("no counts to summarize")
    q1, med, q3 = np.quantile(x, [0.25, 0.5, 0.75], method="linear")
    return CountSummary(float(med), float(q1), float(q3))


# --------------------------------------------------------------------------
# classifier
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassifierThresholds:
    ictal_min_count: int = 100
    artifact_min_isi_ms: float = 200.0

    def __post_init__(self):
        if not self.ictal_min_count > 0 or not self.artifact_min_isi_ms > 0:
            raise InputError("classifier thresholds must be positive")


def classify_event(count, isi_ms, thresholds: ClassifierThresholds = ClassifierThresholds()):
    """Ictal by spike count, artifact by a long first-pair ISI, else interictal."""
    if count >= thresholds.ictal_min_count:
        return "ictal"
    if isi_ms is not None and isi_ms >= thresholds.artifact_min_isi_ms:
        return "artifact"
    return "interictal"


# --------------------------------------------------------------------------
# report
# --------------------------------------------------------------------------

@dataclass
class EventReport:
    kind: str
    onset_s: float
    offset_s: float
    delay_ms: list
    spike_count: list
    isi_ms: list
    isi_mean_ms: Optional[float]
    total_count: int
    predicted: str


@dataclass
class DetectionReport:
    record_id: str
    channels: list
    channel_mask: list
    precision: Optional[float]
    tp: int
    fp: int
    events: list
    delay_means: dict = field(default_factory=dict)   # kind -> per-channel mean (ms)
    delay_stats: dict = field(default_factory=dict)   # kind -> DelayStats as dict

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def evaluate(outputs: Sequence[SpikeTrain], record: LfpRecord, mask=None,
             thresholds: ClassifierThresholds = ClassifierThresholds(),
             events: Optional[Sequence[LabelEvent]] = None) -> DetectionReport:
    """Full scoring of one record: precision, delays, ISIs, counts and classes."""
    chans = _select(outputs, mask)
    events = list(events) if events is not None else labels_to_events(record)
    prec = precision(outputs, record, chans)
    ev_reports = []
    tables = {k: detection_delay(outputs, events, k, chans) for k in ("ictal", "interictal")}
    delay_of = {}
    for k, tab in tables.items():
        for ev, row in zip(tab.events, tab.rows):
            delay_of[id(ev)] = list(row)
    for ev in events:
        counts = event_spike_count(outputs, ev, chans)
        isi = first_pair_isi(outputs, ev, chans)
        total = int(sum(counts))
        ev_reports.append(EventReport(
            ev.kind, ev.onset_s, ev.offset_s, delay_of.get(id(ev), [None] * len(chans)),
            counts, list(isi.per_channel), isi.mean_ms, total,
            classify_event(total, isi.mean_ms, thresholds)))
    return DetectionReport(
        record_id=record.id, channels=[outputs[c].channel for c in chans],
        channel_mask=chans, precision=prec.value, tp=prec.tp, fp=prec.fp,
        events=ev_reports,
        delay_means={k: t.channel_means() for k, t in tables.items() if t.rows},
        delay_stats={k: asdict(aggregate_delays(t)) for k, t in tables.items() if t.rows})


def _fmt(x, star=False):
    if x is None:
        return UNDETECTED
    return f"{x:.1f}{'*' if star else ''}"


def table1_csv(reports: Sequence[DetectionReport]) -> str:
    """Per-record ictal and interictal delays by channel, in the layout of a
    delay table: one row per record, then ``Mean ± SD`` rows.

    Records with several events of a class show their mean, marked ``*``.
    Classes absent from a record show ``-``.
    """
    if not reports:
        return ""
    chans = reports[0].channels
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["record", "type"] + [f"ictal_{c}" for c in chans]
               + [f"interictal_{c}" for c in chans])
    per_kind_rows = {"ictal": [], "interictal": []}
    for rep in reports:
        kinds = [e.kind for e in rep.events]
        typ = " + ".join(k.capitalize() for k in ("ictal", "interictal") if k in kinds) or "None"
        row = [rep.record_id, typ]
        for k in ("ictal", "interictal"):
            if k in rep.delay_means:
                multi = kinds.count(k) > 1
                means = rep.delay_means[k]
                row += [_fmt(x, multi) for x in means]
                per_kind_rows[k].append(means)
            else:
                row += ["-"] * len(chans)
        w.writerow(row)
    row_ch, row_all = ["Mean ± SD per channel", ""], ["Mean ± SD", ""]
    for k in ("ictal", "interictal"):
        st = aggregate_delays(per_kind_rows[k]) if per_kind_rows[k] else None
        if st is None:
            row_ch += ["-"] * len(chans)
            row_all += ["-"] + [""] * (len(chans) - 1)
            continue
        row_ch += [f"{s.mean:.1f} ± {s.sd:.1f}" if s else UNDETECTED for s in st.per_channel]
        o = st.overall
        row_all += [f"{o.mean:.1f} ± {o.sd:.1f}" if o else UNDETECTED] + [""] * (len(chans) - 1)
    w.writerow(row_ch)
    w.writerow(row_all)
    return buf.getvalue()
