"""Step-forward encoding (SFE) of LFP traces into UP/DW spike trains.

The encoder tracks a moving baseline initialised to the first sample. A sample
above ``baseline + threshold`` emits one UP spike and raises the baseline by one
threshold step; a sample below ``baseline - threshold`` emits one DW spike and
lowers it. At most one spike is emitted per sample, whatever the excursion.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numba
import numpy as np

from .errors import CalibrationError, InputError, RecordFormatError
from .signals import LfpRecord

UP, DW = "UP", "DW"
DEFAULT_TARGET_RATE = 0.30


@dataclass(frozen=True)
class EncoderConfig:
    threshold_uv: float
    pulse_fwhm_s: float = 130e-6
    pulse_amplitude: float = 0.2
    resample_hz: float = 10_000.0

    def __post_init__(self):
        if not self.threshold_uv > 0:
            raise InputError("threshold_uv must be positive")
        if not self.pulse_fwhm_s > 0:
            raise InputError("pulse_fwhm_s must be positive")
        if not self.resample_hz > 0:
            raise InputError("resample_hz must be positive")


@dataclass(frozen=True, eq=False)
class SpikeTrain:
    """Sorted spike times (seconds) for one channel or neuron."""

    channel: str
    times_s: np.ndarray

    def __post_init__(self):
        t = np.array(self.times_s, dtype=np.float64).reshape(-1)
        if len(t) > 1 and not np.all(np.diff(t) > 0):
            raise InputError(f"spike times of {self.channel} are not strictly increasing")
        t.flags.writeable = False
        object.__setattr__(self, "times_s", t)
        object.__setattr__(self, "channel", str(self.channel))

    def __len__(self):
        return len(self.times_s)

    def __eq__(self, other):
        if not isinstance(other, SpikeTrain):
            return NotImplemented
        return self.channel == other.channel and np.array_equal(self.times_s, other.times_s)

    __hash__ = None

    def window(self, t0, t1):
        """Spike times inside the closed interval [t0, t1]."""
        lo = np.searchsorted(self.times_s, t0, side="left")
        hi = np.searchsorted(self.times_s, t1, side="right")
        return self.times_s[lo:hi]


# --------------------------------------------------------------------------
# encode / decode
# --------------------------------------------------------------------------

@numba.njit(cache=True)
def _sfe_kernel(x, threshold):
    # codes: +1 UP, -1 DW, 0 nothing
    out = np.zeros(len(x), dtype=np.int8)
    base = x[0]
    for i in range(1, len(x)):
        if x[i] > base + threshold:
            base += threshold
            out[i] = 1
        elif x[i] < base - threshold:
            base -= threshold
            out[i] = -1
    return out


def sfe_codes(samples, threshold_uv) -> np.ndarray:
    """Per-sample spike code array: +1 UP, -1 DW, 0 none."""
    x = np.ascontiguousarray(samples, dtype=np.float64)
    if len(x) == 0:
        raise InputError("cannot encode an empty signal")
    if not threshold_uv > 0:
        raise InputError("threshold must be positive")
    return _sfe_kernel(x, float(threshold_uv))


def sfe_encode(record: LfpRecord, threshold_uv: float):
    """Encode ``record`` into ``(up, dw)`` spike trains."""
    codes = sfe_codes(record.samples, threshold_uv)
    times = record.times
    return (SpikeTrain(UP, times[codes == 1]), SpikeTrain(DW, times[codes == -1]))


def sfe_decode(up: SpikeTrain, dw: SpikeTrain, threshold_uv, initial_uv, duration_s,
               rate_hz, start_s=0.0) -> np.ndarray:
    """Piecewise-constant reconstruction sampled at ``rate_hz``.

    The value at a grid time includes every spike at or before it.
    """
    if not threshold_uv > 0:
        raise InputError("threshold must be positive")
    if duration_s < 0 or not rate_hz > 0:
        raise InputError("duration must be non-negative and rate positive")
    if len(np.intersect1d(up.times_s, dw.times_s)):
        raise InputError("UP and DW spikes at identical times: corrupted trains")
    n = int(round(duration_s * rate_hz))
    grid = start_s + np.arange(n) / rate_hz
    steps = (np.searchsorted(up.times_s, grid, side="right")
             - np.searchsorted(dw.times_s, grid, side="right"))
    return initial_uv + threshold_uv * steps.astype(np.float64)


def reconstruct(record: LfpRecord, threshold_uv) -> np.ndarray:
    """decode(encode(record)) on the record's own sampling grid."""
    up, dw = sfe_encode(record, threshold_uv)
    return sfe_decode(up, dw, threshold_uv, record.samples[0], record.duration_s,
                      record.sample_rate_hz, start_s=record.start_s)


# --------------------------------------------------------------------------
# rate calibration
# --------------------------------------------------------------------------

def spike_rate(samples, threshold_uv) -> float:
    """Fraction of samples carrying a spike on UP or DW (their logic sum)."""
    codes = sfe_codes(samples, threshold_uv)
    return float(np.count_nonzero(codes)) / len(codes)


def calibrate_threshold(record: LfpRecord, target_rate=DEFAULT_TARGET_RATE,
                        tol=0.005, max_iter=64) -> float:
    """Bisect the threshold until the combined UP/DW rate brackets ``target_rate``.

    Stops once the rates at the two bracket ends differ by at most ``tol`` or
    after ``max_iter`` halvings, then returns whichever of the bracket ends and
    midpoint gives the rate closest to the target.
    """
    if not 0 < target_rate < 1:
        raise InputError("target_rate must lie in (0, 1)")
    x = np.ascontiguousarray(record.samples, dtype=np.float64)
    if len(x) == 0:
        raise InputError("cannot calibrate on an empty record")
    span = float(np.ptp(x))
    if span == 0:
        raise CalibrationError(
            f"target rate {target_rate} unreachable: max achievable rate is 0.0")
    lo, hi = span * 1e-12, span
    r_lo, r_hi = spike_rate(x, lo), spike_rate(x, hi)
    if r_lo < target_rate:
        raise CalibrationError(
            f"target rate {target_rate} unreachable: max achievable rate is {r_lo:.4f}")
    for _ in range(max_iter):
        if r_lo - r_hi <= tol:
            break
        mid = 0.5 * (lo + hi)
        r_mid = spike_rate(x, mid)
        if r_mid > target_rate:
            lo, r_lo = mid, r_mid
        else:
            hi, r_hi = mid, r_mid
    mid = 0.5 * (lo + hi)
    candidates = [(abs(spike_rate(x, mid) - target_rate), 0, mid),
                  (abs(r_lo - target_rate), 1, lo),
                  (abs(r_hi - target_rate), 2, hi)]
    return min(candidates)[2]


# --------------------------------------------------------------------------
# waveform export
# --------------------------------------------------------------------------

def export_waveform(train: SpikeTrain, cfg: EncoderConfig, duration_s) -> np.ndarray:
    """Render spikes as raised-cosine pulses sampled at ``cfg.resample_hz``.

    A raised cosine ``0.5 (1 + cos(pi t / W))`` on ``|t| < W`` has its FWHM
    equal to ``W``, so ``W`` is the configured FWHM. Overlapping pulses add.
    """
    if duration_s < 0:
        raise InputError("duration must be non-negative")
    fs = cfg.resample_hz
    n = int(round(duration_s * fs))
    out = np.zeros(n)
    half = cfg.pulse_fwhm_s
    k = int(math.ceil(half * fs))
    for t in train.times_s:
        c = int(round(t * fs))
        idx = np.arange(max(c - k, 0), min(c + k, n - 1) + 1)
        rel = idx / fs - t
        mask = np.abs(rel) < half
        out[idx[mask]] += cfg.pulse_amplitude * 0.5 * (1 + np.cos(np.pi * rel[mask] / half))
    return out


# --------------------------------------------------------------------------
# spike-train serialization
# --------------------------------------------------------------------------

RASTER_MAGIC = b"NTRS"
RASTER_VERSION = 1


def save_trains_csv(trains: Sequence[SpikeTrain], path) -> None:
    """Write trains as ``channel,time_s`` rows (times rendered round-trip exact)."""
    with Path(path).open("w", newline="") as fh:
        fh.write("channel,time_s\n")
        for tr in trains:
            for t in tr.times_s:
                fh.write(f"{tr.channel},{float(t)!r}\n")


def load_trains_csv(path, channels=None) -> list[SpikeTrain]:
    """Read a ``channel,time_s`` CSV; ``channels`` fixes order and keeps empty trains."""
    by_channel: dict[str, list[float]] = {c: [] for c in (channels or ())}
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["channel", "time_s"]:
            raise RecordFormatError("expected header channel,time_s", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise RecordFormatError(f"expected 2 fields, got {len(row)}", line=lineno)
            try:
                by_channel.setdefault(row[0], []).append(float(row[1]))
            except ValueError as exc:
                raise RecordFormatError(str(exc), line=lineno) from None
    return [SpikeTrain(c, np.asarray(ts)) for c, ts in by_channel.items()]


def save_trains_binary(trains: Sequence[SpikeTrain], path) -> None:
    """Binary raster: magic, u32 version, u32 n_trains, then per train
    u32 name length, UTF-8 name, u64 count, count little-endian float64 times."""
    with Path(path).open("wb") as fh:
        fh.write(RASTER_MAGIC)
        fh.write(struct.pack("<II", RASTER_VERSION, len(trains)))
        for tr in trains:
            name = tr.channel.encode("utf-8")
            fh.write(struct.pack("<I", len(name)))
            fh.write(name)
            fh.write(struct.pack("<Q", len(tr.times_s)))
            fh.write(np.asarray(tr.times_s, dtype="<f8").tobytes())


def load_trains_binary(path) -> list[SpikeTrain]:
    data = Path(path).read_bytes()
    if data[:4] != RASTER_MAGIC:
        raise RecordFormatError("not a netten raster file (bad magic)")
    version, n = struct.unpack_from("<II", data, 4)
    if version != RASTER_VERSION:
        raise RecordFormatError(f"unsupported raster version {version}")
    pos = 12
    trains = []
    try:
        for _ in range(n):
            (ln,) = struct.unpack_from("<I", data, pos)
            pos += 4
            name = data[pos:pos + ln].decode("utf-8")
            pos += ln
            (count,) = struct.unpack_from("<Q", data, pos)
            pos += 8
            times = np.frombuffer(data, dtype="<f8", count=count, offset=pos)
            pos += 8 * count
            trains.append(SpikeTrain(name, times.astype(np.float64)))
    except (struct.error, ValueError) as exc:
        raise RecordFormatError(f"truncated raster file: {exc}") from None
    return trains
