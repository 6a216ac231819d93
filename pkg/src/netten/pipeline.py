"""End-to-end runs: encode -> simulate -> evaluate, driven by a JSON manifest.

Manifest schema (``schema_version`` 1); relative paths resolve against the
manifest's directory::

    {
      "schema_version": 1,
      "config": "network.json" | {...inline config...} | null,
      "records": ["slice01.csv", ...],
      "synth": [{...SynthSpec...}, ...] | "specs.json",
      "output_dir": "out",
      "channel_mask": [5, 6, 7, 9] | null,
      "encoder": {"target_rate": 0.30} | {"threshold_uv": 12.5},
      "calibrate_gain": true,
      "headroom": 1.1,
      "probe": [20, 21],
      "mismatch_seeds": [1, 2, 3],
      "workers": 1,
      "classifier": {"ictal_min_count": 100, "artifact_min_isi_ms": 200}
    }
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .calibration import DEFAULT_HEADROOM, calibrate_gain
from .encoding import (DEFAULT_TARGET_RATE, calibrate_threshold, save_trains_binary,
                       save_trains_csv, sfe_encode)
from .errors import ConfigError
from .metrics import ClassifierThresholds, DetectionReport, evaluate, table1_csv
from .network import MismatchSpec, NetworkConfig, SimulationResult, load_config, save_config, simulate
from .signals import BASELINE, LfpRecord, SynthSpec, load_record, synthesize

log = logging.getLogger(__name__)

MANIFEST_VERSION = 1
_MANIFEST_KEYS = {"schema_version", "config", "records", "synth", "output_dir", "channel_mask",
                  "encoder", "calibrate_gain", "headroom", "probe", "mismatch_seeds", "workers",
                  "classifier"}


@dataclass
class RunManifest:
    config: NetworkConfig = field(default_factory=NetworkConfig)
    records: list = field(default_factory=list)
    synth: list = field(default_factory=list)
    output_dir: Path = Path("out")
    channel_mask: Optional[list] = None
    target_rate: Optional[float] = DEFAULT_TARGET_RATE
    threshold_uv: Optional[float] = None
    calibrate_gain: bool = True
    headroom: float = DEFAULT_HEADROOM
    probe: list = field(default_factory=list)
    mismatch_seeds: list = field(default_factory=list)
    workers: int = 1
    classifier: ClassifierThresholds = ClassifierThresholds()

    @classmethod
    def from_dict(cls, d, base_dir=Path(".")):
        d = dict(d)
        if d.get("schema_version") != MANIFEST_VERSION:
            raise ConfigError(f"unsupported manifest schema_version {d.get('schema_version')!r}")
        unknown = set(d) - _MANIFEST_KEYS
        if unknown:
            raise ConfigError(f"unknown manifest fields: {sorted(unknown)}")
        base_dir = Path(base_dir)

        def resolve(p):
            p = Path(p)
            return p if p.is_absolute() else base_dir / p

        cfg = d.get("config")
        if cfg is None:
            config = NetworkConfig()
        elif isinstance(cfg, dict):
            config = NetworkConfig.from_dict(cfg)
        else:
            config = load_config(resolve(cfg))
        records = [resolve(p) for p in d.get("records", [])]
        for p in records:
            if not p.exists():
                raise ConfigError(f"record file not found: {p}")
        synth = d.get("synth", [])
        if isinstance(synth, str):
            synth = json.loads(resolve(synth).read_text())
        synth = [SynthSpec.from_dict(s) for s in synth]
        if not records and not synth:
            raise ConfigError("manifest lists no records and no synth specs")
        enc = d.get("encoder", {"target_rate": DEFAULT_TARGET_RATE})
        if set(enc) - {"target_rate", "threshold_uv"} or len(enc) != 1:
            raise ConfigError("encoder must set exactly one of target_rate, threshold_uv")
        try:
            return cls(
                config=config, records=records, synth=synth,
                output_dir=resolve(d.get("output_dir", "out")),
                channel_mask=d.get("channel_mask"),
                target_rate=enc.get("target_rate"), threshold_uv=enc.get("threshold_uv"),
                calibrate_gain=bool(d.get("calibrate_gain", True)),
                headroom=float(d.get("headroom", DEFAULT_HEADROOM)),
                probe=list(d.get("probe", [])),
                mismatch_seeds=list(d.get("mismatch_seeds", [])),
                workers=int(d.get("workers", 1)),
                classifier=ClassifierThresholds(**d.get("classifier", {})))
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read manifest {path}: {exc}") from None
        return cls.from_dict(d, path.parent)

    def load_records(self):
        return ([load_record(p) for p in self.records]
                + [synthesize(s) for s in self.synth])


@dataclass
class RecordRun:
    record: LfpRecord
    threshold_uv: float
    up: object
    dw: object
    result: SimulationResult
    report: DetectionReport


def encode_record(record: LfpRecord, threshold_uv=None, target_rate=DEFAULT_TARGET_RATE):
    if threshold_uv is None:
        threshold_uv = calibrate_threshold(record, target_rate)
    up, dw = sfe_encode(record, threshold_uv)
    return threshold_uv, up, dw


def run_record(config: NetworkConfig, record: LfpRecord, threshold_uv=None,
               target_rate=DEFAULT_TARGET_RATE, mask=None, probe=(),
               thresholds=ClassifierThresholds()) -> RecordRun:
    th, up, dw = encode_record(record, threshold_uv, target_rate)
    result = simulate(config, up, dw, record.start_s + record.duration_s, probe=probe)
    report = evaluate(result.output_trains, record, mask, thresholds)
    return RecordRun(record, th, up, dw, result, report)


def prepare_config(manifest: RunManifest):
    """Calibrate the gain if requested; returns ``(config, calibration or None)``."""
    cfg = manifest.config
    if not manifest.calibrate_gain:
        return cfg, None
    cal = calibrate_gain(cfg, headroom=manifest.headroom)
    return cfg.with_gain(cal.gain), cal


def write_record_outputs(run: RecordRun, out_dir: Path, probe=()):
    out_dir.mkdir(parents=True, exist_ok=True)
    save_trains_csv([run.up, run.dw], out_dir / "inputs.csv")
    save_trains_csv(run.result.output_trains, out_dir / "outputs.csv")
    save_trains_binary(run.result.output_trains, out_dir / "outputs.bin")
    (out_dir / "report.json").write_text(run.report.to_json())
    if probe:
        ids = sorted(run.result.traces)
        t = np.arange(len(run.result.traces[ids[0]])) * run.result.dt_ms * 1e-3
        cols = [t] + [run.result.traces[i] for i in ids]
        header = "time_s," + ",".join(f"v_{i}" for i in ids)
        np.savetxt(out_dir / "probe.csv", np.column_stack(cols), delimiter=",",
                   header=header, comments="", fmt="%.9g")


def run_manifest(manifest: RunManifest) -> dict:
    """Run every record of ``manifest`` and write outputs; returns the summary."""
    out = manifest.output_dir
    out.mkdir(parents=True, exist_ok=True)
    config, cal = prepare_config(manifest)
    save_config(config, out / "config.resolved.json")
    if cal is not None:
        (out / "calibration.json").write_text(json.dumps(asdict(cal), indent=2) + "\n")
    reports = []
    summary = {"records": []}
    tp = fp = 0
    for rec in manifest.load_records():
        log.info("running record %s", rec.id)
        run = run_record(config, rec, manifest.threshold_uv, manifest.target_rate,
                         manifest.channel_mask, manifest.probe, manifest.classifier)
        write_record_outputs(run, out / rec.id, manifest.probe)
        reports.append(run.report)
        tp += run.report.tp
        fp += run.report.fp
        summary["records"].append({
            "id": rec.id, "threshold_uv": run.threshold_uv,
            "precision": run.report.precision,
            "output_spikes": int(sum(len(t) for t in run.result.output_trains))})
    summary["precision"] = tp / (tp + fp) if tp + fp else None
    summary["tp"], summary["fp"] = tp, fp
    (out / "table1.csv").write_text(table1_csv(reports))
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


# --------------------------------------------------------------------------
# mismatch sweep
# --------------------------------------------------------------------------

BIN_S = 0.1
SATURATED_FRACTION = 0.5
SILENT_FRACTION = 0.99
DEFAULT_SWEEP_SIGMA = 0.2


def classify_channel(train, record: LfpRecord, bin_s=BIN_S) -> str:
    """``informative``: fires during events and is silent in >= 99% of baseline
    bins; ``saturated``: fires in > 50% of baseline bins; ``silent``: never
    fires during events; otherwise ``noisy``."""
    n_bins = int(np.ceil(record.duration_s / bin_s))
    lab = record.labels
    per_bin = int(round(bin_s * record.sample_rate_hz))
    baseline_bins = [b for b in range(n_bins) if np.all(lab[b * per_bin:(b + 1) * per_bin] == BASELINE)]
    t = train.times_s - record.start_s
    fired_bins = set(np.floor(t / bin_s).astype(int).tolist())
    idx = np.clip(np.round(t * record.sample_rate_hz).astype(int), 0, len(lab) - 1)
    in_events = bool(np.any(lab[idx] != BASELINE))
    frac_active = (sum(b in fired_bins for b in baseline_bins) / len(baseline_bins)
                   if baseline_bins else 0.0)
    if frac_active > SATURATED_FRACTION:
        return "saturated"
    if not in_events:
        return "silent"
    if 1.0 - frac_active >= SILENT_FRACTION:
        return "informative"
    return "noisy"


def _sweep_one(args):
    config, records, seed, threshold_uv, target_rate = args
    cfg = replace(config, mismatch=replace(config.mismatch, seed=seed))
    per_record = []
    for rec in records:
        th, up, dw = encode_record(rec, threshold_uv, target_rate)
        res = simulate(cfg, up, dw, rec.start_s + rec.duration_s)
        per_record.append([classify_channel(tr, rec) for tr in res.output_trains])
    # a channel is informative for the seed only if it is on every record
    n_ch = len(per_record[0])
    classes = []
    for c in range(n_ch):
        labels = {r[c] for r in per_record}
        classes.append(labels.pop() if len(labels) == 1 else
                       ("saturated" if "saturated" in labels else "noisy"))
    return seed, classes


def run_sweep(manifest: RunManifest, seeds=None, sigma=None) -> dict:
    """Evaluate each mismatch seed at the gain calibrated on the nominal network.

    ``sigma`` sets a uniform relative mismatch on every parameter; without it
    the manifest config's mismatch is used, or 0.2 if that one is empty.
    """
    seeds = list(seeds if seeds is not None else manifest.mismatch_seeds)
    if not seeds:
        raise ConfigError("no mismatch seeds given")
    if sigma is not None:
        mismatch = MismatchSpec.uniform(sigma)
    elif manifest.config.mismatch.relative_sigma:
        mismatch = manifest.config.mismatch
    else:
        mismatch = MismatchSpec.uniform(DEFAULT_SWEEP_SIGMA)
    nominal = replace(manifest, config=replace(manifest.config, mismatch=MismatchSpec()))
    config, _ = prepare_config(nominal)
    config = replace(config, mismatch=mismatch)
    records = manifest.load_records()
    jobs = [(config, records, s, manifest.threshold_uv, manifest.target_rate) for s in seeds]
    if manifest.workers > 1:
        with ProcessPoolExecutor(max_workers=manifest.workers) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]
    per_seed = {str(s): c for s, c in results}
    counts = [c.count("informative") for _, c in results]
    summary = {
        "gain": config.epsc_to_model_gain,
        "relative_sigma": dict(sorted(config.mismatch.relative_sigma.items())),
        "per_seed": per_seed,
        "informative_counts": counts,
        "informative_histogram": {str(k): counts.count(k) for k in sorted(set(counts))},
    }
    out = manifest.output_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary
