"""Command-line entry point: ``netten {synth,encode,run,sweep,calibrate}``.

Exit codes: 0 success, 1 numeric failure during integration, 2 bad input,
spec, config or manifest (including unreachable calibration targets).
Errors are reported on stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import DEFAULT_HEADROOM, calibrate_gain
from .encoding import DEFAULT_TARGET_RATE, calibrate_threshold, reconstruct, save_trains_csv, sfe_encode
from .errors import NettenError, NumericError
from .network import NetworkConfig, load_config, save_config
from .pipeline import RunManifest, run_manifest, run_sweep
from .signals import SynthSpec, load_record, save_record, synthesize

log = logging.getLogger("netten")


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise NettenError(f"cannot read {path}: {exc}") from None


def _dump(obj, path=None):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path is not None:
        Path(path).write_text(text)
    sys.stdout.write(text)


def _attach_log(out_dir: Path):
    """Timestamps only ever go to ``run.log``; every other output is reproducible."""
    out_dir.mkdir(parents=True, exist_ok=True)
    h = logging.FileHandler(out_dir / "run.log", mode="w")
    h.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("netten")
    root.addHandler(h)
    root.setLevel(logging.INFO)
    return h


def cmd_synth(args):
    spec = SynthSpec.from_dict(_read_json(args.spec))
    save_record(synthesize(spec), args.out)
    return 0


def cmd_encode(args):
    rec = load_record(args.record)
    th = args.threshold if args.threshold is not None else calibrate_threshold(rec, args.target_rate)
    up, dw = sfe_encode(rec, th)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_trains_csv([up, dw], out / "trains.csv")
    err = float(np.max(np.abs(reconstruct(rec, th) - rec.samples)))
    # the 2*threshold error bound needs steps of at most one threshold per sample
    max_step = float(np.max(np.abs(np.diff(rec.samples)))) if len(rec) > 1 else 0.0
    _dump({"record": rec.id, "threshold_uv": th, "up_spikes": len(up), "dw_spikes": len(dw),
           "rate": (len(up) + len(dw)) / len(rec), "max_reconstruction_error_uv": err,
           "max_step_uv": max_step, "slew_limited": max_step <= th},
          out / "encode_summary.json")
    return 0


def _manifest(args):
    m = RunManifest.load(args.manifest)
    if getattr(args, "out", None):
        m.output_dir = Path(args.out)
    if getattr(args, "probe", None):
        m.probe = list(args.probe)
    if getattr(args, "workers", None):
        m.workers = args.workers
    return m


def cmd_run(args):
    m = _manifest(args)
    h = _attach_log(m.output_dir)
    try:
        summary = run_manifest(m)
    finally:
        logging.getLogger("netten").removeHandler(h)
        h.close()
    _dump(summary)
    return 0


def cmd_sweep(args):
    m = _manifest(args)
    seeds = list(range(1, args.mismatch_seeds + 1)) if args.mismatch_seeds else None
    h = _attach_log(m.output_dir)
    try:
        summary = run_sweep(m, seeds, args.sigma)
    finally:
        logging.getLogger("netten").removeHandler(h)
        h.close()
    _dump({k: summary[k] for k in ("gain", "informative_counts", "informative_histogram")})
    return 0


def cmd_calibrate(args):
    cfg = load_config(args.config) if args.config else NetworkConfig()
    cal = calibrate_gain(cfg, headroom=args.headroom)
    if args.out:
        save_config(cfg.with_gain(cal.gain), args.out)
    _dump(asdict(cal))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="netten", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="synthesize a labelled LFP record from a JSON spec")
    s.add_argument("spec", help="JSON synthesis spec")
    s.add_argument("out", help="output record CSV")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("encode", help="encode a record into UP/DW spike trains")
    s.add_argument("record", help="record CSV")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--threshold", type=float, help="SFE threshold in uV")
    g.add_argument("--target-rate", type=float, default=DEFAULT_TARGET_RATE,
                   help="combined spike rate to calibrate for (default: %(default)s)")
    s.add_argument("--out", default="encoded", help="output directory (default: %(default)s)")
    s.set_defaults(func=cmd_encode)

    for name, func, hlp in (("run", cmd_run, "encode, simulate and evaluate a manifest"),
                            ("sweep", cmd_sweep, "classify output channels across mismatch seeds")):
        s = sub.add_parser(name, help=hlp)
        s.add_argument("manifest", help="run manifest (JSON)")
        s.add_argument("--out", help="override the manifest's output_dir")
        s.add_argument("--workers", type=int, help="worker processes (default: manifest)")
        s.set_defaults(func=func)
        if name == "run":
            s.add_argument("--probe", type=int, nargs="+", metavar="NEURON",
                           help="record v_mem traces of these neuron ids into probe.csv")
        else:
            s.add_argument("--mismatch-seeds", type=int, metavar="N",
                           help="use seeds 1..N instead of the manifest's list")
            s.add_argument("--sigma", type=float,
                           help="uniform relative mismatch (default: manifest, else 0.2)")

    s = sub.add_parser("calibrate", help="calibrate the EPSC-to-model gain")
    s.add_argument("--config", help="network config JSON (default: built-in)")
    s.add_argument("--headroom", type=float, default=DEFAULT_HEADROOM,
                   help="factor above the burst firing boundary (default: %(default)s)")
    s.add_argument("--out", help="write the calibrated config here")
    s.set_defaults(func=cmd_calibrate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericError as exc:
        code, err = 1, exc
    except (NettenError, ValueError, OSError) as exc:
        code, err = 2, exc
    sys.stderr.write(json.dumps({"error": type(err).__name__, "message": str(err),
                                 "command": args.command}) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
