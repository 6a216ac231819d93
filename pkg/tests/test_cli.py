import filecmp
import json
from dataclasses import asdict

import numpy as np
import pytest

from netten.cli import main
from netten.encoding import load_trains_binary, load_trains_csv
from netten.network import NetworkConfig
from netten.pipeline import RunManifest, classify_channel
from netten.signals import SynthEvent, SynthSpec, load_record
from netten.encoding import SpikeTrain
from netten.signals import LfpRecord

SHORT = SynthSpec(12.0, 8.0, (SynthEvent("interictal", 2.0, 0.08, 250.0),
                              SynthEvent("ictal", 4.0, 5.0, 450.0, 12.0)), seed=2,
                  record_id="short")


def dump(path, obj):
    path.write_text(json.dumps(obj))
    return path


def same_tree(a, b, ignore=("run.log",)):
    cmp = filecmp.dircmp(a, b, ignore=list(ignore))
    def walk(c):
        if c.left_only or c.right_only or c.diff_files or c.funny_files:
            return False
        _, mismatch, errors = filecmp.cmpfiles(c.left, c.right, c.common_files, shallow=False)
        return not mismatch and not errors and all(walk(s) for s in c.subdirs.values())
    return walk(cmp)


# -- synth -----------------------------------------------------------------

def test_synth_zero_events(tmp_path):
    spec = dump(tmp_path / "s.json", {"duration_s": 0.5, "baseline_noise_uv": 0.0})
    assert main(["synth", str(spec), str(tmp_path / "r.csv")]) == 0
    r = load_record(tmp_path / "r.csv")
    assert not r.samples.any() and len(r) == 1000


def test_synth_byte_identical(tmp_path):
    spec = dump(tmp_path / "s.json", asdict(SHORT))
    main(["synth", str(spec), str(tmp_path / "a.csv")])
    main(["synth", str(spec), str(tmp_path / "b.csv")])
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_synth_overlap_exit_2(tmp_path, capsys):
    spec = dump(tmp_path / "s.json", {"events": [
        {"kind": "ictal", "onset_s": 1, "duration_s": 5, "amplitude_uv": 300},
        {"kind": "interictal", "onset_s": 2, "duration_s": 0.05, "amplitude_uv": 100}]})
    assert main(["synth", str(spec), str(tmp_path / "r.csv")]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "SpecError" and "overlapping" in err["message"]


# -- encode ----------------------------------------------------------------

def test_encode_target_rate(tmp_path, capsys):
    spec = dump(tmp_path / "s.json", asdict(SHORT))
    main(["synth", str(spec), str(tmp_path / "r.csv")])
    capsys.readouterr()
    assert main(["encode", str(tmp_path / "r.csv"), "--out", str(tmp_path / "enc")]) == 0
    s = json.loads(capsys.readouterr().out)
    assert abs(s["rate"] - 0.30) <= 0.005
    up, dw = load_trains_csv(tmp_path / "enc" / "trains.csv", channels=["UP", "DW"])
    assert len(up) == s["up_spikes"] and len(dw) == s["dw_spikes"]
    # discharges outrun the encoder, so the error is reported against an
    # independent decode rather than bounded
    rec = load_record(tmp_path / "r.csv")
    base = rec.samples[0] + s["threshold_uv"] * (
        np.searchsorted(up.times_s, rec.times, side="right")
        - np.searchsorted(dw.times_s, rec.times, side="right"))
    assert s["max_reconstruction_error_uv"] == pytest.approx(np.max(np.abs(base - rec.samples)))
    assert not s["slew_limited"]


def test_encode_error_bound_on_slew_limited_record(tmp_path, capsys):
    t = np.arange(4000) / 2000.0
    x = 100 * np.sin(2 * np.pi * 1.5 * t) + 20 * np.sin(2 * np.pi * 7 * t)
    rows = "".join(f"{ti!r},{xi:.9g},0\n" for ti, xi in zip(t.tolist(), x))
    (tmp_path / "r.csv").write_text("time_s,value_uv,label\n" + rows)
    assert main(["encode", str(tmp_path / "r.csv"), "--threshold", "2",
                 "--out", str(tmp_path / "enc")]) == 0
    s = json.loads(capsys.readouterr().out)
    assert s["slew_limited"]
    assert s["max_reconstruction_error_uv"] <= 2 * s["threshold_uv"]


def test_encode_constant_input(tmp_path, capsys):
    spec = dump(tmp_path / "s.json", {"duration_s": 0.5, "baseline_noise_uv": 0.0})
    main(["synth", str(spec), str(tmp_path / "r.csv")])
    capsys.readouterr()
    assert main(["encode", str(tmp_path / "r.csv"), "--threshold", "1",
                 "--out", str(tmp_path / "enc")]) == 0
    s = json.loads(capsys.readouterr().out)
    assert s["up_spikes"] == s["dw_spikes"] == 0
    assert main(["encode", str(tmp_path / "r.csv"), "--out", str(tmp_path / "enc")]) == 2


def test_encode_missing_file(tmp_path):
    assert main(["encode", str(tmp_path / "nope.csv")]) == 2


# -- run -------------------------------------------------------------------

def manifest(tmp_path, **kw):
    m = {"schema_version": 1, "synth": [asdict(SHORT)], "output_dir": "out"}
    m.update(kw)
    return dump(tmp_path / "m.json", m)


def test_run_outputs_and_rerun_identical(tmp_path, capsys):
    m = manifest(tmp_path, probe=[21])
    assert main(["run", str(m)]) == 0
    assert main(["run", str(m), "--out", str(tmp_path / "again")]) == 0
    out = tmp_path / "out"
    for f in ("config.resolved.json", "calibration.json", "table1.csv", "summary.json",
              "run.log", "short/inputs.csv", "short/outputs.csv", "short/outputs.bin",
              "short/report.json", "short/probe.csv"):
        assert (out / f).exists(), f
    assert same_tree(out, tmp_path / "again")
    assert load_trains_binary(out / "short" / "outputs.bin") == load_trains_csv(
        out / "short" / "outputs.csv", channels=[f"out{i}" for i in range(10)])
    report = json.loads((out / "short" / "report.json").read_text())
    assert report["tp"] / (report["tp"] + report["fp"]) == report["precision"]
    assert "ictal" in (out / "table1.csv").read_text().splitlines()[0]
    probe = np.loadtxt(out / "short" / "probe.csv", delimiter=",", skiprows=1)
    assert probe.shape == (120001, 2)


def test_run_silence(tmp_path):
    m = manifest(tmp_path, synth=[{"duration_s": 2.0, "baseline_noise_uv": 0.0,
                                   "record_id": "quiet"}],
                 encoder={"threshold_uv": 5.0}, calibrate_gain=False)
    assert main(["run", str(m)]) == 0
    out = tmp_path / "out"
    assert (out / "quiet" / "outputs.csv").read_text() == "channel,time_s\n"
    assert json.loads((out / "quiet" / "report.json").read_text())["precision"] is None
    assert json.loads((out / "summary.json").read_text())["precision"] is None


def test_run_numeric_error_exit_1(tmp_path, capsys):
    cfg = NetworkConfig(epsc_to_model_gain=1e306).to_dict()
    m = manifest(tmp_path, config=cfg, calibrate_gain=False)
    assert main(["run", str(m)]) == 1
    assert json.loads(capsys.readouterr().err)["error"] == "NumericError"


@pytest.mark.parametrize("patch", [{"schema_version": 2}, {"records": ["missing.csv"]},
                                   {"encoder": {"target_rate": 0.3, "threshold_uv": 2}},
                                   {"unknown": 1}, {"config": "missing.json"}])
def test_run_bad_manifest_exit_2(tmp_path, patch):
    assert main(["run", str(manifest(tmp_path, **patch))]) == 2


def test_manifest_relative_paths(tmp_path):
    (tmp_path / "sub").mkdir()
    NetworkConfig().to_dict()
    dump(tmp_path / "sub" / "cfg.json", NetworkConfig(static_input_weight=0.2).to_dict())
    m = RunManifest.from_dict({"schema_version": 1, "config": "cfg.json",
                               "synth": [asdict(SHORT)]}, tmp_path / "sub")
    assert m.config.static_input_weight == 0.2
    assert m.output_dir == tmp_path / "sub" / "out"


# -- sweep -----------------------------------------------------------------

def test_sweep_sigma_zero_identical(tmp_path, capsys):
    m = manifest(tmp_path)
    assert main(["sweep", str(m), "--mismatch-seeds", "3", "--sigma", "0"]) == 0
    s = json.loads((tmp_path / "out" / "sweep_summary.json").read_text())
    classes = list(s["per_seed"].values())
    assert classes[0] == classes[1] == classes[2]


def test_sweep_reproducible(tmp_path, capsys):
    m = manifest(tmp_path, mismatch_seeds=[1, 2, 3, 4], workers=2)
    assert main(["sweep", str(m)]) == 0
    first = (tmp_path / "out" / "sweep_summary.json").read_bytes()
    assert main(["sweep", str(m), "--workers", "1"]) == 0
    assert (tmp_path / "out" / "sweep_summary.json").read_bytes() == first
    s = json.loads(first)
    assert len(s["informative_counts"]) == 4
    assert s["relative_sigma"]["a"] == 0.2


def test_classify_channel():
    labels = np.zeros(20000, dtype=int)
    labels[10000:12000] = 2
    rec = LfpRecord("c", 1000.0, np.zeros(20000), labels)
    assert classify_channel(SpikeTrain("o", [10.5]), rec) == "informative"
    assert classify_channel(SpikeTrain("o", []), rec) == "silent"
    assert classify_channel(SpikeTrain("o", np.arange(0, 20, 0.05)), rec) == "saturated"
    assert classify_channel(SpikeTrain("o", [1.0, 3.0, 5.0, 10.5]), rec) == "noisy"


# -- calibrate -------------------------------------------------------------

def test_calibrate_writes_config(tmp_path, capsys):
    assert main(["calibrate", "--out", str(tmp_path / "c.json")]) == 0
    cal = json.loads(capsys.readouterr().out)
    assert cal["burst_fires"] and cal["baseline_silent"]
    cfg = json.loads((tmp_path / "c.json").read_text())
    assert cfg["epsc_to_model_gain"] == pytest.approx(cal["gain"])
    assert cal["gain"] == pytest.approx(1.1 * cal["burst_threshold_gain"])
