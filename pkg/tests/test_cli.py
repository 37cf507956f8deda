import json
import subprocess
import sys

import numpy as np
import pytest

from ism_haptics import cli, default_model
from ism_haptics.config import build_run_config, load_config_file
from ism_haptics.corpus import GENERATORS
from ism_haptics.errors import InvalidArgument
from ism_haptics.haptic import parse_clip
from ism_haptics.pipeline import AudioSignal, IsmConfig
from ism_haptics.signal_io import StereoStimulus, WavSpec, read_wav_frames, write_wav

from oracles import envelope_band_ratio_db

SR = 48000


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def fireworks(tmp_path):
    path = tmp_path / "fireworks.wav"
    write_wav(GENERATORS["fireWorks"](SR, duration=1.0), WavSpec(SR, 16), path)
    return path


def records(out):
    return [json.loads(line) for line in out.splitlines()]


# convert


def test_convert_with_clip_writes_two_files(fireworks, capsys):
    code, out, err = run(["convert", fireworks, "--carrier", 200, "--clip"], capsys)
    assert code == 0, err
    assert (fireworks.parent / "fireworks.ism.wav").is_file()
    clip = parse_clip(fireworks.parent / "fireworks.haptic.json")
    assert clip.metadata["carrier_hz"] == 200.0
    assert "clips=0" in out and "peak=" in out and "rt_factor=" in out and "config=" in out


def test_convert_carrier_out_of_range(fireworks, capsys):
    code, _, err = run(["convert", fireworks, "--carrier", 50], capsys)
    assert code == 2
    assert "150-300" in err
    assert not (fireworks.parent / "fireworks.ism.wav").exists()


def test_convert_missing_input(tmp_path, capsys):
    code, _, err = run(["convert", tmp_path / "absent.wav"], capsys)
    assert code == 1
    assert "absent.wav" in err


def test_convert_malformed_input(tmp_path, capsys):
    bad = tmp_path / "bad.wav"
    bad.write_bytes(b"RIFF1234WAVEjunk")
    code, _, err = run(["convert", bad], capsys)
    assert code == 2
    assert "bad.wav" in err


def test_convert_rate_mismatch(fireworks, capsys):
    code, _, err = run(["convert", fireworks, "--rate", 44100], capsys)
    assert code == 2
    assert "44100" in err


def test_json_lines_report(fireworks, capsys):
    code, out, _ = run(["convert", fireworks, "--report", "json-lines", "--envelope"], capsys)
    assert code == 0
    (rec,) = records(out)
    assert rec["event"] == "convert"
    for key in ("clip_count", "peak", "rt_factor", "config_hash", "n_frames", "outputs"):
        assert key in rec
    assert rec["config_hash"] == IsmConfig().digest(default_model())
    assert set(rec["outputs"]) == {"wav", "envelope"}


def test_output_bits_and_out_dir(fireworks, tmp_path, capsys):
    out_dir = tmp_path / "out"
    out_dir.mkdir()
    code, _, _ = run(["convert", fireworks, "--bits", 32, "--out-dir", out_dir], capsys)
    assert code == 0
    _, spec = read_wav_frames(out_dir / "fireworks.ism.wav")
    assert spec == WavSpec(SR, 32, 1)


def test_parallel_jobs_match_serial(tmp_path, capsys):
    paths = []
    for name, gen in GENERATORS.items():
        p = tmp_path / f"{name}.wav"
        write_wav(gen(SR, duration=0.5), WavSpec(SR, 16), p)
        paths.append(p)
    assert run(["convert", *paths], capsys)[0] == 0
    serial = {p: (p.parent / (p.stem + ".ism.wav")).read_bytes() for p in paths}
    code, out, _ = run(["convert", *paths, "--jobs", 3, "--report", "json-lines"], capsys)
    assert code == 0
    assert len(records(out)) == 4
    for p in paths:
        assert (p.parent / (p.stem + ".ism.wav")).read_bytes() == serial[p]


def test_partial_failure_reports_worst_code(fireworks, tmp_path, capsys):
    code, out, err = run(["convert", fireworks, tmp_path / "missing.wav"], capsys)
    assert code == 1
    assert "fireworks.ism.wav" in out
    assert "missing.wav" in err


def test_custom_curves_via_env(fireworks, tmp_path, capsys, monkeypatch):
    d = tmp_path / "model"
    d.mkdir()
    (d / "threshold.txt").write_text("100 0.01\n1000 0.01\n")
    (d / "exponent.txt").write_text("100 0.5\n1000 0.5\n")
    monkeypatch.setenv("ISM_MODEL_DIR", str(d))
    code, out, _ = run(["convert", fireworks, "--report", "json-lines"], capsys)
    assert code == 0
    assert records(out)[0]["config_hash"] != IsmConfig().digest(default_model())


def test_missing_curve_file_is_validation_error(fireworks, tmp_path, capsys):
    code, _, err = run(["convert", fireworks, "--threshold", tmp_path / "t.txt",
                        "--exponent", tmp_path / "e.txt"], capsys)
    assert code == 2
    assert "not found" in err


# configuration precedence


def test_three_layer_precedence(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("# experiment\ncarrier = 250\ngain = 0.5  # headroom\n")
    cfg = build_run_config(load_config_file(cfg_file), {"carrier_hz": 300.0, "hop": None})
    assert cfg.carrier_hz == 300.0          # flag beats file
    assert cfg.output_gain == 0.5           # file beats default
    assert cfg.hop == IsmConfig().hop       # default survives
    assert cfg.sources == {"carrier_hz": "flag", "output_gain": "file"}


def test_precedence_end_to_end(fireworks, tmp_path, capsys):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("carrier = 250\ngain = 0.5\n")
    code, out, _ = run(["convert", fireworks, "--config", cfg_file, "--carrier", 300,
                        "--report", "json-lines"], capsys)
    assert code == 0
    expected = IsmConfig(carrier_hz=300.0, output_gain=0.5).digest(default_model())
    assert records(out)[0]["config_hash"] == expected


def test_config_paths_relative_to_file(tmp_path):
    (tmp_path / "curves").mkdir()
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("threshold = curves/t.txt\n")
    assert load_config_file(cfg_file)["threshold_path"] == str(tmp_path / "curves" / "t.txt")


def test_bad_config_key(fireworks, tmp_path, capsys):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("carier = 250\n")
    with pytest.raises(InvalidArgument, match="carier"):
        load_config_file(cfg_file)
    code, _, err = run(["convert", fireworks, "--config", cfg_file], capsys)
    assert code == 2
    assert "run.cfg:1" in err


def test_missing_config_file(fireworks, tmp_path, capsys):
    assert run(["convert", fireworks, "--config", tmp_path / "none.cfg"], capsys)[0] == 1


# stereo


def test_stereo_from_mono(fireworks, capsys):
    code, out, _ = run(["stereo", fireworks], capsys)
    assert code == 0
    frames, spec = read_wav_frames(fireworks.parent / "fireworks.stim.wav")
    assert spec.channels == 2
    assert "left=audio right=vibration" in out
    assert envelope_band_ratio_db(frames[:, 1], SR) >= 40


def test_stereo_input_downmixed_with_warning(tmp_path, capsys):
    rng = np.random.default_rng(0)
    left = AudioSignal(0.3 * rng.standard_normal(SR // 2).clip(-3, 3) / 3, SR)
    right = AudioSignal(np.zeros(SR // 2), SR)
    src = tmp_path / "two.wav"
    write_wav(StereoStimulus(left, right), WavSpec(SR, 16, 2), src)
    code, _, err = run(["stereo", src], capsys)
    assert code == 0
    assert "downmixed 2 channels" in err


# tone


def test_tone_defaults(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert run(["tone"], capsys)[0] == 0
    frames, spec = read_wav_frames(tmp_path / "tone.wav")
    assert spec == WavSpec(SR, 16, 1)
    x = frames[:, 0]
    assert x.size == SR
    assert np.max(np.abs(x)) == pytest.approx(0.5, abs=1e-4)
    assert np.fft.rfftfreq(x.size, 1 / SR)[np.argmax(np.abs(np.fft.rfft(x)))] == 150.0


def test_tone_nyquist(tmp_path, capsys):
    code, _, err = run(["tone", "--freq", 150000, "--rate", 48000, "-o", tmp_path / "t.wav"],
                       capsys)
    assert code == 2
    assert "Nyquist" in err


def test_tone_silent(tmp_path, capsys):
    assert run(["tone", "--amp", 0, "-o", tmp_path / "s.wav"], capsys)[0] == 0
    frames, _ = read_wav_frames(tmp_path / "s.wav")
    assert not np.any(frames)


# clip and lint


def test_lint_fresh_clip_is_clean(fireworks, capsys):
    assert run(["convert", fireworks, "--clip"], capsys)[0] == 0
    code, out, err = run(["lint", fireworks.parent / "fireworks.haptic.json", "--strict",
                          "--report", "json-lines"], capsys)
    assert code == 0
    assert records(out)[0]["warnings"] == []
    assert err == ""


def test_lint_hand_broken_clip(fireworks, capsys):
    run(["convert", fireworks, "--clip"], capsys)
    path = fireworks.parent / "fireworks.haptic.json"
    doc = json.loads(path.read_text())
    pts = doc["signals"]["continuous"]["envelopes"]["amplitude"]
    pts[1]["time"] = pts[3]["time"]
    path.write_text(json.dumps(doc))
    code, _, err = run(["lint", path], capsys)
    assert code == 2
    assert "amplitude[2]" in err and "precedes" in err


def test_lint_strict_fails_on_fast_fluctuation(tmp_path, capsys):
    t = np.arange(400) / 1000
    v = 0.5 + 0.4 * np.sign(np.sin(2 * np.pi * 250 * t + 0.1))
    doc = {"version": {"major": 1, "minor": 0, "patch": 0},
           "signals": {"continuous": {"envelopes": {
               "amplitude": [{"time": float(a), "amplitude": float(b)} for a, b in zip(t, v)],
               "frequency": [{"time": 0.0, "frequency": 0.5}]}}}}
    path = tmp_path / "fast.haptic.json"
    path.write_text(json.dumps(doc))
    code, _, err = run(["lint", path], capsys)
    assert code == 0 and "fluctuation" in err
    assert run(["lint", path, "--strict"], capsys)[0] == 2


def test_lint_missing_file(tmp_path, capsys):
    assert run(["lint", tmp_path / "none.json"], capsys)[0] == 1


def test_clip_from_envelope_csv(fireworks, tmp_path, capsys):
    assert run(["convert", fireworks, "--envelope"], capsys)[0] == 0
    csv = fireworks.parent / "fireworks.env.csv"
    out_path = tmp_path / "from_csv.haptic.json"
    code, out, _ = run(["clip", csv, "-o", out_path, "--carrier", 250], capsys)
    assert code == 0
    clip = parse_clip(out_path)
    assert clip.metadata["carrier_hz"] == 250.0
    assert "points=" in out


def test_clip_rejects_bad_csv(tmp_path, capsys):
    csv = tmp_path / "e.csv"
    csv.write_text("time,amplitude\n0,0.1\n0.01,1.5\n")
    code, _, err = run(["clip", csv], capsys)
    assert code == 2
    assert "[0, 1]" in err


def test_corpus_writes_four_stimuli(tmp_path, capsys):
    assert run(["corpus", tmp_path], capsys)[0] == 0
    assert sorted(p.name for p in tmp_path.glob("*.wav")) == sorted(
        f"{n}.wav" for n in GENERATORS)


def test_usage_error_exit_code(capsys):
    assert cli.main(["convert"]) == 2
    assert cli.main(["frobnicate"]) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "ism_haptics", "tone", "-o",
                           str(tmp_path / "t.wav")], capture_output=True, text=True)
    assert proc.returncode == 0
    assert (tmp_path / "t.wav").is_file()
