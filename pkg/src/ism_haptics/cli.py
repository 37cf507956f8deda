"""Command-line front end.

Exit codes are shared by every subcommand: 0 success, 1 I/O error,
2 validation error. With ``--report json-lines`` each processed file yields
one JSON object per line on stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
import threading
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import (REPORT_FORMATS, RunConfig, build_run_config,
                     load_config_file)
from .corpus import GENERATORS
from .errors import (ClipError, ClippingWarning, DownmixWarning,
                     InvalidArgument, SimplificationWarning, WavError,
                     WavNotFound)
from .haptic import (DEFAULT_MAX_POINTS, DeviceCalibration, lint_clip,
                     parse_clip, to_haptic_clip, write_clip)
from .perception import default_model, load_model
from .pipeline import AmplitudeEnvelope, convert
from .signal_io import (WavSpec, make_stereo_stimulus, read_wav,
                        reference_tone, write_wav)

EXIT_OK = 0
EXIT_IO = 1
EXIT_INVALID = 2

_print_lock = threading.Lock()


class Reporter:
    def __init__(self, fmt: str = "text", out=None, err=None):
        self.fmt = fmt
        self.out = out or sys.stdout
        self.err = err or sys.stderr

    def record(self, event: str, text: str, **fields):
        if self.fmt == "json-lines":
            line = json.dumps({"event": event, **fields}, sort_keys=True, default=_jsonable)
        else:
            line = text
        with _print_lock:
            self.out.write(line + "\n")
            self.out.flush()

    def warn(self, msg: str):
        with _print_lock:
            self.err.write(f"warning: {msg}\n")
            self.err.flush()

    def error(self, msg: str):
        with _print_lock:
            self.err.write(f"error: {msg}\n")
            self.err.flush()


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, Path):
        return str(x)
    raise TypeError(type(x).__name__)


def _msg(path, exc) -> str:
    text = str(exc)
    return text if text.startswith(str(path)) else f"{path}: {text}"


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, WavNotFound):
        return EXIT_IO
    if isinstance(exc, (InvalidArgument, WavError, ClipError)):
        return EXIT_INVALID
    return EXIT_IO


def _add_pipeline_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("conversion")
    g.add_argument("--config", help="key = value config file")
    g.add_argument("--carrier", dest="carrier_hz", type=float,
                   help="carrier frequency in Hz (150-300; default 200)")
    g.add_argument("--segment-len", dest="segment_len", type=float,
                   help="analysis segment length in seconds (default 0.010)")
    g.add_argument("--hop", type=float, help="frame hop in seconds (default 0.00125)")
    g.add_argument("--hf-cutoff", dest="hf_cutoff_hz", type=float,
                   help="only bins above this frequency count (default 100 Hz)")
    g.add_argument("--envelope-cutoff", dest="envelope_cutoff_hz", type=float,
                   help="envelope fluctuation limit in Hz (default 100)")
    g.add_argument("--gain", dest="output_gain", type=float, help="output gain (default 1)")
    g.add_argument("--passthrough", dest="lowpass_passthrough", action="store_const",
                   const=True, help="add the sub-cutoff band of the input to the output")
    g.add_argument("--no-passthrough", dest="lowpass_passthrough", action="store_const",
                   const=False)
    g.add_argument("--allow-any-carrier", dest="allow_any_carrier", action="store_const",
                   const=True, help="permit carriers outside 150-300 Hz")
    g.add_argument("--mapping", dest="amplitude_mapping", choices=("analysis", "model"),
                   help="intensity-to-amplitude inverse (default analysis)")
    g.add_argument("--threshold", dest="threshold_path", help="threshold curve file")
    g.add_argument("--exponent", dest="exponent_path", help="exponent curve file")
    g.add_argument("--rate", dest="sample_rate", type=int,
                   help="required input sample rate (inputs are never resampled)")
    g.add_argument("--bits", type=int, choices=(16, 24, 32),
                   help="output sample format; 32 = float (default: as input)")
    g.add_argument("--report", choices=REPORT_FORMATS, help="report format (default text)")
    g.add_argument("--out-dir", help="write outputs here instead of next to the input")


def _add_clip_flags(p: argparse.ArgumentParser):
    p.add_argument("--amp-map", dest="amp_map_path", help="amplitude calibration table")
    p.add_argument("--freq-map", dest="freq_map_path", help="frequency calibration table")
    p.add_argument("--max-points", dest="max_points", type=int,
                   help=f"amplitude point budget (default {DEFAULT_MAX_POINTS})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ism-haptics",
        description="Convert high-frequency audio into single-carrier vibration.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="audio WAV -> ISM vibration WAV (+ haptic clip)")
    p.add_argument("inputs", nargs="+", help="input WAV files")
    _add_pipeline_flags(p)
    _add_clip_flags(p)
    p.add_argument("--clip", action="store_true", help="also write <stem>.haptic.json")
    p.add_argument("--envelope", action="store_true",
                   help="also write the amplitude envelope as <stem>.env.csv")
    p.add_argument("--jobs", type=int, default=1, help="files converted in parallel")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("stereo", help="write <stem>.stim.wav: left audio, right vibration")
    p.add_argument("inputs", nargs="+")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_stereo)

    p = sub.add_parser("clip", help="envelope CSV -> haptic clip")
    p.add_argument("input", help="CSV with time,amplitude columns")
    p.add_argument("-o", "--output", help="output path (default <stem>.haptic.json)")
    p.add_argument("--config")
    p.add_argument("--carrier", dest="carrier_hz", type=float)
    p.add_argument("--allow-any-carrier", dest="allow_any_carrier", action="store_const",
                   const=True)
    p.add_argument("--report", choices=REPORT_FORMATS)
    _add_clip_flags(p)
    p.set_defaults(func=cmd_clip)

    p = sub.add_parser("lint", help="validate haptic clips and check envelope bandwidth")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--config")
    p.add_argument("--envelope-cutoff", dest="envelope_cutoff_hz", type=float)
    p.add_argument("--strict", action="store_true", help="exit 2 when warnings are found")
    p.add_argument("--report", choices=REPORT_FORMATS)
    p.set_defaults(func=cmd_lint)

    p = sub.add_parser("tone", help="write a reference sine tone")
    p.add_argument("--freq", type=float, default=150.0)
    p.add_argument("--amp", type=float, default=0.5)
    p.add_argument("--duration", type=float, default=1.0)
    p.add_argument("--rate", type=int, default=48000)
    p.add_argument("--bits", type=int, choices=(16, 24, 32), default=16)
    p.add_argument("-o", "--output", default="tone.wav")
    p.add_argument("--report", choices=REPORT_FORMATS, default="text")
    p.set_defaults(func=cmd_tone)

    p = sub.add_parser("corpus", help="write the procedural test stimuli as WAV files")
    p.add_argument("out_dir")
    p.add_argument("--rate", type=int, default=48000)
    p.add_argument("--report", choices=REPORT_FORMATS, default="text")
    p.set_defaults(func=cmd_corpus)
    return parser


def _flag_values(args) -> dict:
    keys = ("carrier_hz", "segment_len", "hop", "hf_cutoff_hz", "envelope_cutoff_hz",
            "output_gain", "lowpass_passthrough", "allow_any_carrier",
            "amplitude_mapping", "threshold_path", "exponent_path", "amp_map_path",
            "freq_map_path", "max_points", "report", "sample_rate", "bits")
    return {k: getattr(args, k, None) for k in keys}


def resolve_config(args) -> RunConfig:
    file_values = load_config_file(args.config) if getattr(args, "config", None) else {}
    return build_run_config(file_values, _flag_values(args))


def _load_model(cfg: RunConfig):
    paths = cfg.model_paths()
    if paths is None:
        return default_model()
    for p in paths:
        if not Path(p).is_file():
            raise InvalidArgument(f"curve file not found: {p}")
    return load_model(*paths)


def _output_path(src: str, suffix: str, out_dir: str | None) -> Path:
    src = Path(src)
    stem = src.name[:-4] if src.name.lower().endswith(".wav") else src.stem
    base = Path(out_dir) if out_dir else src.parent
    return base / f"{stem}{suffix}"


def _read_input(path, cfg: RunConfig, rep: Reporter):
    signal, spec = read_wav(path)
    if spec.channels > 1:
        rep.warn(f"{path}: downmixed {spec.channels} channels to mono")
    if cfg.sample_rate is not None and spec.sample_rate != cfg.sample_rate:
        raise InvalidArgument(
            f"{path}: sample rate {spec.sample_rate} Hz does not match the configured "
            f"{cfg.sample_rate} Hz (resample the input first)")
    return signal, spec


def write_envelope_csv(ae: AmplitudeEnvelope, path) -> None:
    lines = [f"# carrier_hz={ae.carrier_hz!r} rate_hz={ae.rate!r}", "time,amplitude"]
    for k, v in enumerate(ae.values.tolist()):
        lines.append(f"{k / ae.rate!r},{v!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_envelope_csv(path, carrier_hz: float) -> AmplitudeEnvelope:
    times, values = [], []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [s.strip() for s in line.split(",")]
        if len(parts) != 2:
            raise InvalidArgument(f"{path}:{lineno}: expected 'time,amplitude'")
        try:
            t, v = float(parts[0]), float(parts[1])
        except ValueError:
            if not times:
                continue  # header row
            raise InvalidArgument(f"{path}:{lineno}: non-numeric row") from None
        times.append(t)
        values.append(v)
    if len(times) < 2:
        raise InvalidArgument(f"{path}: need at least two envelope samples")
    t = np.array(times)
    v = np.array(values)
    dt = np.diff(t)
    if t[0] != 0 or np.any(dt <= 0) or np.ptp(dt) > 1e-6 * dt.mean():
        raise InvalidArgument(f"{path}: times must start at 0 and be uniformly spaced")
    if np.any(v < 0) or np.any(v > 1):
        raise InvalidArgument(f"{path}: amplitudes must lie in [0, 1]")
    rate = (t.size - 1) / t[-1]
    return AmplitudeEnvelope(v, rate, carrier_hz)


def _calibration(cfg: RunConfig) -> DeviceCalibration:
    return DeviceCalibration.from_files(cfg.amp_map_path, cfg.freq_map_path)


def _convert_one(path, cfg, model, args, rep: Reporter) -> int:
    try:
        signal, spec = _read_input(path, cfg, rep)
        result = convert(signal, model, cfg.ism())
        r = result.report
        bits = cfg.bits or spec.bits
        out = _output_path(path, ".ism.wav", args.out_dir)
        write_wav(result.output, WavSpec(signal.sample_rate, bits, 1), out)
        outputs = {"wav": str(out)}
        if args.clip:
            clip = to_haptic_clip(
                result.amplitude, _calibration(cfg), cfg.max_points,
                metadata={"source": Path(path).name, "config_hash": r.config_hash})
            clip_path = _output_path(path, ".haptic.json", args.out_dir)
            write_clip(clip, clip_path)
            outputs["clip"] = str(clip_path)
            if clip.metadata["max_error"] > 0.01:
                rep.warn(f"{path}: point budget exhausted, clip error "
                         f"{clip.metadata['max_error']:.4g}")
        if args.envelope:
            env_path = _output_path(path, ".env.csv", args.out_dir)
            write_envelope_csv(result.amplitude, env_path)
            outputs["envelope"] = str(env_path)
        if r.clip_count:
            rep.warn(f"{path}: {r.clip_count} samples clipped "
                     f"(envelope {r.envelope_clip_count}, output {r.output_clip_count})")
        rep.record(
            "convert",
            f"{path} -> {', '.join(outputs.values())}: clips={r.clip_count} "
            f"peak={r.peak:.4f} rt_factor={r.rt_factor:.1f}x "
            f"envelope_rate={r.envelope_rate_hz:g}Hz excess={r.length_excess_samples} "
            f"config={r.config_hash}",
            input=str(path), outputs=outputs, **r.as_dict())
        return EXIT_OK
    except (InvalidArgument, WavError, ClipError, OSError) as exc:
        rep.error(_msg(path, exc))
        return _exit_code(exc)


def _worst(codes) -> int:
    codes = list(codes)
    if EXIT_INVALID in codes:
        return EXIT_INVALID
    return max(codes, default=EXIT_OK)


def cmd_convert(args, rep: Reporter) -> int:
    cfg = resolve_config(args).validate()
    rep.fmt = cfg.report
    model = _load_model(cfg)
    _calibration(cfg)
    if args.jobs < 1:
        raise InvalidArgument("--jobs must be >= 1")
    if args.jobs == 1 or len(args.inputs) == 1:
        codes = [_convert_one(p, cfg, model, args, rep) for p in args.inputs]
    else:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            codes = list(pool.map(lambda p: _convert_one(p, cfg, model, args, rep),
                                  args.inputs))
    return _worst(codes)


def cmd_stereo(args, rep: Reporter) -> int:
    cfg = resolve_config(args).validate()
    rep.fmt = cfg.report
    model = _load_model(cfg)
    codes = []
    for path in args.inputs:
        try:
            signal, spec = _read_input(path, cfg, rep)
            result = convert(signal, model, cfg.ism())
            stim = make_stereo_stimulus(signal, result.output)
            out = _output_path(path, ".stim.wav", args.out_dir)
            write_wav(stim, WavSpec(signal.sample_rate, cfg.bits or spec.bits, 2), out)
            r = result.report
            if r.clip_count:
                rep.warn(f"{path}: {r.clip_count} samples clipped")
            rep.record(
                "stereo",
                f"{path} -> {out}: left=audio right=vibration channels=2 "
                f"clips={r.clip_count} peak={r.peak:.4f} rt_factor={r.rt_factor:.1f}x "
                f"config={r.config_hash}",
                input=str(path), output=str(out), channels=2,
                left="audio", right="vibration", **r.as_dict())
            codes.append(EXIT_OK)
        except (InvalidArgument, WavError, OSError) as exc:
            rep.error(_msg(path, exc))
            codes.append(_exit_code(exc))
    return _worst(codes)


def cmd_clip(args, rep: Reporter) -> int:
    cfg = resolve_config(args)
    cfg.lowpass_passthrough = False
    cfg.validate()
    rep.fmt = cfg.report
    ae = read_envelope_csv(args.input, cfg.carrier_hz)
    clip = to_haptic_clip(ae, _calibration(cfg), cfg.max_points,
                          metadata={"source": Path(args.input).name})
    out = Path(args.output) if args.output else Path(args.input).with_suffix(".haptic.json")
    write_clip(clip, out)
    rep.record("clip", f"{args.input} -> {out}: points={len(clip.amplitude_points)} "
               f"max_error={clip.metadata['max_error']:.4g}",
               input=str(args.input), output=str(out),
               points=len(clip.amplitude_points), max_error=clip.metadata["max_error"])
    return EXIT_OK


def cmd_lint(args, rep: Reporter) -> int:
    cfg = resolve_config(args)
    if cfg.report not in REPORT_FORMATS:
        raise InvalidArgument(f"report must be one of {REPORT_FORMATS}")
    rep.fmt = cfg.report
    codes = []
    for path in args.inputs:
        try:
            clip = parse_clip(path)
        except FileNotFoundError:
            rep.error(f"{path}: no such file")
            codes.append(EXIT_IO)
            continue
        except ClipError as exc:
            rep.error(_msg(path, exc))
            codes.append(EXIT_INVALID)
            continue
        lr = lint_clip(clip, cfg.envelope_cutoff_hz)
        for w in lr.warnings:
            rep.warn(f"{path}: {w}")
        rep.record(
            "lint",
            f"{path}: points={lr.point_count} duration={lr.duration:.4g}s "
            f"range=[{lr.value_range[0]:.4g}, {lr.value_range[1]:.4g}] "
            f"implied_bandwidth={lr.implied_bandwidth_hz:.1f}Hz "
            f"max_fluctuation={lr.max_fluctuation_hz:.1f}Hz warnings={len(lr.warnings)}",
            input=str(path), **lr.as_dict())
        codes.append(EXIT_INVALID if (args.strict and lr.warnings) else EXIT_OK)
    return _worst(codes)


def cmd_tone(args, rep: Reporter) -> int:
    rep.fmt = args.report
    tone = reference_tone(args.freq, args.amp, args.duration, args.rate)
    write_wav(tone, WavSpec(args.rate, args.bits, 1), args.output)
    rep.record("tone", f"{args.output}: {args.freq:g} Hz amp={args.amp:g} "
               f"{args.duration:g}s @ {args.rate} Hz",
               output=str(args.output), freq=args.freq, amp=args.amp,
               duration=args.duration, sample_rate=args.rate)
    return EXIT_OK


def cmd_corpus(args, rep: Reporter) -> int:
    rep.fmt = args.report
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, gen in GENERATORS.items():
        path = out_dir / f"{name}.wav"
        write_wav(gen(args.rate), WavSpec(args.rate, 16, 1), path)
        rep.record("corpus", str(path), output=str(path), name=name)
    return EXIT_OK


def main(argv=None, out=None, err=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INVALID if e.code not in (0, None) else EXIT_OK
    rep = Reporter("text", out, err)
    with warnings.catch_warnings():
        # Conditions are reported explicitly; library warnings would duplicate them.
        for cat in (DownmixWarning, ClippingWarning, SimplificationWarning):
            warnings.simplefilter("ignore", cat)
        try:
            return args.func(args, rep)
        except (InvalidArgument, WavError, ClipError) as exc:
            rep.error(str(exc))
            return _exit_code(exc)
        except OSError as exc:
            rep.error(str(exc))
            return EXIT_IO


def main_entry() -> None:
    sys.exit(main())
