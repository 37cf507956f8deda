"""Haptic clip documents: Amplitude and Frequency envelopes as JSON.

The on-disk layout mirrors the publicly documented ``.haptic`` clip layout
(continuous signal with ``amplitude`` and ``frequency`` envelopes)::

    {
      "version": {"major": 1, "minor": 0, "patch": 0},
      "metadata": {...},
      "signals": {"continuous": {"envelopes": {
          "amplitude": [{"time": 0.0, "amplitude": 0.25}, ...],
          "frequency": [{"time": 0.0, "frequency": 0.66}, ...]}}}
    }

All values are normalised to [0, 1]. Frequency values are carrier Hz passed
through the device calibration, not raw Hz. The JSON Schema ships as
``ism_haptics/data/haptic_clip.schema.json``.
"""

from __future__ import annotations

import heapq
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .errors import (ClipInvariantError, ClipSchemaError, ClipSyntaxError,
                     InvalidArgument, SimplificationWarning)
from .perception import read_table
from .pipeline import AmplitudeEnvelope

SCHEMA_VERSION = "1.0.0"
DEFAULT_MAX_POINTS = 2000
DEFAULT_TOLERANCE = 0.01
DEFAULT_FREQ_FULL_SCALE_HZ = 300.0

_AMP = "signals.continuous.envelopes.amplitude"
_FREQ = "signals.continuous.envelopes.frequency"


@dataclass(frozen=True)
class EnvelopePoint:
    time: float
    value: float


@dataclass
class HapticClip:
    amplitude_points: list[EnvelopePoint]
    frequency_points: list[EnvelopePoint]
    version: str = SCHEMA_VERSION
    metadata: dict = field(default_factory=dict)
    # Unknown top-level fields, kept so that parse -> write loses nothing.
    extra: dict = field(default_factory=dict)

    @property
    def duration(self) -> float:
        return self.amplitude_points[-1].time if self.amplitude_points else 0.0

    def validate(self) -> None:
        _check_version(self.version)
        for name, pts in ((_AMP, self.amplitude_points), (_FREQ, self.frequency_points)):
            if not pts:
                raise ClipInvariantError(name, "envelope must not be empty")
            for i, p in enumerate(pts):
                if not (math.isfinite(p.time) and math.isfinite(p.value)):
                    raise ClipInvariantError(name, "non-finite value", i)
                if p.time < 0:
                    raise ClipInvariantError(name, f"negative time {p.time!r}", i)
                if not 0.0 <= p.value <= 1.0:
                    raise ClipInvariantError(name, f"value {p.value!r} outside [0, 1]", i)
                if i and p.time < pts[i - 1].time:
                    raise ClipInvariantError(
                        name, f"time {p.time!r} precedes previous point "
                        f"({pts[i - 1].time!r})", i)
            if pts[0].time != 0.0:
                raise ClipInvariantError(name, "first point must be at time 0", 0)
        if self.frequency_points[-1].time > self.amplitude_points[-1].time:
            raise ClipInvariantError(
                _FREQ, "frequency envelope outlasts the amplitude envelope",
                len(self.frequency_points) - 1)


def _check_version(version: str):
    parts = str(version).split(".")
    if len(parts) != 3 or not all(p.isdigit() for p in parts):
        raise ClipSchemaError("version", f"expected MAJOR.MINOR.PATCH, got {version!r}")
    if int(parts[0]) != int(SCHEMA_VERSION.split(".")[0]):
        raise ClipSchemaError("version", f"unsupported major version {parts[0]}")


class PiecewiseLinearMap:
    """Monotone map through ``(x, y)`` knots with ``(0, 0)`` and ``(max, 1)``."""

    def __init__(self, points: Sequence[tuple[float, float]]):
        pts = [(float(x), float(y)) for x, y in points]
        if len(pts) < 2:
            raise InvalidArgument("calibration map needs at least 2 points")
        xs = np.array([p[0] for p in pts])
        ys = np.array([p[1] for p in pts])
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
            raise InvalidArgument("calibration points must be finite")
        if np.any(np.diff(xs) <= 0):
            raise InvalidArgument("calibration inputs must be strictly increasing")
        if np.any(np.diff(ys) < 0):
            raise InvalidArgument("calibration map must be non-decreasing")
        if xs[0] != 0 or ys[0] != 0 or ys[-1] != 1:
            raise InvalidArgument("calibration map must send 0 -> 0 and its maximum -> 1")
        self.xs = xs
        self.ys = ys

    @classmethod
    def from_file(cls, path) -> "PiecewiseLinearMap":
        rows, _ = read_table(path)
        return cls(rows)

    @property
    def domain_max(self) -> float:
        return float(self.xs[-1])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(~np.isfinite(x)) or np.any(x < 0) or np.any(x > self.xs[-1]):
            raise InvalidArgument(
                f"calibration input outside domain [0, {self.xs[-1]:g}]")
        out = np.interp(x, self.xs, self.ys)
        return out if out.ndim else float(out)


@dataclass
class DeviceCalibration:
    """Physical-to-SDK parameter maps. Defaults are identity-like."""

    amp_map: PiecewiseLinearMap = field(
        default_factory=lambda: PiecewiseLinearMap([(0.0, 0.0), (1.0, 1.0)]))
    freq_map: PiecewiseLinearMap = field(
        default_factory=lambda: PiecewiseLinearMap(
            [(0.0, 0.0), (DEFAULT_FREQ_FULL_SCALE_HZ, 1.0)]))

    def __post_init__(self):
        if self.amp_map.domain_max != 1.0:
            raise InvalidArgument("amplitude calibration must be defined on [0, 1]")

    @classmethod
    def from_files(cls, amp_path=None, freq_path=None) -> "DeviceCalibration":
        cal = cls()
        if amp_path is not None:
            cal = cls(PiecewiseLinearMap.from_file(amp_path), cal.freq_map)
        if freq_path is not None:
            cal = cls(cal.amp_map, PiecewiseLinearMap.from_file(freq_path))
        return cal


def simplify_polyline(t: np.ndarray, v: np.ndarray, tolerance: float = DEFAULT_TOLERANCE,
                      max_points: int = DEFAULT_MAX_POINTS) -> tuple[np.ndarray, float]:
    """Greedy max-error point selection.

    Starting from the two end points, repeatedly keeps the sample furthest
    (vertically) from the current piecewise-linear reconstruction until every
    sample is within ``tolerance`` or ``max_points`` is reached.

    Returns the kept indices and the final L-infinity error.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    n = v.size
    if n <= 2:
        return np.arange(n), 0.0
    if max_points < 2:
        raise InvalidArgument("max_points must be >= 2")

    def worst(i, j):
        seg_t = t[i + 1:j]
        chord = v[i] + (v[j] - v[i]) * (seg_t - t[i]) / (t[j] - t[i])
        err = np.abs(v[i + 1:j] - chord)
        k = int(np.argmax(err))
        return float(err[k]), i + 1 + k

    heap = []

    def push(i, j):
        if j - i >= 2:
            e, k = worst(i, j)
            heapq.heappush(heap, (-e, i, j, k))

    kept = [0, n - 1]
    push(0, n - 1)
    while heap and len(kept) < max_points:
        if -heap[0][0] <= tolerance:
            break
        _, i, j, k = heapq.heappop(heap)
        kept.append(k)
        push(i, k)
        push(k, j)
    max_err = -heap[0][0] if heap else 0.0
    return np.array(sorted(kept)), max_err


def to_haptic_clip(ae: AmplitudeEnvelope, cal: DeviceCalibration | None = None,
                   max_points: int = DEFAULT_MAX_POINTS,
                   tolerance: float = DEFAULT_TOLERANCE,
                   metadata: dict | None = None) -> HapticClip:
    if len(ae) == 0:
        raise InvalidArgument("amplitude envelope is empty")
    if max_points < 2:
        raise InvalidArgument("max_points must be >= 2")
    cal = cal or DeviceCalibration()
    values = np.atleast_1d(cal.amp_map(ae.values))
    times = np.arange(values.size) / ae.rate
    if values.size == 1:
        values = np.repeat(values, 2)
        times = np.array([0.0, 1.0 / ae.rate])
    idx, err = simplify_polyline(times, values, tolerance, max_points)
    if err > tolerance:
        warnings.warn(f"point budget {max_points} reached with error {err:.4g} "
                      f"> tolerance {tolerance:g}", SimplificationWarning, stacklevel=2)
    amp_pts = [EnvelopePoint(float(times[i]), float(values[i])) for i in idx]
    f_val = float(cal.freq_map(ae.carrier_hz))
    freq_pts = [EnvelopePoint(0.0, f_val), EnvelopePoint(amp_pts[-1].time, f_val)]
    meta = {
        "carrier_hz": float(ae.carrier_hz),
        "frequency_units": "normalized",
        "max_error": float(err),
        "tool_version": __version__,
    }
    meta.update(metadata or {})
    return HapticClip(amp_pts, freq_pts, SCHEMA_VERSION, meta)


def clip_to_dict(clip: HapticClip) -> dict:
    major, minor, patch = (int(p) for p in clip.version.split("."))
    doc = {
        "version": {"major": major, "minor": minor, "patch": patch},
        "metadata": {k: clip.metadata[k] for k in sorted(clip.metadata)},
        "signals": {"continuous": {"envelopes": {
            "amplitude": [{"time": float(p.time), "amplitude": float(p.value)}
                          for p in clip.amplitude_points],
            "frequency": [{"time": float(p.time), "frequency": float(p.value)}
                          for p in clip.frequency_points],
        }}},
    }
    for k in sorted(clip.extra):
        doc[k] = clip.extra[k]
    return doc


def dumps_clip(clip: HapticClip) -> str:
    """Serialises deterministically; floats use the shortest round-trip repr."""
    clip.validate()
    return json.dumps(clip_to_dict(clip), indent=2, ensure_ascii=False,
                      allow_nan=False) + "\n"


def write_clip(clip: HapticClip, path) -> None:
    text = dumps_clip(clip)  # validates before anything touches the disk
    Path(path).write_text(text, encoding="utf-8")


def _obj(doc, name):
    if not isinstance(doc, dict):
        raise ClipSchemaError(name, f"expected an object, got {type(doc).__name__}")
    return doc


def _get(doc, key, name):
    if key not in doc:
        raise ClipSchemaError(f"{name}.{key}" if name else key, "missing required field")
    return doc[key]


def _number(x, name):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ClipSchemaError(name, f"expected a number, got {json.dumps(x)}")
    return float(x)


def _only(doc, allowed, name):
    for k in doc:
        if k not in allowed:
            raise ClipSchemaError(f"{name}.{k}", "unknown field")


def _points(raw, name, value_key):
    if not isinstance(raw, list):
        raise ClipSchemaError(name, "expected an array of points")
    out = []
    for i, p in enumerate(raw):
        where = f"{name}[{i}]"
        _obj(p, where)
        _only(p, ("time", value_key), where)
        out.append(EnvelopePoint(_number(_get(p, "time", where), f"{where}.time"),
                                 _number(_get(p, value_key, where), f"{where}.{value_key}")))
    return out


def clip_from_dict(doc) -> HapticClip:
    _obj(doc, "<root>")
    ver = _obj(_get(doc, "version", ""), "version")
    _only(ver, ("major", "minor", "patch"), "version")
    parts = []
    for k in ("major", "minor", "patch"):
        x = _get(ver, k, "version")
        if isinstance(x, bool) or not isinstance(x, int) or x < 0:
            raise ClipSchemaError(f"version.{k}", "expected a non-negative integer")
        parts.append(str(x))
    metadata = dict(_obj(doc.get("metadata", {}), "metadata"))
    signals = _obj(_get(doc, "signals", ""), "signals")
    _only(signals, ("continuous",), "signals")
    cont = _obj(_get(signals, "continuous", "signals"), "signals.continuous")
    _only(cont, ("envelopes",), "signals.continuous")
    env = _obj(_get(cont, "envelopes", "signals.continuous"), "signals.continuous.envelopes")
    _only(env, ("amplitude", "frequency"), "signals.continuous.envelopes")
    amp = _points(_get(env, "amplitude", "signals.continuous.envelopes"), _AMP, "amplitude")
    freq = _points(_get(env, "frequency", "signals.continuous.envelopes"), _FREQ, "frequency")
    extra = {k: v for k, v in doc.items() if k not in ("version", "metadata", "signals")}
    clip = HapticClip(amp, freq, ".".join(parts), metadata, extra)
    clip.validate()
    return clip


def loads_clip(text: str) -> HapticClip:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ClipSyntaxError(e.msg, e.lineno, e.colno) from None
    return clip_from_dict(doc)


def parse_clip(path) -> HapticClip:
    """Reads and fully validates a clip file."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        return loads_clip(text)
    except ClipSyntaxError as e:
        err = ClipSyntaxError(f"{path}: {e}")
        err.line, err.column = e.line, e.column
        raise err from None


@dataclass
class LintReport:
    point_count: int
    frequency_point_count: int
    duration: float
    min_spacing: float
    implied_bandwidth_hz: float
    value_range: tuple[float, float]
    max_fluctuation_hz: float
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.warnings

    def as_dict(self) -> dict:
        return {
            "point_count": self.point_count,
            "frequency_point_count": self.frequency_point_count,
            "duration": self.duration,
            "min_spacing": self.min_spacing,
            "implied_bandwidth_hz": self.implied_bandwidth_hz,
            "value_range": list(self.value_range),
            "max_fluctuation_hz": self.max_fluctuation_hz,
            "warnings": list(self.warnings),
        }


def turning_points(v: np.ndarray, min_swing: float) -> list[int]:
    """Indices of alternating extrema separated by at least ``min_swing``."""
    out = []
    if v.size < 2:
        return out
    hi = lo = v[0]
    hi_i = lo_i = 0
    rising = None
    for i in range(1, v.size):
        x = v[i]
        if x > hi:
            hi, hi_i = x, i
        if x < lo:
            lo, lo_i = x, i
        if rising is not False and x < hi - min_swing:
            out.append(hi_i)
            lo, lo_i, rising = x, i, False
        elif rising is not True and x > lo + min_swing:
            out.append(lo_i)
            hi, hi_i, rising = x, i, True
    return out


def lint_clip(clip: HapticClip, envelope_cutoff_hz: float = 100.0,
              min_swing: float = 2 * DEFAULT_TOLERANCE) -> LintReport:
    """Checks how fast the amplitude envelope fluctuates.

    A fluctuation is a swing of at least ``min_swing`` between alternate
    extrema; two extrema ``dt`` apart imply a ``1 / (2 dt)`` Hz fluctuation.
    Swings below twice the simplification tolerance are not counted.
    """
    t = np.array([p.time for p in clip.amplitude_points])
    v = np.array([p.value for p in clip.amplitude_points])
    gaps = np.diff(t)
    positive = gaps[gaps > 0]
    min_spacing = float(positive.min()) if positive.size else 0.0
    bandwidth = 1.0 / (2 * min_spacing) if min_spacing > 0 else 0.0
    found = []
    # The first sample bounds the clip; it is not an extremum of the envelope.
    tp = [i for i in turning_points(v, min_swing) if i != 0]
    worst = 0.0
    for a, b in zip(tp, tp[1:]):
        dt = t[b] - t[a]
        f = math.inf if dt <= 0 else 1.0 / (2 * dt)
        worst = max(worst, f)
        if f > envelope_cutoff_hz:
            found.append((a, b, f))
    msgs = []
    if found:
        a, b, f = max(found, key=lambda x: x[2])
        msgs.append(
            f"{len(found)} fluctuation(s) above {envelope_cutoff_hz:g} Hz; fastest "
            f"{f:.1f} Hz between points {a} and {b} "
            f"(t={t[a]:.6g}s..{t[b]:.6g}s)")
    return LintReport(
        point_count=len(clip.amplitude_points),
        frequency_point_count=len(clip.frequency_points),
        duration=clip.duration,
        min_spacing=min_spacing,
        implied_bandwidth_hz=bandwidth,
        value_range=(float(v.min()), float(v.max())) if v.size else (0.0, 0.0),
        max_fluctuation_hz=worst,
        warnings=msgs,
    )
