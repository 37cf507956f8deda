"""Pacinian perceptual intensity model.

Perceived intensity of a sinusoidal vibration of amplitude ``a`` at
frequency ``f`` is

    I(f, a) = ((a / A_T(f)) ** 2) ** alpha(f)

where ``A_T`` is the detection threshold and ``alpha`` a frequency-dependent
exponent. Both curves are tabulated data loaded from plain-text files; the
built-in tables live in ``ism_haptics/data``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArgument

DEFAULT_UNITS = "normalized"


def read_table(path) -> tuple[list[tuple[float, float]], dict[str, str]]:
    """Reads a two-column ``x value`` table.

    Blank lines are skipped and ``#`` starts a comment. Comment lines of the
    form ``# key: value`` are returned as header tags (e.g. ``units``).
    """
    text = Path(path).read_text()
    return parse_table(text, source=str(path))


def parse_table(text: str, source: str = "<table>"):
    rows = []
    tags = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line, _, comment = raw.partition("#")
        comment = comment.strip()
        if not line.strip() and ":" in comment:
            key, _, value = comment.partition(":")
            key = key.strip().lower()
            if key.isidentifier():
                tags[key] = value.strip()
        if not line.strip():
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise InvalidArgument(
                f"{source}:{lineno}: expected two columns, got {len(parts)}")
        try:
            rows.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise InvalidArgument(
                f"{source}:{lineno}: non-numeric value {line.strip()!r}") from None
    return rows, tags


@dataclass(frozen=True)
class FrequencyCurve:
    """Positive curve over frequency, linear in log-log coordinates.

    Queries outside the knot range are clamped to the end values.
    """

    freqs: np.ndarray
    values: np.ndarray
    _log_f: np.ndarray = field(init=False, repr=False, compare=False)
    _log_v: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        f = np.array(self.freqs, dtype=float)
        v = np.array(self.values, dtype=float)
        if f.ndim != 1 or f.shape != v.shape:
            raise InvalidArgument("curve needs matching 1-D frequency/value arrays")
        if f.size < 2:
            raise InvalidArgument("curve needs at least 2 points")
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(v))):
            raise InvalidArgument("curve points must be finite")
        if np.any(f <= 0):
            raise InvalidArgument("curve frequencies must be > 0")
        if np.any(np.diff(f) <= 0):
            raise InvalidArgument("curve frequencies must be strictly increasing")
        if np.any(v <= 0):
            raise InvalidArgument("curve values must be > 0")
        f.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "freqs", f)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "_log_f", np.log(f))
        object.__setattr__(self, "_log_v", np.log(v))

    @classmethod
    def from_points(cls, points: Iterable[tuple[float, float]]) -> "FrequencyCurve":
        pts = list(points)
        return cls(np.array([p[0] for p in pts]), np.array([p[1] for p in pts]))

    @classmethod
    def from_file(cls, path) -> "FrequencyCurve":
        rows, _ = read_table(path)
        return cls.from_points(rows)

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.freqs.tolist(), self.values.tolist()))

    def __call__(self, f):
        f = np.asarray(f, dtype=float)
        fc = np.clip(f, self.freqs[0], self.freqs[-1])
        out = np.exp(np.interp(np.log(fc), self._log_f, self._log_v))
        # Knot queries return the stored value bit-exactly.
        idx = np.clip(np.searchsorted(self.freqs, fc), 0, self.freqs.size - 1)
        out = np.where(self.freqs[idx] == fc, self.values[idx], out)
        return out if out.ndim else float(out)


def _check_freq(f):
    f = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(f)) or np.any(f <= 0):
        raise InvalidArgument("frequency must be finite and > 0")
    return f


@dataclass(frozen=True)
class PerceptionModel:
    threshold: FrequencyCurve
    exponent: FrequencyCurve
    valid_band: tuple[float, float] | None = None
    units: str = DEFAULT_UNITS

    def __post_init__(self):
        band = self.valid_band
        if band is None:
            band = (max(self.threshold.freqs[0], self.exponent.freqs[0]),
                    min(self.threshold.freqs[-1], self.exponent.freqs[-1]))
        lo, hi = float(band[0]), float(band[1])
        if not (0 < lo < hi):
            raise InvalidArgument(f"invalid valid_band {band!r}")
        object.__setattr__(self, "valid_band", (lo, hi))
        # Exponent must stay in (0, 2] everywhere in the band; the curve is
        # piecewise monotone between knots so knots plus endpoints suffice.
        probe = np.concatenate([[lo, hi], self.exponent.freqs])
        probe = probe[(probe >= lo) & (probe <= hi)]
        ex = self.exponent(probe)
        if np.any(ex <= 0) or np.any(ex > 2):
            raise InvalidArgument("exponent values must lie in (0, 2]")

    def _clamp(self, f):
        return np.clip(_check_freq(f), *self.valid_band)

    def threshold_at(self, f):
        """Detection threshold amplitude at ``f`` (clamped to the valid band)."""
        return self.threshold(self._clamp(f))

    def exponent_at(self, f):
        return self.exponent(self._clamp(f))

    def intensity(self, f, a):
        """Perceptual intensity of amplitude ``a`` at frequency ``f``."""
        a = np.asarray(a, dtype=float)
        if np.any(a < 0) or not np.all(np.isfinite(a)):
            raise InvalidArgument("amplitude must be finite and >= 0")
        fc = self._clamp(f)
        ratio = a / self.threshold(fc)
        out = np.power(ratio * ratio, self.exponent(fc))
        return out if np.ndim(out) else float(out)

    def amplitude_for_intensity(self, f, i):
        """Inverse of :meth:`intensity` at the same frequency."""
        i = np.asarray(i, dtype=float)
        if np.any(i < 0) or not np.all(np.isfinite(i)):
            raise InvalidArgument("intensity must be finite and >= 0")
        fc = self._clamp(f)
        out = self.threshold(fc) * np.power(i, 1.0 / (2.0 * self.exponent(fc)))
        return out if np.ndim(out) else float(out)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for curve in (self.threshold, self.exponent):
            h.update(curve.freqs.tobytes())
            h.update(curve.values.tobytes())
        h.update(np.array(self.valid_band).tobytes())
        return h.hexdigest()[:16]


def threshold_at(model: PerceptionModel, f):
    return model.threshold_at(f)


def intensity(model: PerceptionModel, f, a):
    return model.intensity(f, a)


def amplitude_for_intensity(model: PerceptionModel, f, i):
    return model.amplitude_for_intensity(f, i)


def load_model(threshold_path, exponent_path,
               valid_band: Sequence[float] | None = None) -> PerceptionModel:
    rows, tags = read_table(threshold_path)
    exp_rows, _ = read_table(exponent_path)
    return PerceptionModel(
        FrequencyCurve.from_points(rows),
        FrequencyCurve.from_points(exp_rows),
        tuple(valid_band) if valid_band is not None else None,
        units=tags.get("units", DEFAULT_UNITS),
    )


def model_from_dir(path) -> PerceptionModel:
    """Loads ``threshold.txt`` and ``exponent.txt`` from a directory."""
    path = Path(path)
    return load_model(path / "threshold.txt", path / "exponent.txt")


def default_model() -> PerceptionModel:
    """Built-in model over 100-1000 Hz, loaded from the shipped data files."""
    data = resources.files("ism_haptics") / "data"
    with resources.as_file(data / "threshold.txt") as t, \
            resources.as_file(data / "exponent.txt") as e:
        return load_model(t, e, valid_band=(100.0, 1000.0))
