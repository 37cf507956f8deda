"""Run configuration: built-in defaults < config file < command-line flags.

Config files are ``key = value`` lines; ``#`` starts a comment. Relative
paths are resolved against the directory holding the config file.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import InvalidArgument
from .pipeline import IsmConfig

MODEL_DIR_ENV = "ISM_MODEL_DIR"
REPORT_FORMATS = ("text", "json-lines")


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


# key -> (RunConfig attribute, parser)
KEYS = {
    "carrier": ("carrier_hz", float),
    "carrier_hz": ("carrier_hz", float),
    "segment_len": ("segment_len", float),
    "hop": ("hop", float),
    "hf_cutoff": ("hf_cutoff_hz", float),
    "hf_cutoff_hz": ("hf_cutoff_hz", float),
    "envelope_cutoff": ("envelope_cutoff_hz", float),
    "envelope_cutoff_hz": ("envelope_cutoff_hz", float),
    "gain": ("output_gain", float),
    "output_gain": ("output_gain", float),
    "passthrough": ("lowpass_passthrough", _bool),
    "lowpass_passthrough": ("lowpass_passthrough", _bool),
    "allow_any_carrier": ("allow_any_carrier", _bool),
    "amplitude_mapping": ("amplitude_mapping", str),
    "mapping": ("amplitude_mapping", str),
    "threshold": ("threshold_path", str),
    "exponent": ("exponent_path", str),
    "amp_map": ("amp_map_path", str),
    "freq_map": ("freq_map_path", str),
    "max_points": ("max_points", int),
    "report": ("report", str),
    "sample_rate": ("sample_rate", int),
    "bits": ("bits", int),
}
PATH_ATTRS = ("threshold_path", "exponent_path", "amp_map_path", "freq_map_path")
ISM_ATTRS = tuple(f.name for f in fields(IsmConfig))


@dataclass
class RunConfig:
    carrier_hz: float = IsmConfig.carrier_hz
    segment_len: float = IsmConfig.segment_len
    hop: float = IsmConfig.hop
    hf_cutoff_hz: float = IsmConfig.hf_cutoff_hz
    envelope_cutoff_hz: float = IsmConfig.envelope_cutoff_hz
    lowpass_passthrough: bool = IsmConfig.lowpass_passthrough
    window: str = IsmConfig.window
    output_gain: float = IsmConfig.output_gain
    allow_any_carrier: bool = IsmConfig.allow_any_carrier
    amplitude_mapping: str = IsmConfig.amplitude_mapping
    threshold_path: str | None = None
    exponent_path: str | None = None
    amp_map_path: str | None = None
    freq_map_path: str | None = None
    max_points: int = 2000
    report: str = "text"
    sample_rate: int | None = None
    bits: int | None = None
    sources: dict = field(default_factory=dict)

    def ism(self) -> IsmConfig:
        return IsmConfig(**{k: getattr(self, k) for k in ISM_ATTRS})

    def validate(self) -> "RunConfig":
        self.ism()
        if self.report not in REPORT_FORMATS:
            raise InvalidArgument(f"report must be one of {REPORT_FORMATS}")
        if self.max_points < 2:
            raise InvalidArgument("max_points must be >= 2")
        if (self.threshold_path is None) != (self.exponent_path is None):
            raise InvalidArgument("threshold and exponent curves must be given together")
        for attr in PATH_ATTRS:
            p = getattr(self, attr)
            if p is not None and not Path(p).is_file():
                raise InvalidArgument(f"{attr.replace('_path', '')} file not found: {p}")
        return self

    def model_paths(self):
        """Curve files to load, or None for the built-in model."""
        if self.threshold_path is not None:
            return self.threshold_path, self.exponent_path
        env_dir = os.environ.get(MODEL_DIR_ENV)
        if env_dir:
            d = Path(env_dir)
            return str(d / "threshold.txt"), str(d / "exponent.txt")
        return None


def parse_config_text(text: str, base_dir: Path | None = None,
                      source: str = "<config>") -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidArgument(f"{source}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip().lower().replace("-", "_")
        value = value.strip()
        if key not in KEYS:
            raise InvalidArgument(f"{source}:{lineno}: unknown key {key!r}")
        attr, conv = KEYS[key]
        try:
            parsed = conv(value)
        except ValueError as e:
            raise InvalidArgument(f"{source}:{lineno}: {key}: {e}") from None
        if attr in PATH_ATTRS and base_dir is not None and not Path(parsed).is_absolute():
            parsed = str(base_dir / parsed)
        out[attr] = parsed
    return out


def load_config_file(path) -> dict:
    path = Path(path)
    return parse_config_text(path.read_text(), path.parent, str(path))


def build_run_config(file_values: dict | None = None,
                     flag_values: dict | None = None) -> RunConfig:
    """Layers file values and then explicit flags (``None`` = not given)."""
    cfg = RunConfig()
    sources = {}
    for layer, values in (("file", file_values or {}), ("flag", flag_values or {})):
        changes = {k: v for k, v in values.items() if v is not None}
        cfg = replace(cfg, **changes)
        sources.update({k: layer for k in changes})
    cfg.sources = sources
    return cfg
