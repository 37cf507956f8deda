"""Intensity Segment Modulation: audio in, single-carrier AM vibration out.

Stages, each usable on its own:

    segment -> spectrum -> segment_intensity     (per frame)
    intensity_series                             (whole signal)
    amplitude_series                             (intensity -> carrier amplitude)
    synthesize_am                                (amplitude -> waveform)
    convert                                      (all of the above)

Frames are centred on multiples of the hop (the signal is zero-padded by half
a segment on both sides), so envelope sample ``k`` describes the input around
``t = k * hop`` and the AM output stays time-aligned with its source.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
import warnings
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np
from scipy import signal as sps

from .errors import ClippingWarning, InvalidArgument
from .perception import PerceptionModel

MIN_RATE = 8000
MAX_RATE = 192000
CARRIER_RANGE = (150.0, 300.0)
MIN_FRAME = 16
_CHUNK_FRAMES = 4096
# Gaussian envelope smoother: attenuation at the cutoff, in dB (amplitude).
ENVELOPE_ATTENUATION_DB = 20.0


@dataclass(frozen=True)
class AudioSignal:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float)
        if x.ndim != 1:
            raise InvalidArgument("AudioSignal holds a single channel (1-D samples)")
        if not np.all(np.isfinite(x)):
            raise InvalidArgument("samples must be finite")
        rate = int(self.sample_rate)
        if rate != self.sample_rate or not MIN_RATE <= rate <= MAX_RATE:
            raise InvalidArgument(
                f"sample_rate must be an integer in [{MIN_RATE}, {MAX_RATE}], "
                f"got {self.sample_rate!r}")
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", rate)

    def __len__(self):
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class IsmConfig:
    carrier_hz: float = 200.0
    segment_len: float = 0.010
    hop: float = 0.00125
    hf_cutoff_hz: float = 100.0
    envelope_cutoff_hz: float = 100.0
    lowpass_passthrough: bool = False
    window: str = "hann"
    output_gain: float = 1.0
    allow_any_carrier: bool = False
    # "analysis": invert the analysis' own response to the carrier (leakage
    # into neighbouring bins included). "model": plain single-tone inverse.
    amplitude_mapping: str = "analysis"

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("carrier_hz", "segment_len", "hop", "hf_cutoff_hz",
                     "envelope_cutoff_hz", "output_gain"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise InvalidArgument(f"{name} must be a positive number, got {v!r}")
        lo, hi = CARRIER_RANGE
        if not self.allow_any_carrier and not lo <= self.carrier_hz <= hi:
            raise InvalidArgument(
                f"carrier_hz={self.carrier_hz:g} outside the allowed range "
                f"{lo:g}-{hi:g} Hz (use allow_any_carrier to override)")
        if self.hop > self.segment_len:
            raise InvalidArgument("hop must not exceed segment_len")
        if 1.0 / self.hop < 2.0 * self.envelope_cutoff_hz:
            raise InvalidArgument(
                f"envelope rate {1.0 / self.hop:g} Hz cannot represent "
                f"{self.envelope_cutoff_hz:g} Hz fluctuations; reduce hop")
        if self.hf_cutoff_hz >= self.carrier_hz:
            raise InvalidArgument("hf_cutoff_hz must be below carrier_hz")
        if self.window != "hann":
            raise InvalidArgument(f"unsupported window {self.window!r}")
        if self.amplitude_mapping not in ("analysis", "model"):
            raise InvalidArgument(
                f"amplitude_mapping must be 'analysis' or 'model', "
                f"got {self.amplitude_mapping!r}")

    def frame_sizes(self, sample_rate: int) -> tuple[int, int]:
        n_win = int(round(self.segment_len * sample_rate))
        n_hop = max(1, int(round(self.hop * sample_rate)))
        if n_win < MIN_FRAME:
            raise InvalidArgument(
                f"segment of {n_win} samples is shorter than {MIN_FRAME}")
        return n_win, min(n_hop, n_win)

    def as_dict(self) -> dict:
        return asdict(self)

    def digest(self, model: PerceptionModel | None = None) -> str:
        h = hashlib.sha256(json.dumps(self.as_dict(), sort_keys=True).encode())
        if model is not None:
            h.update(model.fingerprint().encode())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class Frames:
    data: np.ndarray          # (n_frames, n_win), already windowed
    t_center: np.ndarray
    sample_rate: int
    hop_samples: int

    def __len__(self):
        return self.data.shape[0]


@dataclass(frozen=True)
class SpectralFrame:
    bin_freqs: np.ndarray
    bin_amps: np.ndarray
    t_center: float = 0.0


@dataclass(frozen=True)
class IntensityEnvelope:
    values: np.ndarray
    rate: float
    t0: float = 0.0
    sample_rate: int | None = None
    n_samples: int | None = None

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class AmplitudeEnvelope:
    values: np.ndarray
    rate: float
    carrier_hz: float
    t0: float = 0.0
    clip_count: int = 0

    def __len__(self):
        return self.values.size

    @property
    def duration(self) -> float:
        return self.values.size / self.rate


@dataclass
class ConversionReport:
    clip_count: int
    envelope_clip_count: int
    output_clip_count: int
    peak: float
    envelope_rate_hz: float
    n_frames: int
    input_samples: int
    output_samples: int
    length_excess_samples: int
    config_hash: str
    elapsed_s: float = 0.0
    rt_factor: float = float("inf")

    def as_dict(self) -> dict:
        return asdict(self)


class ConversionResult(NamedTuple):
    output: AudioSignal
    intensity: IntensityEnvelope
    amplitude: AmplitudeEnvelope
    report: ConversionReport


def hann(n: int) -> np.ndarray:
    """Periodic Hann window (exact at DFT bin centres)."""
    return sps.get_window("hann", n, fftbins=True)


def _bin_scale(n_win: int) -> np.ndarray:
    """Per-bin factor turning |rfft| into single-sided sinusoid amplitude."""
    scale = np.full(n_win // 2 + 1, 2.0 / hann(n_win).sum())
    scale[0] *= 0.5
    if n_win % 2 == 0:
        scale[-1] *= 0.5
    return scale


def _padded(x: np.ndarray, n_win: int, n_hop: int):
    n_frames = -(-x.size // n_hop)
    lead = n_win // 2
    total = max((n_frames - 1) * n_hop + n_win, lead + x.size)
    buf = np.zeros(total)
    buf[lead:lead + x.size] = x
    return buf, n_frames


def _frame_block(buf, start, stop, n_win, n_hop, window):
    view = np.lib.stride_tricks.sliding_window_view(buf, n_win)[::n_hop]
    return view[start:stop] * window


def segment(signal: AudioSignal, cfg: IsmConfig) -> Frames:
    """Splits ``signal`` into Hann-windowed frames centred at ``k * hop``."""
    if len(signal) == 0:
        raise InvalidArgument("cannot segment an empty signal")
    sr = signal.sample_rate
    n_win, n_hop = cfg.frame_sizes(sr)
    buf, n_frames = _padded(signal.samples, n_win, n_hop)
    data = _frame_block(buf, 0, n_frames, n_win, n_hop, hann(n_win))
    t = np.arange(n_frames) * n_hop / sr
    return Frames(data, t, sr, n_hop)


def spectrum(frame: np.ndarray, sample_rate: int, t_center: float = 0.0) -> SpectralFrame:
    """Single-sided amplitude spectrum of one windowed frame.

    Scaled so a unit sinusoid sitting on a bin centre reads 1.0 in that bin.
    """
    frame = np.asarray(frame, dtype=float)
    n = frame.size
    if n < MIN_FRAME:
        raise InvalidArgument(f"frame must have at least {MIN_FRAME} samples")
    amps = np.abs(np.fft.rfft(frame)) * _bin_scale(n)
    return SpectralFrame(np.fft.rfftfreq(n, 1.0 / sample_rate), amps, t_center)


def segment_intensity(sf: SpectralFrame, model: PerceptionModel,
                      hf_cutoff_hz: float = 100.0) -> float:
    band = sf.bin_freqs > hf_cutoff_hz
    if not np.any(band):
        return 0.0
    return float(np.sum(model.intensity(sf.bin_freqs[band], sf.bin_amps[band])))


class _BandModel:
    """Per-bin threshold/exponent tables for one frame size and rate."""

    def __init__(self, model: PerceptionModel, n_win: int, sample_rate: int,
                 hf_cutoff_hz: float):
        freqs = np.fft.rfftfreq(n_win, 1.0 / sample_rate)
        self.mask = freqs > hf_cutoff_hz
        self.freqs = freqs[self.mask]
        self.threshold = model.threshold_at(self.freqs)
        self.exponent = model.exponent_at(self.freqs)
        self.scale = _bin_scale(n_win)[self.mask]

    def intensities(self, windowed: np.ndarray) -> np.ndarray:
        amps = np.abs(np.fft.rfft(windowed, axis=-1)[..., self.mask]) * self.scale
        ratio = amps / self.threshold
        return np.power(ratio * ratio, self.exponent).sum(axis=-1)


def intensity_series(signal: AudioSignal, model: PerceptionModel,
                     cfg: IsmConfig) -> IntensityEnvelope:
    """Summed perceptual intensity of every frame of ``signal``."""
    if len(signal) == 0:
        raise InvalidArgument("cannot analyse an empty signal")
    sr = signal.sample_rate
    n_win, n_hop = cfg.frame_sizes(sr)
    band = _BandModel(model, n_win, sr, cfg.hf_cutoff_hz)
    window = hann(n_win)
    buf, n_frames = _padded(signal.samples, n_win, n_hop)
    out = np.empty(n_frames)
    for start in range(0, n_frames, _CHUNK_FRAMES):
        stop = min(start + _CHUNK_FRAMES, n_frames)
        out[start:stop] = band.intensities(
            _frame_block(buf, start, stop, n_win, n_hop, window))
    return IntensityEnvelope(out, sr / n_hop, 0.0, sr, len(signal))


class CarrierResponse:
    """How the frame analysis sees a steady carrier of amplitude ``a``.

    A windowed carrier spreads over neighbouring bins, so the analysed
    intensity is ``sum_k C_k * a ** (2 * alpha_k)`` rather than the
    single-tone value. The coefficients are averaged over carrier phase.
    """

    def __init__(self, model: PerceptionModel, cfg: IsmConfig, sample_rate: int,
                 n_phases: int = 16):
        n_win, _ = cfg.frame_sizes(sample_rate)
        band = _BandModel(model, n_win, sample_rate, cfg.hf_cutoff_hz)
        n = np.arange(n_win)
        phases = 2 * np.pi * np.arange(n_phases) / n_phases
        tones = np.sin(2 * np.pi * cfg.carrier_hz * n / sample_rate + phases[:, None])
        gains = np.abs(np.fft.rfft(tones * hann(n_win), axis=1)[:, band.mask]) * band.scale
        coef = np.power(gains / band.threshold, 2 * band.exponent).mean(axis=0)
        keep = coef > coef.max() * 1e-12
        self.coef = coef[keep]
        self.power = 2 * band.exponent[keep]
        self._lead = int(np.argmax(self.coef))

    def intensity(self, a):
        a = np.asarray(a, dtype=float)
        return np.power(a[..., None], self.power) @ self.coef

    def amplitude(self, i, tol: float = 1e-13, max_iter: int = 60):
        """Inverts :meth:`intensity` by Newton's method in log-log space.

        ``log I(exp(u))`` is convex and increasing, so the iteration converges
        from any start.
        """
        i = np.asarray(i, dtype=float)
        out = np.zeros(i.shape)
        pos = i > 0
        if not np.any(pos):
            return out
        y = np.log(i[pos])
        u = (y - np.log(self.coef[self._lead])) / self.power[self._lead]
        for _ in range(max_iter):
            terms = self.coef * np.exp(np.multiply.outer(u, self.power))
            s = terms.sum(axis=-1)
            step = (np.log(s) - y) * s / (terms @ self.power)
            u = u - step
            if np.max(np.abs(step)) < tol:
                break
        out[pos] = np.exp(u)
        return out


def envelope_kernel(rate: float, cutoff_hz: float) -> np.ndarray:
    """Normalised Gaussian smoothing kernel.

    The continuous response exp(-2 pi^2 sigma^2 f^2) is down by
    ``ENVELOPE_ATTENUATION_DB`` at ``cutoff_hz``. Non-negative taps mean no
    ringing: the envelope never undershoots zero or pre-echoes a transient.
    """
    sigma_s = math.sqrt(ENVELOPE_ATTENUATION_DB / 20 * math.log(10) / 2) / (math.pi * cutoff_hz)
    sigma = sigma_s * rate
    half = max(1, int(math.ceil(6 * sigma)))
    n = np.arange(-half, half + 1)
    k = np.exp(-0.5 * (n / sigma) ** 2)
    return k / k.sum()


def smooth_envelope(x: np.ndarray, rate: float, cutoff_hz: float) -> np.ndarray:
    """Zero-phase Gaussian low-pass; edges are extended with their end values."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return x.copy()
    k = envelope_kernel(rate, cutoff_hz)
    half = k.size // 2
    return np.convolve(np.pad(x, half, mode="edge"), k, mode="valid")


def amplitude_series(ie: IntensityEnvelope, model: PerceptionModel,
                     cfg: IsmConfig) -> AmplitudeEnvelope:
    """Maps an intensity series to carrier amplitudes in [0, 1]."""
    values = np.asarray(ie.values, dtype=float)
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise InvalidArgument("intensity values must be finite and >= 0")
    if cfg.amplitude_mapping == "model" or ie.sample_rate is None:
        amp = model.amplitude_for_intensity(cfg.carrier_hz, values)
    else:
        amp = CarrierResponse(model, cfg, ie.sample_rate).amplitude(values)
    amp = smooth_envelope(np.atleast_1d(amp), ie.rate, cfg.envelope_cutoff_hz)
    amp = amp * cfg.output_gain
    clipped = int(np.count_nonzero(amp > 1.0))
    if clipped:
        warnings.warn(f"{clipped} envelope samples clipped at 1.0", ClippingWarning,
                      stacklevel=2)
    return AmplitudeEnvelope(np.clip(amp, 0.0, 1.0), ie.rate, cfg.carrier_hz,
                             ie.t0, clipped)


def _rate_ratio(sample_rate: int, rate: float) -> Fraction:
    return Fraction(sample_rate / rate).limit_denominator(1000)


def resample_envelope(ae: AmplitudeEnvelope, sample_rate: int) -> np.ndarray:
    """Band-limited interpolation of the envelope onto the audio grid."""
    n_out = int(math.ceil(round(ae.values.size * sample_rate / ae.rate, 6)))
    ratio = _rate_ratio(sample_rate, ae.rate)
    up, down = ratio.numerator, ratio.denominator
    pad = 16 * max(1, down)
    padded = np.pad(ae.values, pad, mode="edge")
    env = sps.resample_poly(padded, up, down)
    lead = pad * up // down
    return env[lead:lead + n_out]


def synthesize_am(ae: AmplitudeEnvelope, sample_rate: int) -> AudioSignal:
    """``env(t) * sin(2 pi f_c t)`` with ``env`` resampled to ``sample_rate``."""
    if len(ae) == 0:
        raise InvalidArgument("amplitude envelope is empty")
    env = resample_envelope(ae, sample_rate)
    t = np.arange(env.size) / sample_rate
    return AudioSignal(env * np.sin(2 * np.pi * ae.carrier_hz * t), sample_rate)


def lowpass_band(signal: AudioSignal, cutoff_hz: float) -> np.ndarray:
    sos = sps.butter(4, cutoff_hz, fs=signal.sample_rate, output="sos")
    if signal.samples.size <= 3 * (2 * sos.shape[0] + 1):
        return np.zeros_like(signal.samples)
    return sps.sosfiltfilt(sos, signal.samples)


def convert(signal: AudioSignal, model: PerceptionModel,
            cfg: IsmConfig) -> ConversionResult:
    """Runs the whole conversion and reports clipping, peak and timing."""
    started = time.perf_counter()
    ie = intensity_series(signal, model, cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClippingWarning)
        ae = amplitude_series(ie, model, cfg)
    y = synthesize_am(ae, signal.sample_rate).samples
    if cfg.lowpass_passthrough:
        low = lowpass_band(signal, cfg.hf_cutoff_hz)
        y = y.copy()
        y[:low.size] += low[:y.size]
    out_clips = int(np.count_nonzero(np.abs(y) > 1.0))
    y = np.clip(y, -1.0, 1.0)
    elapsed = time.perf_counter() - started
    total = ae.clip_count + out_clips
    if total:
        warnings.warn(f"{total} samples clipped during conversion", ClippingWarning,
                      stacklevel=2)
    report = ConversionReport(
        clip_count=total,
        envelope_clip_count=ae.clip_count,
        output_clip_count=out_clips,
        peak=float(np.max(np.abs(y))) if y.size else 0.0,
        envelope_rate_hz=ie.rate,
        n_frames=len(ie),
        input_samples=len(signal),
        output_samples=y.size,
        length_excess_samples=y.size - len(signal),
        config_hash=cfg.digest(model),
        elapsed_s=elapsed,
        rt_factor=signal.duration / elapsed if elapsed > 0 else float("inf"),
    )
    return ConversionResult(AudioSignal(y, signal.sample_rate), ie, ae, report)
