"""WAV files, stereo experiment stimuli and reference tones.

Only little-endian RIFF/WAVE is handled: 16/24-bit PCM and 32-bit IEEE float.
Samples are normalised so that the most negative PCM code maps to -1.0.
"""

from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (DownmixWarning, InvalidArgument, MalformedWav,
                     UnsupportedWav, WavNotFound)
from .pipeline import AudioSignal

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE

BITS_CHOICES = (16, 24, 32)


@dataclass(frozen=True)
class WavSpec:
    """Storage format. ``bits=32`` always means IEEE float."""

    sample_rate: int
    bits: int = 16
    channels: int = 1

    def __post_init__(self):
        if self.bits not in BITS_CHOICES:
            raise InvalidArgument(f"bits must be one of {BITS_CHOICES}, got {self.bits!r}")
        if self.channels < 1:
            raise InvalidArgument("channels must be >= 1")

    @property
    def is_float(self) -> bool:
        return self.bits == 32

    @property
    def block_align(self) -> int:
        return self.channels * self.bits // 8


@dataclass(frozen=True)
class StereoStimulus:
    """Left channel carries the original audio, right the ISM vibration."""

    left: AudioSignal
    right: AudioSignal

    def __post_init__(self):
        if self.left.sample_rate != self.right.sample_rate:
            raise InvalidArgument("stereo channels must share a sample rate")
        if len(self.left) != len(self.right):
            raise InvalidArgument("stereo channels must have equal length")

    @property
    def sample_rate(self) -> int:
        return self.left.sample_rate

    def __len__(self):
        return len(self.left)

    def frames(self) -> np.ndarray:
        return np.column_stack([self.left.samples, self.right.samples])


def parse_wav_bytes(data: bytes, source: str = "<bytes>") -> tuple[np.ndarray, WavSpec]:
    """Decodes WAV bytes into a (frames, channels) float array in [-1, 1]."""
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedWav(f"{source}: not a RIFF/WAVE file")
    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        cid, size = struct.unpack_from("<4sI", data, pos)
        body = data[pos + 8:pos + 8 + size]
        if cid == b"fmt ":
            if len(body) < 16:
                raise MalformedWav(f"{source}: truncated fmt chunk")
            fmt = body
        elif cid == b"data":
            if len(body) < size:
                raise MalformedWav(
                    f"{source}: data chunk declares {size} bytes, {len(body)} present")
            payload = body
            if fmt is not None:
                break
        pos += 8 + size + (size & 1)
    if fmt is None:
        raise MalformedWav(f"{source}: missing fmt chunk")
    if payload is None:
        raise MalformedWav(f"{source}: missing data chunk")

    tag, channels, rate, _, block_align, bits = struct.unpack_from("<HHIIHH", fmt)
    if tag == WAVE_FORMAT_EXTENSIBLE:
        if len(fmt) < 40:
            raise MalformedWav(f"{source}: truncated WAVE_FORMAT_EXTENSIBLE header")
        tag = struct.unpack_from("<H", fmt, 24)[0]
    if tag == WAVE_FORMAT_PCM and bits in (16, 24):
        pass
    elif tag == WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        pass
    else:
        raise UnsupportedWav(f"{source}: unsupported encoding (format {tag:#06x}, {bits} bits)")
    if channels < 1 or block_align != channels * bits // 8:
        raise MalformedWav(f"{source}: inconsistent block alignment")

    n_frames = len(payload) // block_align
    raw = payload[:n_frames * block_align]
    if bits == 16:
        x = np.frombuffer(raw, dtype="<i2").astype(float) / 32768.0
    elif bits == 24:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        v = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        v = np.where(v >= 1 << 23, v - (1 << 24), v)
        x = v.astype(float) / float(1 << 23)
    else:
        x = np.frombuffer(raw, dtype="<f4").astype(float)
    if not np.all(np.isfinite(x)):
        raise MalformedWav(f"{source}: non-finite float samples")
    return x.reshape(n_frames, channels), WavSpec(rate, bits, channels)


def read_wav_frames(path) -> tuple[np.ndarray, WavSpec]:
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise WavNotFound(f"{path}: no such file") from None
    except IsADirectoryError:
        raise WavNotFound(f"{path}: is a directory") from None
    return parse_wav_bytes(data, str(path))


def read_wav(path) -> tuple[AudioSignal, WavSpec]:
    """Reads a WAV file as a mono signal.

    Multi-channel files are averaged to mono and a :class:`DownmixWarning`
    is issued. The returned spec describes the file as stored.
    """
    frames, spec = read_wav_frames(path)
    if spec.channels > 1:
        warnings.warn(f"{path}: downmixing {spec.channels} channels to mono",
                      DownmixWarning, stacklevel=2)
        mono = frames.mean(axis=1)
    else:
        mono = frames[:, 0]
    try:
        return AudioSignal(mono, spec.sample_rate), spec
    except InvalidArgument as e:
        raise UnsupportedWav(f"{path}: {e}") from None


def _encode(frames: np.ndarray, bits: int) -> bytes:
    if bits == 16:
        q = np.clip(np.round(frames * 32768.0), -32768, 32767)
        return q.astype("<i2").tobytes()
    if bits == 24:
        q = np.clip(np.round(frames * float(1 << 23)), -(1 << 23), (1 << 23) - 1)
        b = q.astype("<i4").reshape(-1).view(np.uint8).reshape(-1, 4)[:, :3]
        return b.tobytes()
    return frames.astype("<f4").tobytes()


def wav_bytes(frames: np.ndarray, spec: WavSpec) -> bytes:
    frames = np.asarray(frames, dtype=float)
    if frames.ndim == 1:
        frames = frames[:, None]
    if frames.shape[1] != spec.channels:
        raise InvalidArgument(
            f"spec declares {spec.channels} channels, data has {frames.shape[1]}")
    if spec.channels not in (1, 2):
        raise InvalidArgument("only mono and stereo files can be written")
    if not np.all(np.isfinite(frames)):
        raise InvalidArgument("samples must be finite")
    if frames.size and np.max(np.abs(frames)) > 1.0:
        raise InvalidArgument("samples exceed full scale [-1, 1]")
    payload = _encode(frames, spec.bits)
    byte_rate = spec.sample_rate * spec.block_align
    if spec.is_float:
        fmt = struct.pack("<HHIIHHH", WAVE_FORMAT_IEEE_FLOAT, spec.channels,
                          spec.sample_rate, byte_rate, spec.block_align, spec.bits, 0)
        extra = b"fact" + struct.pack("<II", 4, frames.shape[0])
    else:
        fmt = struct.pack("<HHIIHH", WAVE_FORMAT_PCM, spec.channels,
                          spec.sample_rate, byte_rate, spec.block_align, spec.bits)
        extra = b""
    pad = b"\x00" if len(payload) & 1 else b""
    body = (b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt + extra
            + b"data" + struct.pack("<I", len(payload)) + payload + pad)
    return b"RIFF" + struct.pack("<I", len(body)) + body


def write_wav(signal, spec: WavSpec, path) -> None:
    """Writes a mono :class:`AudioSignal`, a :class:`StereoStimulus` or a
    (frames, channels) array.

    Out-of-range samples are rejected rather than clipped.
    """
    if isinstance(signal, StereoStimulus):
        frames = signal.frames()
    elif isinstance(signal, AudioSignal):
        frames = signal.samples
    else:
        frames = np.asarray(signal, dtype=float)
    data = wav_bytes(frames, spec)
    Path(path).write_bytes(data)


def make_stereo_stimulus(original: AudioSignal, ism: AudioSignal) -> StereoStimulus:
    """Pairs the two signals sample-for-sample, zero-padding the shorter tail."""
    if original.sample_rate != ism.sample_rate:
        raise InvalidArgument(
            f"sample rates differ ({original.sample_rate} vs {ism.sample_rate}); "
            "resample explicitly before pairing")
    n = max(len(original), len(ism))
    left = np.pad(original.samples, (0, n - len(original)))
    right = np.pad(ism.samples, (0, n - len(ism)))
    rate = original.sample_rate
    return StereoStimulus(AudioSignal(left, rate), AudioSignal(right, rate))


def reference_tone(f: float = 150.0, amplitude: float = 0.5, duration: float = 1.0,
                   sample_rate: int = 48000, fade: float = 0.010) -> AudioSignal:
    """Sine at ``f`` with zero initial phase and raised-cosine fades."""
    if not (math.isfinite(f) and f > 0):
        raise InvalidArgument("tone frequency must be > 0")
    if f >= sample_rate / 2:
        raise InvalidArgument(
            f"tone frequency {f:g} Hz is at or above the Nyquist limit "
            f"{sample_rate / 2:g} Hz")
    if not 0 <= amplitude <= 1:
        raise InvalidArgument("amplitude must lie in [0, 1]")
    if not duration > 0:
        raise InvalidArgument("duration must be > 0")
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    x = amplitude * np.sin(2 * np.pi * f * t)
    n_fade = min(int(round(fade * sample_rate)), n // 2)
    if n_fade > 0:
        ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(n_fade) / n_fade)
        x[:n_fade] *= ramp
        x[n - n_fade:] *= ramp[::-1]
    return AudioSignal(x, sample_rate)
