"""Reference computations written independently of the package internals.

Nothing here calls the package's analysis code: windows, DFTs, curve
interpolation and envelope measurements are re-derived from their
definitions so that a shared bug cannot hide in both sides of a test.
"""

from __future__ import annotations

import math
from importlib import resources

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.signal import hilbert


def read_knots(name: str) -> tuple[np.ndarray, np.ndarray]:
    text = resources.files("ism_haptics").joinpath("data", name).read_text()
    rows = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            f, v = line.split()
            rows.append((float(f), float(v)))
    f, v = np.array(rows).T
    return f, v


class CurveOracle:
    """Log-log interpolation of a knot table, clamped to [lo, hi]."""

    def __init__(self, freqs, values, band=(100.0, 1000.0)):
        self.lf = np.log(freqs)
        self.lv = np.log(values)
        self.band = band

    def __call__(self, f):
        f = np.clip(np.asarray(f, dtype=float), *self.band)
        return np.exp(np.interp(np.log(f), self.lf, self.lv))


class ModelOracle:
    def __init__(self):
        self.threshold = CurveOracle(*read_knots("threshold.txt"))
        self.exponent = CurveOracle(*read_knots("exponent.txt"))

    def intensity(self, f, a):
        return (np.asarray(a) / self.threshold(f)) ** (2 * self.exponent(f))


def hann_periodic(n: int) -> np.ndarray:
    k = np.arange(n)
    return 0.5 - 0.5 * np.cos(2 * np.pi * k / n)


def frame_intensities(x, sr, model: ModelOracle, segment_len=0.010, hop=0.00125,
                      hf_cutoff=100.0):
    """Per-frame summed intensity via an explicit DFT matrix.

    Frame ``k`` is centred on sample ``k * hop``, with zeros outside the
    signal; the number of frames is ``ceil(len / hop)``.
    """
    n_win = int(round(segment_len * sr))
    n_hop = int(round(hop * sr))
    n_frames = -(-len(x) // n_hop)
    w = hann_periodic(n_win)
    bins = np.arange(n_win // 2 + 1)
    freqs = bins * sr / n_win
    keep = freqs > hf_cutoff
    bins, freqs = bins[keep], freqs[keep]
    dft = np.exp(-2j * np.pi * np.outer(bins, np.arange(n_win)) / n_win)
    gain = 2.0 / w.sum() * np.where((bins == 0) | (2 * bins == n_win), 0.5, 1.0)
    padded = np.concatenate([np.zeros(n_win // 2), x, np.zeros(n_win)])
    idx = np.arange(n_frames)[:, None] * n_hop + np.arange(n_win)[None, :]
    frames = padded[idx] * w
    amps = np.abs(frames @ dft.T) * gain
    return model.intensity(freqs, amps).sum(axis=1)


def gaussian_sigma_samples(rate, cutoff_hz, atten_db=20.0):
    """Gaussian whose amplitude response is ``atten_db`` down at ``cutoff_hz``."""
    # |H(f)| = exp(-2 pi^2 s^2 f^2) = 10^(-atten/20)
    s = math.sqrt(atten_db / 20 * math.log(10) / 2) / (math.pi * cutoff_hz)
    return s * rate


def reference_intensity(x, sr, model, cutoff_hz=100.0, hop=0.00125, **kw):
    """Input intensity series after the envelope smoother."""
    raw = frame_intensities(x, sr, model, hop=hop, **kw)
    sigma = gaussian_sigma_samples(1.0 / hop, cutoff_hz)
    return gaussian_filter1d(raw, sigma, mode="nearest", truncate=6.0)


def relative_rms(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return float(np.sqrt(np.mean((a - b) ** 2)) / np.sqrt(np.mean(b ** 2)))


def demodulate(y) -> np.ndarray:
    return np.abs(hilbert(y))


def envelope_band_ratio_db(y, sr, split_hz=100.0) -> float:
    """Power of the demodulated envelope at or below ``split_hz`` over power above it."""
    env = demodulate(y)
    env = env * np.hanning(env.size)
    p = np.abs(np.fft.rfft(env)) ** 2
    f = np.fft.rfftfreq(env.size, 1.0 / sr)
    lo = p[f <= split_hz].sum()
    hi = p[f > split_hz].sum()
    if hi == 0:
        return math.inf
    return 10 * math.log10(lo / hi)


def xcorr_lag(a, b, max_lag: int) -> int:
    """Lag (samples) that best aligns ``b`` to ``a``; positive means ``b`` is late."""
    a = a - a.mean()
    b = b - b.mean()
    best, best_lag = -math.inf, 0
    for lag in range(-max_lag, max_lag + 1):
        if lag >= 0:
            c = np.dot(a[:a.size - lag], b[lag:])
        else:
            c = np.dot(a[-lag:], b[:b.size + lag])
        if c > best:
            best, best_lag = c, lag
    return best_lag


def random_test_signal(rng: np.random.Generator, kind: str, sr=48000, duration=1.0):
    """Tones, two-tone chords, noise bursts and amplitude steps in 100-1000 Hz."""
    n = int(sr * duration)
    t = np.arange(n) / sr
    if kind == "tone":
        f = rng.uniform(110, 1000)
        x = rng.uniform(0.05, 0.5) * np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
    elif kind == "chord":
        f1, f2 = rng.uniform(110, 1000, 2)
        a1, a2 = rng.uniform(0.03, 0.3, 2)
        x = a1 * np.sin(2 * np.pi * f1 * t) + a2 * np.sin(2 * np.pi * f2 * t + 1.0)
    elif kind == "noise":
        spec = np.fft.rfft(rng.standard_normal(n))
        f = np.fft.rfftfreq(n, 1.0 / sr)
        spec[(f < 110) | (f > 1000)] = 0
        x = np.fft.irfft(spec, n)
        x *= rng.uniform(0.05, 0.4) / np.max(np.abs(x))
        on = int(rng.uniform(0.2, 0.4) * n)
        off = int(rng.uniform(0.6, 0.8) * n)
        gate = np.zeros(n)
        gate[on:off] = 1.0
        x *= gate
    elif kind == "step":
        f = rng.uniform(110, 1000)
        k = int(rng.uniform(0.3, 0.7) * n)
        amp = np.where(np.arange(n) < k, rng.uniform(0.02, 0.2), rng.uniform(0.2, 0.5))
        x = amp * np.sin(2 * np.pi * f * t)
    else:
        raise ValueError(kind)
    return x


TEST_KINDS = ("tone", "chord", "noise", "step")


def criterion_signals(seed=20240101, count=20, sr=48000):
    rng = np.random.default_rng(seed)
    return [(TEST_KINDS[i % 4], random_test_signal(rng, TEST_KINDS[i % 4], sr))
            for i in range(count)]
