"""Procedural stand-ins for the four high-frequency stimulus classes.

``saw``, ``fireworks``, ``glass_crash`` and ``tape_rip`` are synthesised
from seeded noise so the golden corpus is reproducible and license-free.
Each returns a mono signal with a 0.6 full-scale peak.
"""

from __future__ import annotations

import numpy as np
from scipy import signal as sps

from .pipeline import AudioSignal

PEAK = 0.6


def _bandpass(x, lo, hi, sr, order=4):
    hi = min(hi, 0.45 * sr)  # keep the band below Nyquist at low rates
    sos = sps.butter(order, [lo, hi], btype="bandpass", fs=sr, output="sos")
    return sps.sosfilt(sos, x)


def _normalize(x, sr):
    x = x - x.mean()
    return AudioSignal(PEAK * x / np.max(np.abs(x)), sr)


def saw(sample_rate: int = 48000, duration: float = 2.0, seed: int = 1) -> AudioSignal:
    """Hand saw: two strokes per second, tooth-rate rasp plus wood noise."""
    rng = np.random.default_rng(seed)
    n = int(duration * sample_rate)
    t = np.arange(n) / sample_rate
    stroke = np.sin(np.pi * 2.0 * t) ** 2
    # Tooth rate follows blade speed within each stroke.
    tooth_hz = 250 + 350 * stroke
    phase = 2 * np.pi * np.cumsum(tooth_hz) / sample_rate
    rasp = np.sign(np.sin(phase)) * (0.5 + 0.5 * rng.random(n))
    rasp = _bandpass(rasp, 200, 4000, sample_rate)
    wood = _bandpass(rng.standard_normal(n), 800, 6000, sample_rate)
    return _normalize(stroke * (rasp + 0.6 * wood), sample_rate)


def fireworks(sample_rate: int = 48000, duration: float = 2.0, seed: int = 2) -> AudioSignal:
    """Handheld sparkler: dense random crackles over a steady hiss."""
    rng = np.random.default_rng(seed)
    n = int(duration * sample_rate)
    x = np.zeros(n)
    n_pops = rng.poisson(150 * duration)
    for pos in rng.integers(0, n - 200, n_pops):
        length = int(rng.integers(24, 96))
        decay = np.exp(-np.arange(length) / (length / 4))
        x[pos:pos + length] += rng.uniform(0.2, 1.0) * decay * rng.standard_normal(length)
    hiss = _bandpass(rng.standard_normal(n), 2000, 12000, sample_rate)
    x = _bandpass(x, 150, 15000, sample_rate) + 0.08 * hiss
    fade = np.minimum(1.0, np.arange(n) / (0.05 * sample_rate))
    return _normalize(x * fade * fade[::-1], sample_rate)


def glass_crash(sample_rate: int = 48000, duration: float = 2.0, seed: int = 3) -> AudioSignal:
    """Breaking glass: broadband impact, ringing shards and late tinkles."""
    rng = np.random.default_rng(seed)
    n = int(duration * sample_rate)
    t = np.arange(n) / sample_rate
    onset = int(0.1 * sample_rate)
    x = np.zeros(n)
    tail = t[:n - onset]
    impact = rng.standard_normal(n - onset) * np.exp(-tail / 0.04)
    x[onset:] += _bandpass(impact, 300, 16000, sample_rate)
    for _ in range(40):
        f = rng.uniform(1500, 9000)
        tau = rng.uniform(0.05, 0.4)
        start = onset + int(rng.exponential(0.05) * sample_rate)
        if start >= n:
            continue
        tt = t[:n - start]
        x[start:] += rng.uniform(0.05, 0.3) * np.exp(-tt / tau) * np.sin(
            2 * np.pi * f * tt + rng.uniform(0, 2 * np.pi))
    for pos in rng.integers(onset + int(0.2 * sample_rate), n - 2000, 30):
        length = 1500
        tt = np.arange(length) / sample_rate
        f = rng.uniform(3000, 10000)
        x[pos:pos + length] += rng.uniform(0.05, 0.25) * np.exp(-tt / 0.008) * np.sin(
            2 * np.pi * f * tt)
    return _normalize(x, sample_rate)


def tape_rip(sample_rate: int = 48000, duration: float = 2.0, seed: int = 4) -> AudioSignal:
    """Tape peeled off a roll: stick-slip crackle under a ramped envelope."""
    rng = np.random.default_rng(seed)
    n = int(duration * sample_rate)
    t = np.arange(n) / sample_rate
    noise = _bandpass(rng.standard_normal(n), 400, 6000, sample_rate)
    slip_hz = 60 + 80 * rng.random(n // 480 + 2)
    slip_hz = np.repeat(slip_hz, 480)[:n]
    phase = 2 * np.pi * np.cumsum(slip_hz) / sample_rate
    stick_slip = 0.3 + 0.7 * (0.5 + 0.5 * np.cos(phase)) ** 4
    env = np.clip((t - 0.2) / 0.1, 0, 1) * np.clip((1.8 - t) / 0.1, 0, 1)
    return _normalize(noise * stick_slip * env, sample_rate)


GENERATORS = {
    "saw": saw,
    "fireWorks": fireworks,
    "glassCrash": glass_crash,
    "tapeRip": tape_rip,
}


def golden_corpus(sample_rate: int = 48000) -> dict[str, AudioSignal]:
    return {name: gen(sample_rate) for name, gen in GENERATORS.items()}
