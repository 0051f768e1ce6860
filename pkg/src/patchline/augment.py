"""Waveform augmentation: Gaussian noise at an exact target SNR, speed
modulation by resampling, volume modulation, and 10x corpus expansion
with a 60/20/20 noise/speed/gain mix.
"""

from __future__ import annotations

import json
import wave as wave_io
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Waveform:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")

    def power(self) -> float:
        if len(self.samples) == 0:
            return 0.0
        return float(np.mean(self.samples ** 2))

    def rms(self) -> float:
        return float(np.sqrt(self.power()))


@dataclass
class AugmentPlan:
    snr_range_db: tuple = (40.0, 50.0)
    speed_range: tuple = (0.9, 1.1)
    gain_range_db: tuple = (-10.0, 10.0)
    expansion_factor: int = 10
    mix: dict = field(default_factory=lambda: {"noise": 0.6, "speed": 0.2, "gain": 0.2})
    seed: int = 0

    def __post_init__(self):
        for lo, hi in (self.snr_range_db, self.speed_range, self.gain_range_db):
            if lo > hi:
                raise ValueError("range bounds must be ordered")
        if abs(sum(self.mix.values()) - 1.0) > 1e-9:
            raise ValueError("mix must sum to 1")
        if self.expansion_factor < 1:
            raise ValueError("expansion_factor must be >= 1")

    def copy_counts(self) -> dict:
        """Integral per-transform copy counts; remainder goes to gain so
        the partition always sums exactly to the expansion factor."""
        f = self.expansion_factor
        n_noise = round(self.mix.get("noise", 0.0) * f)
        n_speed = round(self.mix.get("speed", 0.0) * f)
        n_gain = f - n_noise - n_speed
        if n_gain < 0:
            raise ValueError("mix rounding leaves a negative gain remainder")
        return {"noise": n_noise, "speed": n_speed, "gain": n_gain}


@dataclass(frozen=True)
class AugmentTag:
    source: int
    transform: str
    parameter: float


def add_noise(w: Waveform, snr_db: float, seed: int) -> Waveform:
    """Add seeded Gaussian noise scaled so the signal-to-noise power
    ratio is exactly snr_db."""
    p_signal = w.power()
    if p_signal == 0.0:
        raise ValueError("zero-power input: SNR undefined")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(len(w.samples))
    p_noise = float(np.mean(noise ** 2))
    scale = np.sqrt(p_signal / (p_noise * 10.0 ** (snr_db / 10.0)))
    return Waveform(w.samples + scale * noise, w.sample_rate)


def time_stretch(w: Waveform, factor: float) -> Waveform:
    """Linear-interpolation resampling; factor > 1 plays faster (shorter
    output). Output length is round(len / factor)."""
    if not 0.5 < factor < 2.0:
        raise ValueError("speed factor must lie in (0.5, 2.0)")
    n = len(w.samples)
    out_len = round(n / factor)
    positions = np.arange(out_len) * factor
    samples = np.interp(positions, np.arange(n), w.samples)
    return Waveform(samples, w.sample_rate)


def apply_gain(w: Waveform, gain_db: float) -> Waveform:
    if not -10.0 <= gain_db <= 10.0:
        raise ValueError("gain must lie in [-10, 10] dB")
    return Waveform(w.samples * 10.0 ** (gain_db / 20.0), w.sample_rate)


def expand_corpus(corpus, plan: AugmentPlan):
    """Emit expansion_factor augmented copies per original with the plan's
    noise/speed/gain mix; parameters come from per-original substreams
    seeded as plan.seed XOR index, so expansion is order-independent."""
    corpus = list(corpus)
    if not corpus:
        raise ValueError("corpus must be nonempty")
    counts = plan.copy_counts()
    out = []
    for idx, original in enumerate(corpus):
        rng = np.random.default_rng(plan.seed ^ idx)
        for _ in range(counts["noise"]):
            snr = rng.uniform(*plan.snr_range_db)
            noise_seed = int(rng.integers(0, 2 ** 32))
            out.append((add_noise(original, snr, noise_seed),
                        AugmentTag(idx, "noise", snr)))
        for _ in range(counts["speed"]):
            factor = rng.uniform(*plan.speed_range)
            out.append((time_stretch(original, factor),
                        AugmentTag(idx, "speed", factor)))
        for _ in range(counts["gain"]):
            gain = rng.uniform(*plan.gain_range_db)
            out.append((apply_gain(original, gain),
                        AugmentTag(idx, "gain", gain)))
    return out


def measured_snr_db(clean: Waveform, noisy: Waveform) -> float:
    """SNR of (noisy - clean) against clean, in dB."""
    noise = noisy.samples - clean.samples
    p_noise = float(np.mean(noise ** 2))
    if p_noise == 0.0:
        raise ValueError("no noise present")
    return 10.0 * np.log10(clean.power() / p_noise)


def read_wav(path) -> Waveform:
    """16-bit PCM mono WAV to float samples in [-1, 1]."""
    with wave_io.open(str(path), "rb") as fh:
        if fh.getsampwidth() != 2:
            raise ValueError("only 16-bit PCM supported")
        n = fh.getnframes()
        raw = np.frombuffer(fh.readframes(n), dtype="<i2").astype(np.float64)
        channels = fh.getnchannels()
        if channels > 1:
            raw = raw.reshape(-1, channels).mean(axis=1)
        return Waveform(raw / 32767.0, fh.getframerate())


def write_wav(path, w: Waveform) -> None:
    pcm = np.clip(np.round(w.samples * 32767.0), -32768, 32767).astype("<i2")
    with wave_io.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(w.sample_rate)
        fh.writeframes(pcm.tobytes())


def read_json(path) -> Waveform:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return Waveform(np.array(doc["samples"], dtype=np.float64), doc["sample_rate"])


def write_json(path, w: Waveform) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"sample_rate": w.sample_rate, "samples": w.samples.tolist()}, fh)
