"""Reverberation and SNR-controlled background mixing."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

DEFAULT_EPSILON = 1e-12


@dataclass
class Signal:
    """Mono audio: float samples (nominal full scale +/-1.0) at a sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError(f"expected mono audio, got shape {self.samples.shape}")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class NoiseSpec:
    """A background signal and the target signal-to-noise ratio for mixing."""

    background: Signal
    snr_db: float
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self) -> None:
        if len(self.background) == 0:
            raise ValueError("background signal is empty")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


def reverberate(signal: Signal, rir: np.ndarray) -> Signal:
    """Convolve with a room impulse response, trimmed back to the input length.

    If the convolution exceeds full scale the result is peak-normalized so the
    largest magnitude is exactly 1.
    """
    rir = np.asarray(rir, dtype=np.float64)
    if rir.ndim != 1 or len(rir) == 0:
        raise ValueError("rir must be a non-empty 1-D array")
    wet = fftconvolve(signal.samples, rir, mode="full")[: len(signal)]
    peak = float(np.max(np.abs(wet))) if len(wet) else 0.0
    if peak > 1.0:
        wet = wet / peak
    return Signal(samples=wet, sample_rate=signal.sample_rate)


def noise_gain(
    signal: Signal, background: Signal, snr_db: float, epsilon: float = DEFAULT_EPSILON
) -> float:
    """Gain applied to the background so signal/background hits snr_db.

        g = sqrt(10^(-snr/10) * std(signal)^2 / (epsilon + std(background)^2))

    Standard deviations are population standard deviations.  epsilon keeps the
    gain finite for a silent background (g ~ std(signal) * 10^(-snr/20) / sqrt(eps)).
    """
    if len(signal) == 0:
        raise ValueError("signal is empty")
    if len(background) == 0:
        raise ValueError("background signal is empty")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    signal_var = float(np.std(signal.samples)) ** 2
    background_var = float(np.std(background.samples)) ** 2
    return float(np.sqrt(10.0 ** (-snr_db / 10.0) * signal_var / (epsilon + background_var)))


def _tile_to_length(samples: np.ndarray, n: int) -> np.ndarray:
    if len(samples) >= n:
        return samples[:n]
    reps = -(-n // len(samples))
    return np.tile(samples, reps)[:n]


def mix_background(signal: Signal, spec: NoiseSpec) -> Signal:
    """Add the background at the requested SNR.

    The background is repeated or truncated to the signal length, scaled by
    noise_gain, and added.  If the mix exceeds full scale it is rescaled so
    the peak magnitude is 1 (both components scale together, preserving the
    achieved SNR).
    """
    if signal.sample_rate != spec.background.sample_rate:
        raise ValueError(
            f"sample rate mismatch: signal {signal.sample_rate} Hz "
            f"vs background {spec.background.sample_rate} Hz"
        )
    gain = noise_gain(signal, spec.background, spec.snr_db, spec.epsilon)
    bed = _tile_to_length(spec.background.samples, len(signal))
    mixed = signal.samples + gain * bed
    peak = float(np.max(np.abs(mixed))) if len(mixed) else 0.0
    if peak > 1.0:
        mixed = mixed / peak
    return Signal(samples=mixed, sample_rate=signal.sample_rate)


def white_noise(n_samples: int, seed: int, sample_rate: int, rms: float = 0.1) -> Signal:
    """Deterministic Gaussian noise, the built-in background when no file is given."""
    rng = np.random.default_rng(seed)
    samples = rng.standard_normal(n_samples) * rms
    return Signal(samples=samples, sample_rate=sample_rate)
