"""16-bit PCM mono WAV reading and writing."""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from ..util import atomic_write_bytes
from .mixing import Signal

_FULL_SCALE = 32767.0


def write_wav(path: Path | str, signal: Signal) -> None:
    """Write mono 16-bit PCM; float samples are clipped to [-1, 1] first."""
    clipped = np.clip(signal.samples, -1.0, 1.0)
    pcm = np.round(clipped * _FULL_SCALE).astype(np.int16)
    buffer = io.BytesIO()
    wavfile.write(buffer, signal.sample_rate, pcm)
    atomic_write_bytes(path, buffer.getvalue())


def read_wav(path: Path | str) -> Signal:
    rate, data = wavfile.read(path)
    if data.ndim != 1:
        raise ValueError(f"{path}: expected mono audio, got shape {data.shape}")
    if data.dtype != np.int16:
        raise ValueError(f"{path}: expected 16-bit PCM, got dtype {data.dtype}")
    return Signal(samples=data.astype(np.float64) / _FULL_SCALE, sample_rate=int(rate))
