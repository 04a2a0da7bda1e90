"""Audio pipeline pieces: TTS text prep, rooms and impulse responses, mixing, WAV IO."""

from .mixing import (
    DEFAULT_EPSILON,
    NoiseSpec,
    Signal,
    mix_background,
    noise_gain,
    reverberate,
    white_noise,
)
from .rooms import (
    DEFAULT_SAMPLE_RATE,
    DEFAULT_SOUND_SPEED,
    RoomSpec,
    generate_rir,
    place_microphone,
    rir_length,
    sample_room,
)
from .tts_text import DEFAULT_MAX_TOKENS, prepare_tts_segments, strip_markers
from .wavio import read_wav, write_wav

__all__ = [
    "DEFAULT_EPSILON",
    "DEFAULT_MAX_TOKENS",
    "DEFAULT_SAMPLE_RATE",
    "DEFAULT_SOUND_SPEED",
    "NoiseSpec",
    "RoomSpec",
    "Signal",
    "generate_rir",
    "mix_background",
    "noise_gain",
    "place_microphone",
    "prepare_tts_segments",
    "read_wav",
    "reverberate",
    "rir_length",
    "sample_room",
    "strip_markers",
    "white_noise",
    "write_wav",
]
