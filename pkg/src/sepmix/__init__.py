"""Noisy two-speaker mixture synthesis and separation evaluation toolkit."""

__version__ = "0.1.0"

from ._accel import BACKEND
from .audio import AudioBuffer, GainDb, apply_gain, downmix_mono, mix_buffers, pad_or_truncate
from .loudness import LoudnessLufs, SnrDb, gain_for_target_snr, measure_lufs, snr_lufs
from .resample import resample
from .wavfile import read_wav, write_wav

__all__ = [
    "AudioBuffer",
    "BACKEND",
    "GainDb",
    "LoudnessLufs",
    "SnrDb",
    "apply_gain",
    "downmix_mono",
    "gain_for_target_snr",
    "measure_lufs",
    "mix_buffers",
    "pad_or_truncate",
    "read_wav",
    "resample",
    "snr_lufs",
    "write_wav",
    "__version__",
]
