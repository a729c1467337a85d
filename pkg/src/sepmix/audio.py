"""Time-domain audio primitives: immutable buffers, gain, padding.

Samples are float64 throughout, nominal full scale +/-1.0, shape
(channels, num_samples). Buffers are immutable once constructed and all
operations are pure, so concurrent use is safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SepmixError


@dataclass(frozen=True)
class GainDb:
    """A gain in decibels (20*log10 amplitude convention)."""

    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"gain must be finite, got {self.value}")

    @property
    def amplitude(self) -> float:
        return 10.0 ** (self.value / 20.0)


@dataclass(frozen=True)
class AudioBuffer:
    """Multichannel signal with its sample rate.

    `samples` always has shape (channels, num_samples); use
    `AudioBuffer.from_array` to build one from 1-D or (n, ch) data.
    """

    samples: np.ndarray = field(repr=False)
    sample_rate_hz: int

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[np.newaxis, :]
        if arr.ndim != 2:
            raise ValueError(f"samples must be 1-D or 2-D, got shape {arr.shape}")
        if not (isinstance(self.sample_rate_hz, (int, np.integer)) and self.sample_rate_hz > 0):
            raise ValueError(f"sample rate must be a positive integer, got {self.sample_rate_hz}")
        if arr.size and not np.all(np.isfinite(arr)):
            raise ValueError("samples contain NaN or Inf")
        arr = np.array(arr, order="C", copy=True)  # own the data before freezing
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    @classmethod
    def from_array(cls, data, sample_rate_hz: int) -> "AudioBuffer":
        return cls(np.asarray(data, dtype=np.float64), sample_rate_hz)

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def num_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.num_samples / self.sample_rate_hz

    @property
    def mono_samples(self) -> np.ndarray:
        """1-D view of a mono buffer; raises if multichannel."""
        if self.channels != 1:
            raise SepmixError(f"mono signal required, buffer has {self.channels} channels")
        return self.samples[0]


def downmix_mono(buffer: AudioBuffer) -> AudioBuffer:
    """Average channels into a single mono channel."""
    if buffer.channels == 1:
        return buffer
    return AudioBuffer(buffer.samples.mean(axis=0), buffer.sample_rate_hz)


def apply_gain(buffer: AudioBuffer, gain: GainDb | float) -> AudioBuffer:
    """Scale every sample by 10^(gain_db/20)."""
    if not isinstance(gain, GainDb):
        gain = GainDb(float(gain))
    return AudioBuffer(buffer.samples * gain.amplitude, buffer.sample_rate_hz)


def pad_or_truncate(buffer: AudioBuffer, target_len: int, mode: str) -> AudioBuffer:
    """Fit the buffer to `target_len` samples.

    mode 'pad_end_silence' appends exact zeros (requires target >= current
    length); 'truncate_end' drops trailing samples (requires target <=
    current length). target == current length is the identity for both.
    """
    if target_len < 0:
        raise ValueError(f"target_len must be >= 0, got {target_len}")
    n = buffer.num_samples
    if target_len == n:
        return buffer
    if mode == "pad_end_silence":
        if target_len < n:
            raise ValueError(f"pad_end_silence cannot shorten {n} -> {target_len}")
        out = np.zeros((buffer.channels, target_len))
        out[:, :n] = buffer.samples
    elif mode == "truncate_end":
        if target_len > n:
            raise ValueError(f"truncate_end cannot extend {n} -> {target_len}")
        out = buffer.samples[:, :target_len]
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return AudioBuffer(out, buffer.sample_rate_hz)


def shift_and_fit(buffer: AudioBuffer, lead_silence: int, total_len: int) -> AudioBuffer:
    """Place the signal `lead_silence` samples into a zero field of
    `total_len` samples, truncating anything that overhangs."""
    out = np.zeros((buffer.channels, total_len))
    n = min(buffer.num_samples, max(0, total_len - lead_silence))
    if n > 0:
        out[:, lead_silence:lead_silence + n] = buffer.samples[:, :n]
    return AudioBuffer(out, buffer.sample_rate_hz)


def mix_buffers(*buffers: AudioBuffer) -> AudioBuffer:
    """Sample-exact sum of equally shaped, equal-rate buffers."""
    first = buffers[0]
    for b in buffers[1:]:
        if b.sample_rate_hz != first.sample_rate_hz:
            raise SepmixError("sample rate mismatch in mix")
        if b.samples.shape != first.samples.shape:
            raise SepmixError("shape mismatch in mix")
    total = np.zeros_like(first.samples)
    for b in buffers:
        total = total + b.samples
    return AudioBuffer(total, first.sample_rate_hz)


def db(amplitude_ratio: float) -> float:
    return 20.0 * math.log10(amplitude_ratio)
