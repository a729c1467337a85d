"""Rational-ratio resampling with a Kaiser-windowed sinc polyphase filter.

Design targets: passband ripple <= 0.1 dB below 0.4x the lower of the two
rates, stopband attenuation >= 80 dB above 0.5x the lower rate. The inner
loop runs on the selected kernel backend.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from . import _accel
from .audio import AudioBuffer
from .errors import SepmixError

_STOP_ATTEN_DB = 80.0


@lru_cache(maxsize=32)
def _design(source_rate: int, target_rate: int):
    """Filter taps plus (up, down, delay) for one rate pair."""
    g = math.gcd(source_rate, target_rate)
    up, down = target_rate // g, source_rate // g
    rate_up = source_rate * up
    low = min(source_rate, target_rate)
    f_pass, f_stop = 0.4 * low, 0.5 * low

    beta = 0.1102 * (_STOP_ATTEN_DB - 8.7)
    delta_w = 2.0 * math.pi * (f_stop - f_pass) / rate_up
    numtaps = int(math.ceil((_STOP_ATTEN_DB - 7.95) / (2.285 * delta_w))) + 1
    if numtaps % 2 == 0:
        numtaps += 1

    cutoff = 0.5 * (f_pass + f_stop) / rate_up  # cycles/sample at up-rate
    n = np.arange(numtaps) - (numtaps - 1) / 2.0
    h = 2.0 * cutoff * np.sinc(2.0 * cutoff * n) * np.kaiser(numtaps, beta)
    h *= up / h.sum()  # unit DC gain after zero-stuffing by `up`
    return h, up, down, (numtaps - 1) // 2


def output_length(input_len: int, source_rate: int, target_rate: int) -> int:
    """round(input_len * target/source), half rounded up; exact in ints."""
    g = math.gcd(source_rate, target_rate)
    up, down = target_rate // g, source_rate // g
    return (2 * input_len * up + down) // (2 * down)


def resample(buffer: AudioBuffer, target_rate_hz: int) -> AudioBuffer:
    """Resample every channel to `target_rate_hz`.

    The ratio must be rational (it always is for integer rates); a target
    equal to the source returns the buffer unchanged.
    """
    if not (isinstance(target_rate_hz, (int, np.integer)) and target_rate_hz > 0):
        raise SepmixError(f"target rate must be a positive integer, got {target_rate_hz}")
    target_rate_hz = int(target_rate_hz)
    if target_rate_hz == buffer.sample_rate_hz:
        return buffer
    h, up, down, delay = _design(buffer.sample_rate_hz, target_rate_hz)
    n_out = output_length(buffer.num_samples, buffer.sample_rate_hz, target_rate_hz)
    out = np.empty((buffer.channels, n_out))
    for c in range(buffer.channels):
        out[c] = _accel.fir_rational_filter(h, buffer.samples[c], up, down, delay, n_out)
    return AudioBuffer(out, target_rate_hz)
