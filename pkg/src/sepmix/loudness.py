"""Gated integrated loudness (LUFS) and loudness-based SNR.

Algorithm: per-channel K-weighting (high-frequency shelf then low-cut
biquad), mean-square energy over 400 ms blocks at 75% overlap, an
absolute gate at -70 LUFS followed by a relative gate 10 LU below the
absolutely-gated mean. Channels are summed with unit weights (mono and
stereo material only). The shelf and low-cut are re-derived for any
sample rate from fixed analog-prototype parameters that reproduce the
standard 48 kHz coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _accel
from .audio import AudioBuffer, GainDb, apply_gain
from .errors import ConvergenceError, SepmixError, SilentSignalError

BLOCK_S = 0.400
HOP_S = 0.100
ABSOLUTE_GATE_LUFS = -70.0
RELATIVE_GATE_LU = 10.0
_OFFSET_DB = -0.691  # calibration so a 997 Hz full-scale sine reads -3.01

# analog prototype of the K-weighting stages (valid at any rate);
# reproduces the tabulated 48 kHz coefficients to ~1e-6
_SHELF_F0_HZ = 1681.9744509555319
_SHELF_GAIN_DB = 3.99984385397
_SHELF_Q = 0.7071752369554193
_SHELF_VB_EXP = 0.499666774155
_HIGHPASS_F0_HZ = 38.13547087613982
_HIGHPASS_Q = 0.5003270373253953


@dataclass(frozen=True)
class LoudnessLufs:
    """Integrated loudness; value is -inf iff every block was gated."""

    value: float
    gated_block_count: int

    @property
    def is_silent(self) -> bool:
        return self.gated_block_count == 0


@dataclass(frozen=True)
class SnrDb:
    value: float


@lru_cache(maxsize=16)
def k_weighting_sos(sample_rate_hz: int) -> np.ndarray:
    """Second-order sections (2, 6) of the K pre-filter at this rate."""
    fs = float(sample_rate_hz)

    # stage 1: high shelf (bilinear transform of the analog prototype)
    k = math.tan(math.pi * _SHELF_F0_HZ / fs)
    vh = 10.0 ** (_SHELF_GAIN_DB / 20.0)
    vb = vh ** _SHELF_VB_EXP
    kq = k / _SHELF_Q
    denom = 1.0 + kq + k * k
    shelf = np.array(
        [
            (vh + vb * kq + k * k) / denom,
            2.0 * (k * k - vh) / denom,
            (vh - vb * kq + k * k) / denom,
            1.0,
            2.0 * (k * k - 1.0) / denom,
            (1.0 - kq + k * k) / denom,
        ]
    )

    # stage 2: low cut with the standard's fixed [1, -2, 1] numerator
    k = math.tan(math.pi * _HIGHPASS_F0_HZ / fs)
    kq = k / _HIGHPASS_Q
    denom = 1.0 + kq + k * k
    highpass = np.array(
        [
            1.0,
            -2.0,
            1.0,
            1.0,
            2.0 * (k * k - 1.0) / denom,
            (1.0 - kq + k * k) / denom,
        ]
    )

    sos = np.vstack([shelf, highpass])
    sos.flags.writeable = False
    return sos


def _block_energies(buffer: AudioBuffer) -> np.ndarray:
    """Per-block channel-summed mean-square energy of the K-filtered signal."""
    fs = buffer.sample_rate_hz
    block = int(round(BLOCK_S * fs))
    hop = int(round(HOP_S * fs))
    n = buffer.num_samples
    if n < block:
        raise SepmixError(
            f"buffer too short for loudness gating: {n} samples < one {BLOCK_S*1e3:.0f} ms block"
        )
    sos = k_weighting_sos(fs)
    n_blocks = 1 + (n - block) // hop
    z = np.zeros(n_blocks)
    for ch in range(buffer.channels):
        y = _accel.biquad_cascade(sos, buffer.samples[ch])
        for j in range(n_blocks):
            seg = y[j * hop : j * hop + block]
            z[j] += np.dot(seg, seg) / block
    return z


def measure_lufs(buffer: AudioBuffer) -> LoudnessLufs:
    """Integrated loudness with absolute and relative gating."""
    z = _block_energies(buffer)
    with np.errstate(divide="ignore"):
        lk = _OFFSET_DB + 10.0 * np.log10(z)
    abs_gated = z[lk > ABSOLUTE_GATE_LUFS]
    if abs_gated.size == 0:
        return LoudnessLufs(-math.inf, 0)
    rel_threshold = _OFFSET_DB + 10.0 * math.log10(abs_gated.mean()) - RELATIVE_GATE_LU
    keep = (lk > ABSOLUTE_GATE_LUFS) & (lk > rel_threshold)
    if not keep.any():
        return LoudnessLufs(-math.inf, 0)
    value = _OFFSET_DB + 10.0 * math.log10(z[keep].mean())
    return LoudnessLufs(value, int(keep.sum()))


def snr_lufs(target: AudioBuffer, noise: AudioBuffer) -> SnrDb:
    """Loudness difference LUFS(target) - LUFS(noise)."""
    lt = measure_lufs(target)
    ln = measure_lufs(noise)
    if lt.is_silent or ln.is_silent:
        raise SilentSignalError("SNR undefined: an operand gated to silence")
    return SnrDb(lt.value - ln.value)


def gain_for_target_snr(
    target: AudioBuffer,
    noise: AudioBuffer,
    desired_snr_db: float,
    tolerance_db: float = 0.05,
    max_iterations: int = 5,
) -> GainDb:
    """Gain for `target` so its loudness SNR over `noise` hits the request.

    Closed form (desired minus current SNR), then verified by
    re-measurement; gating can shift with level, so up to
    `max_iterations` fixed-point corrections are applied.
    """
    noise_lufs = measure_lufs(noise)
    if noise_lufs.is_silent:
        raise SilentSignalError("noise gated to silence")
    gain = desired_snr_db - (measure_lufs(target).value - noise_lufs.value)
    if not math.isfinite(gain):
        raise SilentSignalError("target gated to silence")
    for _ in range(max_iterations):
        achieved = measure_lufs(apply_gain(target, gain)).value - noise_lufs.value
        error = desired_snr_db - achieved
        if abs(error) <= tolerance_db:
            return GainDb(gain)
        gain += error
    raise ConvergenceError(
        f"SNR gain did not converge within {max_iterations} refinements "
        f"(last error {error:+.3f} dB)"
    )
