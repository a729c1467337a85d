"""Analysis/synthesis transform: 32 ms square-root Hann frames, 8 ms hop,
perfect-reconstruction overlap-add synthesis.

Both ends of the input are zero-padded by (window - hop) samples so every
original sample receives full constant-overlap-add weight; synthesis trims
back to the original length, making istft(stft(x)) == x to within
round-off for any length.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import _accel
from .audio import AudioBuffer
from .errors import SepmixError


def _next_pow2(n: int) -> int:
    p = 1
    while p < n:
        p *= 2
    return p


@dataclass(frozen=True)
class StftConfig:
    """Transform parameters; window/hop are fixed in milliseconds."""

    sample_rate_hz: int
    window_ms: float = 32.0
    hop_ms: float = 8.0

    def __post_init__(self):
        win = self.sample_rate_hz * self.window_ms / 1000.0
        hop = self.sample_rate_hz * self.hop_ms / 1000.0
        if abs(win - round(win)) > 1e-9 or abs(hop - round(hop)) > 1e-9:
            raise SepmixError(
                f"window/hop not integer at {self.sample_rate_hz} Hz "
                f"({win}/{hop} samples); use a rate from {{8000, 16000, 48000}}"
            )
        if round(win) % round(hop):
            raise SepmixError("hop must divide the window length")

    @property
    def window_samples(self) -> int:
        return round(self.sample_rate_hz * self.window_ms / 1000.0)

    @property
    def hop_samples(self) -> int:
        return round(self.sample_rate_hz * self.hop_ms / 1000.0)

    @property
    def fft_size(self) -> int:
        return _next_pow2(self.window_samples)

    @property
    def num_bins(self) -> int:
        return self.fft_size // 2 + 1


@lru_cache(maxsize=16)
def _windows(win: int, hop: int):
    """(analysis, synthesis) sqrt-Hann pair satisfying COLA."""
    n = np.arange(win)
    analysis = np.sqrt(0.5 - 0.5 * np.cos(2.0 * np.pi * n / win))  # periodic
    overlap = win // hop
    cola = np.zeros(hop)
    for k in range(overlap):
        seg = analysis[k * hop : (k + 1) * hop] ** 2
        cola += seg
    if np.ptp(cola) > 1e-9:
        raise SepmixError("window does not satisfy constant overlap-add")
    synthesis = analysis / cola.mean()
    return analysis, synthesis


@dataclass(frozen=True)
class Spectrogram:
    """Complex (num_bins, num_frames) matrix plus the transform config."""

    bins: np.ndarray = field(repr=False)
    config: StftConfig
    original_len: int

    def __post_init__(self):
        arr = np.asarray(self.bins, dtype=np.complex128)
        if arr.ndim != 2 or arr.shape[0] != self.config.num_bins:
            raise SepmixError(
                f"expected ({self.config.num_bins}, T) bins, got {arr.shape}"
            )
        if arr.size and not np.all(np.isfinite(arr)):
            raise SepmixError("spectrogram contains NaN or Inf")
        arr = np.array(arr, order="C", copy=True)
        arr.flags.writeable = False
        object.__setattr__(self, "bins", arr)

    @property
    def num_frames(self) -> int:
        return self.bins.shape[1]

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.bins)

    @property
    def phase(self) -> np.ndarray:
        return np.angle(self.bins)


def stft(buffer: AudioBuffer, config: StftConfig | None = None) -> Spectrogram:
    """Forward transform of a mono buffer."""
    if config is None:
        config = StftConfig(buffer.sample_rate_hz)
    if buffer.sample_rate_hz != config.sample_rate_hz:
        raise SepmixError("buffer rate does not match config")
    x = buffer.mono_samples
    n = len(x)
    if n == 0:
        raise SepmixError("empty buffer")
    win, hop = config.window_samples, config.hop_samples
    analysis, _ = _windows(win, hop)

    pad = win - hop
    num_frames = -(-(n + pad) // hop)  # ceil((n + win - hop)/hop)
    total = (num_frames - 1) * hop + win
    padded = np.zeros(total)
    padded[pad : pad + n] = x

    idx = np.arange(win)[np.newaxis, :] + hop * np.arange(num_frames)[:, np.newaxis]
    frames = padded[idx] * analysis
    bins = np.fft.rfft(frames, n=config.fft_size, axis=1).T
    return Spectrogram(bins, config, n)


def istft(spec: Spectrogram) -> AudioBuffer:
    """Inverse transform; output is trimmed to the recorded original length."""
    cfg = spec.config
    win, hop = cfg.window_samples, cfg.hop_samples
    _, synthesis = _windows(win, hop)
    frames = np.fft.irfft(spec.bins.T, n=cfg.fft_size, axis=1)[:, :win]
    frames = frames * synthesis
    pad = win - hop
    total = (spec.num_frames - 1) * hop + win
    y = _accel.overlap_add(np.ascontiguousarray(frames), hop, total)
    out = y[pad : pad + spec.original_len]
    if len(out) < spec.original_len:  # spectrogram built by hand, not via stft
        out = np.pad(out, (0, spec.original_len - len(out)))
    return AudioBuffer(out, cfg.sample_rate_hz)


def apply_mask(spec: Spectrogram, mask: np.ndarray) -> Spectrogram:
    """Bin-wise real scaling of the complex bins; phase is untouched."""
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != spec.bins.shape:
        raise SepmixError(f"mask shape {mask.shape} != bins {spec.bins.shape}")
    if mask.size and not np.all(np.isfinite(mask)):
        raise SepmixError("mask contains NaN or Inf")
    return Spectrogram(mask * spec.bins, spec.config, spec.original_len)


def save_spectrogram(spec: Spectrogram, path) -> None:
    """Dump bins as little-endian float64 (re, im) interleaved, row-major
    (bins, frames), with a JSON sidecar holding the config."""
    path = Path(path)
    flat = np.empty(spec.bins.shape + (2,))
    flat[..., 0] = spec.bins.real
    flat[..., 1] = spec.bins.imag
    flat.astype("<f8").tofile(path)
    sidecar = {
        "dtype": "<f8",
        "layout": "bins_x_frames_interleaved_re_im",
        "num_bins": spec.bins.shape[0],
        "num_frames": spec.bins.shape[1],
        "sample_rate_hz": spec.config.sample_rate_hz,
        "window_ms": spec.config.window_ms,
        "hop_ms": spec.config.hop_ms,
        "fft_size": spec.config.fft_size,
        "original_len": spec.original_len,
    }
    with open(path.with_suffix(path.suffix + ".json"), "w") as f:
        json.dump(sidecar, f, indent=2, sort_keys=True)
        f.write("\n")


def load_spectrogram(path) -> Spectrogram:
    path = Path(path)
    with open(path.with_suffix(path.suffix + ".json")) as f:
        meta = json.load(f)
    cfg = StftConfig(meta["sample_rate_hz"], meta["window_ms"], meta["hop_ms"])
    raw = np.fromfile(path, dtype="<f8")
    shape = (meta["num_bins"], meta["num_frames"], 2)
    if raw.size != np.prod(shape):
        raise SepmixError(f"spectrogram dump size mismatch in {path}")
    raw = raw.reshape(shape)
    return Spectrogram(raw[..., 0] + 1j * raw[..., 1], cfg, meta["original_len"])
