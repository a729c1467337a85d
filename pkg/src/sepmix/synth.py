"""Synthetic mini-corpus generation: speech surrogates and ambient noise.

Everything is seeded and deterministic. Surrogate "speech" is a harmonic
complex with vibrato and a slow amplitude envelope; "ambient" noise is
spectrally tilted noise with gentle level modulation. These exercise the
pipeline (loudness gating, SNR setting, binning) without any real corpus.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import AudioBuffer
from .wavfile import write_wav

SPL_OFFSET_DB = 94.0  # dBFS -> nominal SPL for metadata


def _envelope(n: int, rate: int, rng, low: float = 0.35) -> np.ndarray:
    """Slow random amplitude contour in [low, 1]; never fully silent."""
    n_ctrl = max(4, int(n / rate * 3))
    ctrl = rng.uniform(low, 1.0, n_ctrl)
    t = np.linspace(0, 1, n)
    return np.interp(t, np.linspace(0, 1, n_ctrl), ctrl)


def speech_surrogate(duration_s: float, sample_rate_hz: int, seed: int) -> AudioBuffer:
    """Voiced-speech stand-in: harmonics + vibrato + amplitude contour."""
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * sample_rate_hz))
    t = np.arange(n) / sample_rate_hz
    f0 = rng.uniform(90.0, 230.0)
    vibrato = 1.0 + 0.02 * np.sin(2 * np.pi * rng.uniform(4.0, 7.0) * t)
    phase = 2 * np.pi * np.cumsum(f0 * vibrato) / sample_rate_hz
    x = np.zeros(n)
    for k in range(1, 6):
        x += rng.uniform(0.4, 1.0) / k * np.sin(k * phase + rng.uniform(0, 2 * np.pi))
    x *= _envelope(n, sample_rate_hz, rng)
    x += 0.01 * rng.standard_normal(n)
    x *= 0.25 / np.abs(x).max()
    return AudioBuffer(x, sample_rate_hz)


def ambient_noise(
    duration_s: float,
    sample_rate_hz: int,
    seed: int,
    level_dbfs: float = -30.0,
    tilt: float = 1.0,
    channels: int = 1,
) -> AudioBuffer:
    """Spectrally tilted (1/f^tilt) noise at a given RMS level."""
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * sample_rate_hz))
    out = np.empty((channels, n))
    freqs = np.fft.rfftfreq(n, 1.0 / sample_rate_hz)
    shape = np.ones_like(freqs)
    shape[1:] = 1.0 / np.maximum(freqs[1:], 20.0) ** (tilt / 2.0)
    shape[0] = 0.0
    for ch in range(channels):
        spectrum = np.fft.rfft(rng.standard_normal(n)) * shape
        x = np.fft.irfft(spectrum, n=n)
        x *= _envelope(n, sample_rate_hz, rng, low=0.6)
        rms = np.sqrt(np.mean(x**2))
        out[ch] = x * (10.0 ** (level_dbfs / 20.0) / rms)
    return AudioBuffer(out, sample_rate_hz)


@dataclass(frozen=True)
class DemoCorpus:
    root: Path
    noise_metadata_csv: Path
    pairs_csv: Path


def make_demo_corpus(
    root,
    seed: int = 0,
    speech_rate_hz: int = 8000,
    noise_rate_hz: int = 16000,
    num_locations: int = 12,
    recordings_per_location: int = 2,
    recording_s: float = 45.0,
    num_pairs: int = 12,
) -> DemoCorpus:
    """Write a relocatable synthetic corpus under `root`.

    noise/ holds recordings from `num_locations` locations whose levels
    span ~30 dB (so SPL binning has four populated bins), described by
    noise/metadata.csv; speech/ holds surrogate utterances listed as
    two-speaker pairs in speech/pairs.csv. All paths in the CSVs are
    relative to `root`.
    """
    root = Path(root)
    (root / "noise").mkdir(parents=True, exist_ok=True)
    (root / "speech").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    meta_rows = []
    levels = np.linspace(-46.0, -16.0, num_locations)
    for loc in range(num_locations):
        loc_id = f"loc{loc:02d}"
        for rec in range(recordings_per_location):
            rec_id = f"{loc_id}_r{rec}"
            level = levels[loc] + rng.uniform(-1.5, 1.5)
            dur = recording_s * rng.uniform(0.8, 1.2)
            buf = ambient_noise(
                dur,
                noise_rate_hz,
                seed=int(rng.integers(0, 2**31)),
                level_dbfs=level,
                tilt=rng.uniform(0.5, 1.5),
                channels=2 if loc % 3 == 0 else 1,
            )
            rel = f"noise/{rec_id}.wav"
            write_wav(buf, root / rel, encoding="float32")
            # leave some SPL cells blank to exercise the measured-SPL path
            spl = "" if (loc * recordings_per_location + rec) % 5 == 4 else f"{level + SPL_OFFSET_DB:.2f}"
            meta_rows.append([rec_id, loc_id, rel, f"{buf.duration_s:.6f}", spl])

    meta_csv = root / "noise" / "metadata.csv"
    with open(meta_csv, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["recording_id", "location_id", "path", "duration_s", "spl_db"])
        writer.writerows(meta_rows)

    utt_paths = []
    for u in range(2 * num_pairs):
        dur = rng.uniform(2.2, 4.5)
        buf = speech_surrogate(dur, speech_rate_hz, seed=int(rng.integers(0, 2**31)))
        rel = f"speech/utt{u:03d}.wav"
        write_wav(buf, root / rel, encoding="float32")
        utt_paths.append(rel)

    pairs_csv = root / "speech" / "pairs.csv"
    with open(pairs_csv, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["mixture_id", "s1_path", "s2_path"])
        for p in range(num_pairs):
            writer.writerow([f"mix{p:04d}", utt_paths[2 * p], utt_paths[2 * p + 1]])

    return DemoCorpus(root, meta_csv, pairs_csv)
