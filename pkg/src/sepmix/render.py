"""Rendering manifests to audio trees and verifying the result.

Rendering is a pure function of the manifest row and the referenced
files, so rows can be rendered in any order or in parallel with identical
output. Stems satisfy mix == s1 + s2 + noise sample-exactly in the
float64 domain; files are written float32.
"""

from __future__ import annotations

import hashlib
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import AudioBuffer, apply_gain, downmix_mono, mix_buffers
from .errors import SepmixError, VerificationError
from .loudness import measure_lufs, snr_lufs
from .mixdown import place_speakers
from .planning import Manifest, MixtureSpec
from .resample import resample
from .wavfile import read_wav, write_wav

log = logging.getLogger(__name__)

STEM_DIRS = ("mix", "s1", "s2", "noise")


class AudioCache:
    """Mono, rate-converted reads with memoization; safe to share across
    worker threads (entries are immutable buffers)."""

    def __init__(self, root: Path | None = None):
        self.root = Path(root) if root else None
        self._cache: dict[tuple[str, int], AudioBuffer] = {}

    def _resolve(self, path: str) -> Path:
        p = Path(path)
        if not p.is_absolute() and self.root is not None:
            p = self.root / p
        return p

    def __call__(self, path: str, rate: int) -> AudioBuffer:
        key = (path, rate)
        if key not in self._cache:
            buf = downmix_mono(read_wav(self._resolve(path)))
            self._cache[key] = resample(buf, rate)
        return self._cache[key]


@dataclass(frozen=True)
class RenderedMixture:
    mix: AudioBuffer
    s1: AudioBuffer
    s2: AudioBuffer
    noise: AudioBuffer


def render_mixture(spec: MixtureSpec, audio_provider) -> RenderedMixture:
    """Assemble one mixture from its manifest row.

    Speakers are level-aligned, placed per mode, and scaled by the
    manifest's common speaker gain; the noise segment is cut at the
    planned offset. The returned mix is the exact sum of the stems.
    """
    if math.isnan(spec.speaker_gain_db):
        raise SepmixError(f"{spec.mixture_id}: speaker gain not derived")
    rate = spec.sample_rate_hz
    s1 = audio_provider(spec.s1_path, rate)
    s2 = audio_provider(spec.s2_path, rate)
    s1p, s2p = place_speakers(
        s1, s2, spec.rel_level_db, spec.mode,
        spec.pad_before_samples(), spec.pad_after_samples(),
    )
    s1p = apply_gain(s1p, spec.speaker_gain_db)
    s2p = apply_gain(s2p, spec.speaker_gain_db)

    noise = audio_provider(spec.noise_path, rate)
    off = spec.noise_offset_samples()
    if off < 0 or off + s1p.num_samples > noise.num_samples:
        raise SepmixError(f"{spec.mixture_id}: noise segment out of bounds")
    seg = AudioBuffer(noise.samples[:, off : off + s1p.num_samples], rate)

    mix = mix_buffers(s1p, s2p, seg)
    return RenderedMixture(mix=mix, s1=s1p, s2=s2p, noise=seg)


def _render_row(spec: MixtureSpec, out_dir: Path, provider, encoding: str) -> str:
    rendered = render_mixture(spec, provider)
    for stem in STEM_DIRS:
        write_wav(
            getattr(rendered, stem),
            out_dir / stem / f"{spec.mixture_id}.wav",
            encoding=encoding,
        )
    return spec.mixture_id


def render_manifest(
    manifest: Manifest,
    out_dir,
    audio_provider=None,
    threads: int = 1,
    encoding: str = "float32",
) -> list[str]:
    """Render every row into mix/, s1/, s2/, noise/ under `out_dir`."""
    out_dir = Path(out_dir)
    for stem in STEM_DIRS:
        (out_dir / stem).mkdir(parents=True, exist_ok=True)
    provider = audio_provider or AudioCache()
    if threads <= 1:
        return [_render_row(row, out_dir, provider, encoding) for row in manifest.rows]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [
            pool.submit(_render_row, row, out_dir, provider, encoding)
            for row in manifest.rows
        ]
        return [f.result() for f in futures]


@dataclass
class RowVerification:
    mixture_id: str
    snr_error_db: float
    level_error_db: float
    additivity_error: float
    ok: bool
    detail: str = ""


@dataclass
class VerificationReport:
    rows: list[RowVerification]

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.rows)

    @property
    def failures(self) -> list[RowVerification]:
        return [r for r in self.rows if not r.ok]


def verify_row(
    spec: MixtureSpec, out_dir: Path, tolerance_db: float = 0.1
) -> RowVerification:
    """Re-measure one rendered row against its manifest values."""
    stems = {}
    try:
        for stem in STEM_DIRS:
            stems[stem] = read_wav(out_dir / stem / f"{spec.mixture_id}.wav")
    except SepmixError as exc:
        return RowVerification(spec.mixture_id, math.nan, math.nan, math.nan, False, str(exc))

    lengths = {s.num_samples for s in stems.values()}
    if len(lengths) != 1:
        return RowVerification(
            spec.mixture_id, math.nan, math.nan, math.nan, False, "stem length mismatch"
        )
    residual = stems["mix"].samples - (
        stems["s1"].samples + stems["s2"].samples + stems["noise"].samples
    )
    peak = max(np.abs(stems["mix"].samples).max(), 1.0)
    additivity = float(np.abs(residual).max()) / peak

    try:
        snr = snr_lufs(stems["s1"], stems["noise"]).value
        l1 = measure_lufs(stems["s1"]).value
        l2 = measure_lufs(stems["s2"]).value
    except SepmixError as exc:
        return RowVerification(spec.mixture_id, math.nan, math.nan, additivity, False, str(exc))
    snr_err = snr - spec.noise_snr_db
    level_err = (l1 - l2) - spec.rel_level_db

    # float32 stems: sum of three rounded signals vs rounded sum
    problems = []
    if abs(snr_err) > tolerance_db:
        problems.append(f"snr off by {snr_err:+.3f} dB")
    if abs(level_err) > tolerance_db:
        problems.append(f"level off by {level_err:+.3f} dB")
    if additivity > 1e-5:
        problems.append(f"mix != s1+s2+noise (rel err {additivity:.2e})")
    return RowVerification(
        spec.mixture_id, snr_err, level_err, additivity, not problems, "; ".join(problems)
    )


def verify_manifest(
    manifest: Manifest, out_dir, tolerance_db: float = 0.1, threads: int = 1
) -> VerificationReport:
    out_dir = Path(out_dir)
    if threads <= 1:
        rows = [verify_row(r, out_dir, tolerance_db) for r in manifest.rows]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(
                pool.map(lambda r: verify_row(r, out_dir, tolerance_db), manifest.rows)
            )
    report = VerificationReport(rows)
    for failure in report.failures:
        log.error("verify %s: %s", failure.mixture_id, failure.detail)
    return report


def raise_on_failure(report: VerificationReport) -> None:
    if not report.ok:
        raise VerificationError(
            f"{len(report.failures)} of {len(report.rows)} rows failed verification"
        )


def tree_digest(root) -> str:
    """Order-independent sha256 over (relative path, file bytes)."""
    root = Path(root)
    h = hashlib.sha256()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        h.update(str(path.relative_to(root)).encode())
        h.update(b"\0")
        h.update(path.read_bytes())
    return h.hexdigest()
