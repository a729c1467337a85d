"""Mixture planning: seeded random draws, the noise-clip index, and the
manifest format.

Randomness contract (fixed forever so manifests are portable and stable):
every row gets its own generator, `random.Random(seed64)` (Mersenne
Twister; CPython guarantees the `random()` stream for a given seed) with
seed64 = the first 8 bytes, big-endian, of sha256("{global_seed}:
{mixture_id}"). All draws derive from `random()`: uniform(a, b) is
a + (b-a)*u; an index over n items is min(int(u*n), n-1); a
duration-weighted choice bisects the cumulative duration with u*total.
Draw order per row: band, clip, noise SNR, relative level (when not
supplied), pads (max mode only), offset; on a too-short clip the (band,
clip) pair is redrawn, keeping the other draws, up to 100 attempts.

Drawn floats are quantized to 6 decimals (the manifest precision) before
any gain derivation, making the CSV the canonical value.
"""

from __future__ import annotations

import csv
import hashlib
import json
import random
from bisect import bisect_right
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import __version__
from .audio import AudioBuffer
from .errors import PlanningError, SepmixError
from .loudness import gain_for_target_snr
from .mixdown import place_speakers
from .resample import output_length

NOISE_SNR_RANGE_DB = (-6.0, 3.0)
REL_LEVEL_RANGE_DB = (0.0, 5.0)
PAD_RANGE_S = (0.0, 2.0)
NUM_BANDS = 4
MAX_CLIP_ATTEMPTS = 100

MANIFEST_COLUMNS = [
    "mixture_id",
    "s1_path",
    "s2_path",
    "rel_level_db",
    "speaker_gain_db",
    "noise_path",
    "noise_offset_s",
    "noise_snr_db",
    "pad_before_s",
    "pad_after_s",
    "mode",
    "sample_rate_hz",
]


def row_rng(seed_material: str) -> random.Random:
    digest = hashlib.sha256(seed_material.encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def _uniform(r: random.Random, lo: float, hi: float) -> float:
    return lo + (hi - lo) * r.random()


def _index(r: random.Random, n: int) -> int:
    return min(int(r.random() * n), n - 1)


def _q6(x: float) -> float:
    return round(x, 6)


@dataclass(frozen=True)
class NoiseClip:
    """A usable span of a noise recording (post leakage filtering)."""

    clip_id: str
    recording_id: str
    location_id: str
    path: str
    start_s: float
    duration_s: float
    spl_db: float
    bin_index: int
    split: str

    def __post_init__(self):
        object.__setattr__(self, "start_s", float(self.start_s))
        object.__setattr__(self, "duration_s", float(self.duration_s))
        object.__setattr__(self, "spl_db", float(self.spl_db))
        object.__setattr__(self, "bin_index", int(self.bin_index))


@dataclass
class NoiseIndex:
    clips: list[NoiseClip]
    bin_edges: list[float]
    meta: dict = field(default_factory=dict)

    def clips_for(self, split: str | None, bin_index: int | None = None):
        out = [
            c
            for c in self.clips
            if (split is None or c.split == split)
            and (bin_index is None or c.bin_index == bin_index)
        ]
        return sorted(out, key=lambda c: c.clip_id)

    def to_json(self) -> str:
        payload = {
            "bin_edges": self.bin_edges,
            "clips": [vars(c) for c in sorted(self.clips, key=lambda c: c.clip_id)],
            "meta": self.meta,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "NoiseIndex":
        payload = json.loads(Path(path).read_text())
        clips = [NoiseClip(**c) for c in payload["clips"]]
        return cls(clips, payload["bin_edges"], payload.get("meta", {}))

    def digest(self) -> str:
        return "sha256:" + hashlib.sha256(self.to_json().encode()).hexdigest()


@dataclass(frozen=True)
class SpeechUtterance:
    path: str
    num_samples: int
    sample_rate_hz: int

    def samples_at(self, rate: int) -> int:
        return output_length(self.num_samples, self.sample_rate_hz, rate)


@dataclass(frozen=True)
class MixtureSpec:
    """Complete provenance of one mixture; one manifest row."""

    mixture_id: str
    s1_path: str
    s2_path: str
    rel_level_db: float
    speaker_gain_db: float  # applied to BOTH speakers; NaN until derived
    noise_path: str
    noise_offset_s: float
    noise_snr_db: float
    pad_before_s: float
    pad_after_s: float
    mode: str
    sample_rate_hz: int
    seed_material: str = ""

    def pad_before_samples(self) -> int:
        return round(self.pad_before_s * self.sample_rate_hz)

    def pad_after_samples(self) -> int:
        return round(self.pad_after_s * self.sample_rate_hz)

    def noise_offset_samples(self) -> int:
        return round(self.noise_offset_s * self.sample_rate_hz)


def sample_mixture_spec(
    seed_material: str,
    s1: SpeechUtterance,
    s2: SpeechUtterance,
    noise_index: NoiseIndex,
    mode: str,
    sample_rate_hz: int,
    split: str | None = None,
    rel_level_db: float | None = None,
    audio_provider=None,
    mixture_id: str | None = None,
) -> MixtureSpec:
    """Draw one mixture specification.

    Band uniform over the four SPL bins, clip duration-proportional
    within the band, SNR uniform on [-6, 3] dB, relative level uniform on
    [0, 5] dB unless supplied, pads uniform on [0, 2] s each (max mode).
    When `audio_provider(path, rate) -> AudioBuffer` is given, the common
    speaker gain hitting the drawn SNR is derived; otherwise it stays NaN.
    """
    if mode not in ("min", "max"):
        raise PlanningError(f"mode must be min or max, got {mode!r}")
    r = row_rng(seed_material)
    mixture_id = mixture_id or seed_material

    snr_db = _q6(_uniform(r, *NOISE_SNR_RANGE_DB))
    if rel_level_db is None:
        rel_db = _q6(_uniform(r, *REL_LEVEL_RANGE_DB))
    else:
        rel_db = _q6(rel_level_db)
    if mode == "max":
        pad_before = _q6(_uniform(r, *PAD_RANGE_S))
        pad_after = _q6(_uniform(r, *PAD_RANGE_S))
    else:
        pad_before = pad_after = 0.0

    n1 = s1.samples_at(sample_rate_hz)
    n2 = s2.samples_at(sample_rate_hz)
    extent = max(n1, n2) if mode == "max" else min(n1, n2)
    needed = (
        extent
        + round(pad_before * sample_rate_hz)
        + round(pad_after * sample_rate_hz)
    )

    chosen = None
    offset_samples = None
    for _ in range(MAX_CLIP_ATTEMPTS):
        band = _index(r, NUM_BANDS)
        clips = noise_index.clips_for(split, band)
        if not clips:
            continue
        cum = []
        total = 0.0
        for c in clips:
            total += c.duration_s
            cum.append(total)
        clip = clips[min(bisect_right(cum, r.random() * total), len(clips) - 1)]
        start = round(clip.start_s * sample_rate_hz)
        end = round((clip.start_s + clip.duration_s) * sample_rate_hz)
        avail = end - start - needed
        if avail < 0:
            continue
        off_in_clip = min(int(r.random() * (avail + 1)), avail)
        chosen = clip
        offset_samples = start + off_in_clip
        break
    if chosen is None:
        raise PlanningError(
            f"no noise clip long enough for {needed} samples "
            f"after {MAX_CLIP_ATTEMPTS} attempts ({mixture_id})"
        )

    spec = MixtureSpec(
        mixture_id=mixture_id,
        s1_path=s1.path,
        s2_path=s2.path,
        rel_level_db=rel_db,
        speaker_gain_db=float("nan"),
        noise_path=chosen.path,
        noise_offset_s=_q6(offset_samples / sample_rate_hz),
        noise_snr_db=snr_db,
        pad_before_s=pad_before,
        pad_after_s=pad_after,
        mode=mode,
        sample_rate_hz=sample_rate_hz,
        seed_material=seed_material,
    )
    if audio_provider is not None:
        spec = replace(spec, speaker_gain_db=_q6(derive_speaker_gain(spec, audio_provider)))
    return spec


def derive_speaker_gain(spec: MixtureSpec, audio_provider) -> float:
    """Common gain on both speakers so that the placed louder speaker sits
    `noise_snr_db` LU above the selected noise segment."""
    s1 = audio_provider(spec.s1_path, spec.sample_rate_hz)
    s2 = audio_provider(spec.s2_path, spec.sample_rate_hz)
    s1p, _ = place_speakers(
        s1, s2, spec.rel_level_db, spec.mode,
        spec.pad_before_samples(), spec.pad_after_samples(),
    )
    noise = audio_provider(spec.noise_path, spec.sample_rate_hz)
    off = spec.noise_offset_samples()
    seg = noise.samples[:, off : off + s1p.num_samples]
    if seg.shape[1] != s1p.num_samples:
        raise PlanningError(f"noise segment out of bounds for {spec.mixture_id}")
    return gain_for_target_snr(
        s1p, AudioBuffer(seg, spec.sample_rate_hz), spec.noise_snr_db
    ).value


@dataclass
class Manifest:
    rows: list[MixtureSpec]
    global_seed: int
    mode: str
    sample_rate_hz: int
    noise_index_digest: str = ""

    def sidecar(self) -> dict:
        return {
            "global_seed": self.global_seed,
            "mode": self.mode,
            "noise_index_digest": self.noise_index_digest,
            "num_rows": len(self.rows),
            "sample_rate_hz": self.sample_rate_hz,
            "tool_version": __version__,
        }


def plan_dataset(
    pairs,
    noise_index: NoiseIndex,
    global_seed: int,
    mode: str,
    sample_rate_hz: int,
    split: str | None = None,
    audio_provider=None,
) -> Manifest:
    """One MixtureSpec per (mixture_id, s1, s2) entry.

    Row seeds depend only on (global_seed, mixture_id), so row order and
    render scheduling never change the result. Duplicate ids are an error.
    """
    seen = set()
    rows = []
    for entry in pairs:
        mixture_id, s1, s2 = entry[0], entry[1], entry[2]
        rel = entry[3] if len(entry) > 3 else None
        if mixture_id in seen:
            raise PlanningError(f"duplicate mixture_id {mixture_id!r}")
        seen.add(mixture_id)
        rows.append(
            sample_mixture_spec(
                f"{global_seed}:{mixture_id}",
                s1,
                s2,
                noise_index,
                mode,
                sample_rate_hz,
                split=split,
                rel_level_db=rel,
                audio_provider=audio_provider,
                mixture_id=mixture_id,
            )
        )
    return Manifest(rows, global_seed, mode, sample_rate_hz, noise_index.digest())


def write_manifest(manifest: Manifest, path) -> None:
    """CSV with a fixed header; floats at 6 decimals, LF line endings.
    A JSON sidecar (same stem, .json) records seed/version/index digest."""
    path = Path(path)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(MANIFEST_COLUMNS)
        for row in manifest.rows:
            writer.writerow(
                [
                    row.mixture_id,
                    row.s1_path,
                    row.s2_path,
                    f"{row.rel_level_db:.6f}",
                    f"{row.speaker_gain_db:.6f}",
                    row.noise_path,
                    f"{row.noise_offset_s:.6f}",
                    f"{row.noise_snr_db:.6f}",
                    f"{row.pad_before_s:.6f}",
                    f"{row.pad_after_s:.6f}",
                    row.mode,
                    row.sample_rate_hz,
                ]
            )
    with open(path.with_suffix(".json"), "w") as f:
        json.dump(manifest.sidecar(), f, indent=2, sort_keys=True)
        f.write("\n")


def read_manifest(path) -> Manifest:
    path = Path(path)
    rows = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != MANIFEST_COLUMNS:
            raise SepmixError(f"unexpected manifest header in {path}")
        for rec in reader:
            rows.append(
                MixtureSpec(
                    mixture_id=rec["mixture_id"],
                    s1_path=rec["s1_path"],
                    s2_path=rec["s2_path"],
                    rel_level_db=float(rec["rel_level_db"]),
                    speaker_gain_db=float(rec["speaker_gain_db"]),
                    noise_path=rec["noise_path"],
                    noise_offset_s=float(rec["noise_offset_s"]),
                    noise_snr_db=float(rec["noise_snr_db"]),
                    pad_before_s=float(rec["pad_before_s"]),
                    pad_after_s=float(rec["pad_after_s"]),
                    mode=rec["mode"],
                    sample_rate_hz=int(rec["sample_rate_hz"]),
                )
            )
    sidecar = path.with_suffix(".json")
    meta = json.loads(sidecar.read_text()) if sidecar.exists() else {}
    return Manifest(
        rows,
        meta.get("global_seed", -1),
        meta.get("mode", rows[0].mode if rows else "max"),
        meta.get("sample_rate_hz", rows[0].sample_rate_hz if rows else 0),
        meta.get("noise_index_digest", ""),
    )
