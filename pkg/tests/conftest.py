"""Shared fixtures: synthetic corpora reused across pipeline tests."""

import csv
from pathlib import Path

import numpy as np
import pytest

from sepmix.curation import NoiseRecording, assign_splits, find_spl_bins
from sepmix.planning import NoiseClip, NoiseIndex, SpeechUtterance
from sepmix.render import AudioCache
from sepmix.synth import ambient_noise, make_demo_corpus, speech_surrogate
from sepmix.wavfile import write_wav


@pytest.fixture(scope="session")
def demo_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("demo_corpus")
    return make_demo_corpus(
        root, seed=1234, num_locations=12, recordings_per_location=2,
        recording_s=25.0, num_pairs=8,
    )


@pytest.fixture(scope="session")
def demo_recordings(demo_corpus):
    rows = list(csv.DictReader(open(demo_corpus.noise_metadata_csv)))
    recs = []
    for row in rows:
        spl = row["spl_db"]
        if not spl:
            from sepmix.wavfile import read_wav

            buf = read_wav(demo_corpus.root / row["path"])
            spl = 20 * np.log10(np.sqrt((buf.samples**2).mean())) + 94.0
        recs.append(
            NoiseRecording(
                row["recording_id"], row["location_id"], row["path"],
                float(row["duration_s"]), float(spl),
            )
        )
    return recs


@pytest.fixture(scope="session")
def demo_index(demo_corpus, demo_recordings):
    partition = find_spl_bins(demo_recordings, min_locations=3, min_hours=0.005)
    assigned, _report = assign_splits(demo_recordings, partition, min_locations=1)
    clips = [
        NoiseClip(
            r.id, r.id, r.location_id, r.path, 0.0, round(r.duration_s, 6),
            r.spl_db, partition.bin_of_location(r.location_id), r.split,
        )
        for r in assigned
    ]
    return NoiseIndex(clips, [float(e) for e in partition.edges])


@pytest.fixture(scope="session")
def demo_pairs(demo_corpus):
    cache = AudioCache(demo_corpus.root)
    pairs = []
    for row in csv.DictReader(open(demo_corpus.pairs_csv)):
        n1 = cache(row["s1_path"], 8000).num_samples
        n2 = cache(row["s2_path"], 8000).num_samples
        pairs.append(
            (
                row["mixture_id"],
                SpeechUtterance(row["s1_path"], n1, 8000),
                SpeechUtterance(row["s2_path"], n2, 8000),
            )
        )
    return pairs


def build_flat_corpus(
    root: Path,
    num_utterances: int,
    num_noise: int,
    seed: int,
    rate: int = 8000,
    utt_s=(2.2, 3.4),
    noise_s: float = 50.0,
):
    """Speech + noise WAVs with a hand-built four-band noise index.

    Returns (utterance list, NoiseIndex, AudioCache rooted at `root`).
    """
    rng = np.random.default_rng(seed)
    (root / "speech").mkdir(parents=True, exist_ok=True)
    (root / "noise").mkdir(parents=True, exist_ok=True)
    utts = []
    for u in range(num_utterances):
        buf = speech_surrogate(rng.uniform(*utt_s), rate, int(rng.integers(2**31)))
        rel = f"speech/u{u:03d}.wav"
        write_wav(buf, root / rel, encoding="float32")
        utts.append(SpeechUtterance(rel, buf.num_samples, rate))
    clips = []
    for k in range(num_noise):
        level = -38.0 + 24.0 * (k / max(num_noise - 1, 1))
        dur = noise_s * (0.8 + 0.5 * (k % 3))
        buf = ambient_noise(dur, rate, int(rng.integers(2**31)), level_dbfs=level)
        rel = f"noise/n{k:02d}.wav"
        write_wav(buf, root / rel, encoding="float32")
        clips.append(
            NoiseClip(
                f"n{k:02d}", f"n{k:02d}", f"loc{k:02d}", rel, 0.0,
                round(buf.duration_s, 6), level + 94.0, k % 4, "train",
            )
        )
    index = NoiseIndex(clips, [0.25, 0.5, 0.75])
    return utts, index, AudioCache(root)


@pytest.fixture(scope="session")
def flat_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("flat_corpus")
    return build_flat_corpus(root, num_utterances=24, num_noise=8, seed=77)
