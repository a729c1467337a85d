"""Noise-corpus curation: SPL binning, split assignment, leakage filtering.

Recording locations are partitioned into four SPL bins (each bin needs a
minimum number of unique locations and hours of audio), whole locations
are then assigned to train/valid/test so every (split, bin) pair keeps at
least two locations, and 10-second chunks whose estimated foreground
speech SNR reaches -6 dB are dropped from the usable corpus.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field, replace

from .audio import AudioBuffer
from .errors import InfeasiblePartitionError
from .loudness import measure_lufs

log = logging.getLogger(__name__)

SPLITS = ("train", "valid", "test")
NUM_BINS = 4
LEAK_THRESHOLD_DB = -6.0
CHUNK_S = 10.0
_MIN_METER_S = 0.4  # one gating block


@dataclass(frozen=True)
class NoiseRecording:
    id: str
    location_id: str
    path: str
    duration_s: float
    spl_db: float
    split: str = "unassigned"

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValueError(f"duration must be positive: {self.id}")
        object.__setattr__(self, "duration_s", float(self.duration_s))
        object.__setattr__(self, "spl_db", float(self.spl_db))


@dataclass(frozen=True)
class BinPartition:
    """Three ascending SPL edges defining four bins over locations."""

    edges: tuple[float, float, float]
    locations: tuple[frozenset, ...]  # per bin
    durations_s: tuple[float, ...]  # per bin

    def bin_of_location(self, location_id: str) -> int:
        for b, locs in enumerate(self.locations):
            if location_id in locs:
                return b
        raise KeyError(location_id)


def _location_stats(recordings):
    """location -> (duration-weighted mean SPL, total duration)."""
    stats: dict[str, list[float]] = {}
    for rec in recordings:
        spl_mass, dur = stats.setdefault(rec.location_id, [0.0, 0.0])
        stats[rec.location_id][0] = spl_mass + rec.spl_db * rec.duration_s
        stats[rec.location_id][1] = dur + rec.duration_s
    return {loc: (mass / dur, dur) for loc, (mass, dur) in stats.items()}


def find_spl_bins(
    recordings,
    min_locations: int = 6,
    min_hours: float = 12.0,
) -> BinPartition:
    """Partition locations into four SPL bins meeting both floor constraints.

    Exhaustive search over location-SPL order statistics; among feasible
    edge triples the one maximizing the minimum bin duration wins (ties:
    lexicographically smallest cut indices).
    """
    stats = _location_stats(recordings)
    locs = sorted(stats, key=lambda l: (stats[l][0], l))
    n = len(locs)
    if n < NUM_BINS * min_locations:
        raise InfeasiblePartitionError(
            f"{n} locations cannot fill {NUM_BINS} bins of >= {min_locations}"
        )
    spls = [stats[l][0] for l in locs]
    durs = [stats[l][1] for l in locs]
    prefix = [0.0]
    for d in durs:
        prefix.append(prefix[-1] + d)
    min_s = min_hours * 3600.0

    best = None  # (min_bin_duration, negated-cuts) for max/tie-break
    best_cuts = None
    location_floor_met = False
    for cuts in itertools.combinations(range(1, n), 3):
        i, j, k = cuts
        sizes = (i, j - i, k - j, n - k)
        if min(sizes) < min_locations:
            continue
        location_floor_met = True
        bin_durs = (
            prefix[i],
            prefix[j] - prefix[i],
            prefix[k] - prefix[j],
            prefix[n] - prefix[k],
        )
        if min(bin_durs) < min_s:
            continue
        score = min(bin_durs)
        if best is None or score > best:
            best = score
            best_cuts = cuts
    if best_cuts is None:
        binding = (
            f"no edge triple leaves >= {min_locations} locations per bin"
            if not location_floor_met
            else f"no edge triple leaves >= {min_hours} h per bin"
        )
        raise InfeasiblePartitionError(
            f"SPL binning infeasible over {n} locations: {binding}"
        )

    i, j, k = best_cuts
    groups = (locs[:i], locs[i:j], locs[j:k], locs[k:])
    edges = tuple(
        (spls[c - 1] + spls[c]) / 2.0 for c in best_cuts
    )
    return BinPartition(
        edges,
        tuple(frozenset(g) for g in groups),
        tuple(sum(stats[l][1] for l in g) for g in groups),
    )


@dataclass(frozen=True)
class SplitReport:
    fractions: dict
    target_fractions: dict
    ratio_ok: bool


def check_split_assignment(
    recordings, partition: BinPartition, min_locations: int = 2
) -> list[str]:
    """Independent constraint checker; returns human-readable violations."""
    problems = []
    by_loc: dict[str, set] = {}
    for rec in recordings:
        by_loc.setdefault(rec.location_id, set()).add(rec.split)
    for loc, splits in by_loc.items():
        if len(splits) != 1:
            problems.append(f"location {loc} straddles splits {sorted(splits)}")
    for split in SPLITS:
        for b in range(NUM_BINS):
            locs = {
                rec.location_id
                for rec in recordings
                if rec.split == split
                and rec.location_id in partition.locations[b]
            }
            if len(locs) < min_locations:
                problems.append(
                    f"({split}, bin {b}) has {len(locs)} locations (< {min_locations})"
                )
    unassigned = [rec.id for rec in recordings if rec.split not in SPLITS]
    if unassigned:
        problems.append(f"unassigned recordings: {unassigned[:5]}")
    return problems


def assign_splits(
    recordings,
    partition: BinPartition,
    target_hours: dict | None = None,
    min_locations: int = 2,
    ratio_slack: float = 0.2,
) -> tuple[list[NoiseRecording], SplitReport]:
    """Assign whole locations to train/valid/test.

    Hard constraints: every recording of a location shares its split, and
    each (split, bin) covers at least `min_locations` locations. Split
    durations aim at the target ratio (default 30:10:5) within
    `ratio_slack`; when the coverage floor makes that impossible the
    result reports ratio_ok=False instead of failing.
    """
    if target_hours is None:
        target_hours = {"train": 30.0, "valid": 10.0, "test": 5.0}
    stats = _location_stats(recordings)
    total = sum(d for _, d in stats.values())
    t_sum = sum(target_hours.values())
    frac = {s: target_hours[s] / t_sum for s in SPLITS}

    assigned: dict[str, str] = {}
    load = {s: 0.0 for s in SPLITS}

    # coverage pass: smallest locations secure each (split, bin) pair
    for b in range(NUM_BINS):
        bin_locs = sorted(partition.locations[b], key=lambda l: (stats[l][1], l))
        if len(bin_locs) < min_locations * len(SPLITS):
            raise InfeasiblePartitionError(
                f"bin {b} has {len(bin_locs)} locations; "
                f"{min_locations * len(SPLITS)} needed for split coverage"
            )
        order = [s for s in ("test", "valid", "train") for _ in range(min_locations)]
        for loc, split in zip(bin_locs, order):
            assigned[loc] = split
            load[split] += stats[loc][1]

    # greedy pass: largest remaining location to the hungriest split
    remaining = sorted(
        (l for l in stats if l not in assigned),
        key=lambda l: (-stats[l][1], l),
    )
    for loc in remaining:
        deficit = {s: frac[s] * total - load[s] for s in SPLITS}
        split = max(SPLITS, key=lambda s: deficit[s])
        assigned[loc] = split
        load[split] += stats[loc][1]

    # repair pass: move locations out of overfull splits while legal
    def ratio_err():
        return {s: load[s] / total - frac[s] for s in SPLITS}

    def counts(split, b):
        return sum(
            1 for l, s in assigned.items() if s == split and l in partition.locations[b]
        )

    for _ in range(200):
        err = ratio_err()
        bad = [s for s in SPLITS if abs(err[s]) > ratio_slack * frac[s]]
        if not bad:
            break
        over = max(SPLITS, key=lambda s: err[s] / frac[s])
        under = min(SPLITS, key=lambda s: err[s] / frac[s])
        movable = [
            l
            for l, s in assigned.items()
            if s == over and counts(over, partition.bin_of_location(l)) > min_locations
        ]
        if not movable:
            break
        current = sum(abs(e) for e in err.values())

        def post_move_error(loc):
            d = stats[loc][1]
            e = dict(err)
            e[over] -= d / total
            e[under] += d / total
            return sum(abs(v) for v in e.values())

        best_loc = min(movable, key=lambda l: (post_move_error(l), l))
        if post_move_error(best_loc) >= current:
            break
        assigned[best_loc] = under
        load[over] -= stats[best_loc][1]
        load[under] += stats[best_loc][1]

    out = [replace(rec, split=assigned[rec.location_id]) for rec in recordings]
    problems = check_split_assignment(out, partition, min_locations)
    if problems:
        raise InfeasiblePartitionError("; ".join(problems))
    err = ratio_err()
    ratio_ok = all(abs(err[s]) <= ratio_slack * frac[s] for s in SPLITS)
    if not ratio_ok:
        log.warning(
            "split duration ratios outside +/-%d%% of target: %s",
            int(ratio_slack * 100),
            {s: round(load[s] / total, 3) for s in SPLITS},
        )
    return out, SplitReport(
        {s: load[s] / total for s in SPLITS}, frac, ratio_ok
    )


@dataclass(frozen=True)
class LeakEstimate:
    """Estimated foreground-speech SNR of one 10 s chunk of a recording."""

    chunk_index: int
    foreground_path: str
    residual_path: str
    est_snr_db: float


@dataclass(frozen=True)
class RejectionStats:
    total: int
    rejected: int

    @property
    def fraction_rejected(self) -> float:
        return self.rejected / self.total if self.total else 0.0


def filter_speech_leakage(
    chunks, threshold_db: float = LEAK_THRESHOLD_DB
) -> tuple[list[LeakEstimate], RejectionStats]:
    """Keep chunks strictly below the threshold (-6.0 dB exactly is rejected)."""
    kept = [c for c in chunks if c.est_snr_db < threshold_db]
    stats = RejectionStats(total=len(chunks), rejected=len(chunks) - len(kept))
    return kept, stats


def chunk_leak_estimates(
    foreground: AudioBuffer,
    residual: AudioBuffer,
    foreground_path: str = "",
    residual_path: str = "",
    chunk_s: float = CHUNK_S,
) -> list[LeakEstimate]:
    """Per-chunk foreground-vs-residual loudness SNR.

    The final shorter chunk is assessed too; a tail below one gating
    block (0.4 s) cannot be metered and is skipped. A chunk whose
    foreground gates to silence counts as -inf (kept by any threshold).
    """
    if foreground.num_samples != residual.num_samples:
        raise ValueError("foreground/residual length mismatch")
    fs = foreground.sample_rate_hz
    chunk = int(round(chunk_s * fs))
    out = []
    for idx, start in enumerate(range(0, foreground.num_samples, chunk)):
        stop = min(start + chunk, foreground.num_samples)
        if stop - start < int(_MIN_METER_S * fs):
            break
        fg = AudioBuffer(foreground.samples[:, start:stop], fs)
        res = AudioBuffer(residual.samples[:, start:stop], fs)
        lf = measure_lufs(fg)
        lr = measure_lufs(res)
        if lr.is_silent:
            est = float("inf")  # pure speech chunk: always rejected
        elif lf.is_silent:
            est = float("-inf")
        else:
            est = lf.value - lr.value
        out.append(LeakEstimate(idx, foreground_path, residual_path, est))
    return out
