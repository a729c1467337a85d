"""Oracle-mask benchmark over the four evaluation tasks.

Tasks define (mixture, targets) from the rendered stems:

  enhance-single  s1 + noise          -> [s1]
  enhance-both    s1 + s2 + noise     -> [s1 + s2]
  separate-clean  s1 + s2             -> [s1, s2]
  separate-noisy  s1 + s2 + noise     -> [s1, s2]

Masks are computed on the task-mixture STFT, resynthesized with the
mixture phase, and scored with SI-SDR (permutation-resolved for the
two-source tasks). The 'noisy' column scores the unprocessed mixture.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import AudioBuffer, mix_buffers
from .errors import SepmixError
from .masks import MASK_KINDS, oracle_mask
from .metrics import SI_SDR_CAP_DB, si_sdr, si_sdr_permuted
from .stft import Spectrogram, StftConfig, apply_mask, istft, stft

TASKS = ("enhance_single", "enhance_both", "separate_clean", "separate_noisy")


@dataclass(frozen=True)
class UtteranceScore:
    id: str
    si_sdr_db: float  # mean over sources under the chosen permutation
    si_sdr_noisy_db: float
    improvement_db: float
    permutation: tuple[int, ...]
    capped: bool = False


@dataclass
class EvalResult:
    task: str
    kind: str  # noisy | irm | ibm | psf | estimated
    per_utterance: list[UtteranceScore] = field(default_factory=list)

    @property
    def mean_si_sdr_db(self) -> float:
        return float(np.mean([u.si_sdr_db for u in self.per_utterance]))

    @property
    def mean_noisy_db(self) -> float:
        return float(np.mean([u.si_sdr_noisy_db for u in self.per_utterance]))

    @property
    def mean_improvement_db(self) -> float:
        return float(np.mean([u.improvement_db for u in self.per_utterance]))


def task_signals(stems: dict, task: str) -> tuple[AudioBuffer, list[AudioBuffer]]:
    """(mixture, targets) for one task from the s1/s2/noise stems."""
    s1, s2, noise = stems["s1"], stems["s2"], stems["noise"]
    if task == "enhance_single":
        return mix_buffers(s1, noise), [s1]
    if task == "enhance_both":
        return mix_buffers(s1, s2, noise), [mix_buffers(s1, s2)]
    if task == "separate_clean":
        return mix_buffers(s1, s2), [s1, s2]
    if task == "separate_noisy":
        return mix_buffers(s1, s2, noise), [s1, s2]
    raise SepmixError(f"unknown task {task!r}; expected one of {TASKS}")


def _score(estimates, targets) -> tuple[float, tuple[int, ...], bool]:
    per_source, perm = si_sdr_permuted(estimates, targets)
    mean = float(np.mean(per_source))
    capped = any(abs(v) >= SI_SDR_CAP_DB for v in per_source)
    return mean, perm, capped


def evaluate_utterance(
    utt_id: str, stems: dict, task: str, kinds=MASK_KINDS
) -> dict[str, UtteranceScore]:
    """Noisy baseline plus one score per requested oracle mask kind."""
    mixture, targets = task_signals(stems, task)
    cfg = StftConfig(mixture.sample_rate_hz)
    mix_spec = stft(mixture, cfg)
    target_specs = [stft(t, cfg) for t in targets]

    noisy_db = float(np.mean([si_sdr(mixture, t) for t in targets]))
    out = {
        "noisy": UtteranceScore(
            utt_id,
            noisy_db,
            noisy_db,
            0.0,
            tuple(range(len(targets))),
            any(abs(si_sdr(mixture, t)) >= SI_SDR_CAP_DB for t in targets),
        )
    }
    for kind in kinds:
        estimates = []
        for c, t_spec in enumerate(target_specs):
            interference = Spectrogram(
                mix_spec.bins - t_spec.bins, cfg, mix_spec.original_len
            )
            mask = oracle_mask(t_spec, [interference], kind)
            estimates.append(istft(apply_mask(mix_spec, mask)))
        mean, perm, capped = _score(estimates, targets)
        out[kind] = UtteranceScore(utt_id, mean, noisy_db, mean - noisy_db, perm, capped)
    return out


def run_oracle_benchmark(
    utterances, task: str, kinds=MASK_KINDS
) -> dict[str, EvalResult]:
    """Score an iterable of (id, stems) pairs; returns results per kind.

    `stems` maps 's1'/'s2'/'noise' to AudioBuffers of equal length/rate.
    """
    results = {kind: EvalResult(task, kind) for kind in ("noisy", *kinds)}
    for utt_id, stems in utterances:
        scores = evaluate_utterance(utt_id, stems, task, kinds)
        for kind, score in scores.items():
            results[kind].per_utterance.append(score)
    if not next(iter(results.values())).per_utterance:
        raise SepmixError("no utterances to evaluate")
    return results


def export_per_utterance_csv(result: EvalResult, path) -> None:
    """Write rows `id,input_si_sdr_db,output_si_sdr_db,improvement_db,permutation`."""
    with open(path, "w", newline="\n") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(
            ["id", "input_si_sdr_db", "output_si_sdr_db", "improvement_db", "permutation"]
        )
        for u in result.per_utterance:
            writer.writerow(
                [
                    u.id,
                    f"{u.si_sdr_noisy_db:.6f}",
                    f"{u.si_sdr_db:.6f}",
                    f"{u.improvement_db:.6f}",
                    "-".join(str(p) for p in u.permutation),
                ]
            )


def format_table(results_by_task: dict[str, dict[str, EvalResult]]) -> str:
    """Aligned text table: one row per task, mean SI-SDR per column."""
    kinds = ["noisy"] + [k for k in MASK_KINDS]
    header = f"{'task':<16}" + "".join(f"{k:>10}" for k in kinds)
    lines = [header, "-" * len(header)]
    for task, results in results_by_task.items():
        cells = []
        for kind in kinds:
            if kind in results:
                cells.append(f"{results[kind].mean_si_sdr_db:>10.2f}")
            else:
                cells.append(f"{'-':>10}")
        lines.append(f"{task:<16}" + "".join(cells))
    return "\n".join(lines)


def results_to_json(results_by_task: dict[str, dict[str, EvalResult]]) -> str:
    payload = {
        task: {
            kind: {
                "mean_si_sdr_db": res.mean_si_sdr_db,
                "mean_improvement_db": res.mean_improvement_db,
                "num_utterances": len(res.per_utterance),
            }
            for kind, res in results.items()
        }
        for task, results in results_by_task.items()
    }
    return json.dumps(payload, indent=2, sort_keys=True)
