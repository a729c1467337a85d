"""Command-line front end.

Exit codes: 0 success, 1 usage or I/O error, 2 constraint or verification
failure. Logs go to stderr; machine-readable output goes to files or
stdout only. Flag precedence: command line > --config JSON > defaults;
the effective configuration is echoed into every output directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from ._accel import BACKEND
from .curation import (
    NoiseRecording,
    SPLITS,
    assign_splits,
    chunk_leak_estimates,
    filter_speech_leakage,
    find_spl_bins,
)
from .errors import InfeasiblePartitionError, SepmixError, VerificationError
from .evaluate import (
    MASK_KINDS,
    TASKS,
    EvalResult,
    UtteranceScore,
    evaluate_utterance,
    export_per_utterance_csv,
    format_table,
    results_to_json,
)
from .metrics import si_sdr, si_sdr_permuted
from .objectives import (
    EmbeddingLabelPair,
    chimera_loss,
    dc_classic,
    dc_noise_aware,
    dc_whitened,
    grad_check,
    tpsa_loss,
)
from .planning import (
    NoiseClip,
    NoiseIndex,
    SpeechUtterance,
    plan_dataset,
    read_manifest,
    write_manifest,
)
from .render import AudioCache, render_manifest, verify_manifest
from .stft import load_spectrogram
from .synth import SPL_OFFSET_DB, make_demo_corpus
from .tensorio import load_tensor
from .wavfile import read_wav

log = logging.getLogger("sepmix")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONSTRAINT = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors are exit code 1, not 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_config(path):
    if not path:
        return {}
    with open(path) as f:
        cfg = json.load(f)
    if not isinstance(cfg, dict):
        raise SepmixError("--config must hold a JSON object")
    return cfg


def _opt(args, config, key, default=None):
    """CLI flag > config file entry > default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _echo_config(out_dir: Path, command: str, effective: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "backend": BACKEND,
        "command": command,
        "config": {k: effective[k] for k in sorted(effective)},
        "tool_version": __version__,
    }
    with open(out_dir / "run_config.json", "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


# ---------------------------------------------------------------- make-demo


def cmd_make_demo(args):
    config = _load_config(args.config)
    out = Path(_opt(args, config, "out"))
    seed = int(_opt(args, config, "seed", 0))
    rate = int(_opt(args, config, "rate", 8000))
    corpus = make_demo_corpus(
        out,
        seed=seed,
        speech_rate_hz=rate,
        noise_rate_hz=int(_opt(args, config, "noise_rate", 16000)),
        num_locations=int(_opt(args, config, "locations", 12)),
        num_pairs=int(_opt(args, config, "pairs", 12)),
    )
    _echo_config(out, "make-demo", {"seed": seed, "rate": rate, "out": str(out)})
    log.info("demo corpus at %s", corpus.root)
    print(corpus.noise_metadata_csv)
    print(corpus.pairs_csv)
    return EXIT_OK


# ------------------------------------------------------------------- curate


def _read_noise_metadata(metadata_csv: Path, root: Path, spl_offset_db: float):
    recordings = []
    with open(metadata_csv, newline="") as f:
        for row in csv.DictReader(f):
            path = row["path"]
            duration = row.get("duration_s") or ""
            spl = row.get("spl_db") or ""
            if not duration or not spl:
                buf = read_wav(root / path)
                if not duration:
                    duration = buf.duration_s
                if not spl:
                    rms = math.sqrt(float(np.mean(buf.samples**2)))
                    spl = 20.0 * math.log10(max(rms, 1e-12)) + spl_offset_db
            recordings.append(
                NoiseRecording(
                    id=row["recording_id"],
                    location_id=row["location_id"],
                    path=path,
                    duration_s=float(duration),
                    spl_db=float(spl),
                )
            )
    return recordings


def _leak_filter_recording(rec, stems_dir: Path, root: Path, threshold_db: float):
    """Kept (start_s, end_s) spans of one recording, plus its estimates."""
    fg_path = stems_dir / f"{rec.id}.foreground.wav"
    res_path = stems_dir / f"{rec.id}.residual.wav"
    if not fg_path.exists() or not res_path.exists():
        return [(0.0, rec.duration_s)], []
    fg = read_wav(fg_path)
    res = read_wav(res_path)
    estimates = chunk_leak_estimates(fg, res, str(fg_path), str(res_path))
    kept, _stats = filter_speech_leakage(estimates, threshold_db)
    kept_idx = {e.chunk_index for e in kept}
    chunk = 10.0
    spans = []
    for e in estimates:
        if e.chunk_index not in kept_idx:
            continue
        start = e.chunk_index * chunk
        stop = min(start + chunk, fg.duration_s)
        if spans and abs(spans[-1][1] - start) < 1e-9:
            spans[-1] = (spans[-1][0], stop)
        else:
            spans.append((start, stop))
    return spans, estimates


def cmd_curate(args):
    config = _load_config(args.config)
    root = Path(_opt(args, config, "root", Path(args.metadata_csv).parent.parent))
    spl_offset = float(_opt(args, config, "spl_offset_db", SPL_OFFSET_DB))
    recordings = _read_noise_metadata(Path(args.metadata_csv), root, spl_offset)

    partition = find_spl_bins(
        recordings,
        min_locations=int(_opt(args, config, "min_locations", 6)),
        min_hours=float(_opt(args, config, "min_hours", 12.0)),
    )
    target_hours = [float(x) for x in str(_opt(args, config, "target_hours", "30,10,5")).split(",")]
    assigned, split_report = assign_splits(
        recordings,
        partition,
        dict(zip(SPLITS, target_hours)),
        min_locations=int(_opt(args, config, "min_split_locations", 2)),
    )

    threshold = float(_opt(args, config, "leak_threshold_db", -6.0))
    stems_dir = _opt(args, config, "leak_stems")
    clips = []
    all_estimates = []
    rejected_s = 0.0
    for rec in assigned:
        if stems_dir:
            spans, estimates = _leak_filter_recording(rec, Path(stems_dir), root, threshold)
            all_estimates.extend(estimates)
            rejected_s += rec.duration_s - sum(b - a for a, b in spans)
        else:
            spans = [(0.0, rec.duration_s)]
        for i, (start, stop) in enumerate(spans):
            clips.append(
                NoiseClip(
                    clip_id=f"{rec.id}_c{i}",
                    recording_id=rec.id,
                    location_id=rec.location_id,
                    path=rec.path,
                    start_s=round(start, 6),
                    duration_s=round(stop - start, 6),
                    spl_db=rec.spl_db,
                    bin_index=partition.bin_of_location(rec.location_id),
                    split=rec.split,
                )
            )

    total_s = sum(r.duration_s for r in recordings)
    index = NoiseIndex(
        clips,
        [float(e) for e in partition.edges],
        meta={
            "bin_durations_s": [round(d, 6) for d in partition.durations_s],
            "bin_locations": [sorted(l) for l in partition.locations],
            "leak_fraction_rejected": round(rejected_s / total_s, 6) if stems_dir else None,
            "split_fractions": {k: round(v, 6) for k, v in split_report.fractions.items()},
            "split_ratio_ok": split_report.ratio_ok,
        },
    )
    out = Path(_opt(args, config, "out"))
    out.parent.mkdir(parents=True, exist_ok=True)
    index.save(out)
    _echo_config(out.parent, "curate", {
        "metadata_csv": str(args.metadata_csv), "min_locations": int(_opt(args, config, "min_locations", 6)),
        "min_hours": float(_opt(args, config, "min_hours", 12.0)), "out": str(out),
        "spl_offset_db": spl_offset, "leak_threshold_db": threshold,
    })

    print(f"locations: {sum(len(l) for l in partition.locations)}  "
          f"recordings: {len(recordings)}  hours: {total_s / 3600:.2f}")
    print(f"bin edges (SPL dB): {[round(e, 2) for e in partition.edges]}")
    for b in range(4):
        print(f"  bin {b}: {len(partition.locations[b]):3d} locations  "
              f"{partition.durations_s[b] / 3600:6.2f} h")
    for s in SPLITS:
        print(f"  split {s:<5}: {split_report.fractions[s] * 100:5.1f}% of audio "
              f"(target {split_report.target_fractions[s] * 100:.1f}%)")
    if stems_dir:
        kept, stats = filter_speech_leakage(all_estimates, threshold)
        print(f"leak filter: rejected {stats.rejected}/{stats.total} chunks "
              f"({100 * stats.fraction_rejected:.1f}%)")
    print(f"usable clips: {len(clips)}")
    return EXIT_OK


# --------------------------------------------------------------- plan/render


def _read_pairs(pairs_csv: Path, cache: AudioCache, rate: int):
    pairs = []
    with open(pairs_csv, newline="") as f:
        for row in csv.DictReader(f):
            n1 = cache(row["s1_path"], rate).num_samples
            n2 = cache(row["s2_path"], rate).num_samples
            pairs.append(
                (
                    row["mixture_id"],
                    SpeechUtterance(row["s1_path"], n1, rate),
                    SpeechUtterance(row["s2_path"], n2, rate),
                )
            )
    return pairs


def cmd_plan(args):
    config = _load_config(args.config)
    rate = int(_opt(args, config, "rate", 8000))
    seed = _opt(args, config, "seed")
    if seed is None:
        raise SepmixError("plan requires --seed")
    pairs_csv = Path(_opt(args, config, "pairs"))
    root = Path(_opt(args, config, "root", pairs_csv.parent.parent))
    cache = AudioCache(root)
    index = NoiseIndex.load(_opt(args, config, "index"))
    pairs = _read_pairs(pairs_csv, cache, rate)
    manifest = plan_dataset(
        pairs,
        index,
        int(seed),
        _opt(args, config, "mode", "max"),
        rate,
        split=_opt(args, config, "split"),
        audio_provider=cache,
    )
    out = Path(_opt(args, config, "out"))
    out.parent.mkdir(parents=True, exist_ok=True)
    write_manifest(manifest, out)
    _echo_config(out.parent, "plan", {
        "index": str(_opt(args, config, "index")), "mode": manifest.mode,
        "out": str(out), "pairs": str(pairs_csv), "rate": rate,
        "root": str(root), "seed": int(seed), "split": _opt(args, config, "split"),
    })
    log.info("planned %d rows -> %s", len(manifest.rows), out)
    return EXIT_OK


def cmd_render(args):
    config = _load_config(args.config)
    manifest = read_manifest(args.manifest)
    root = _opt(args, config, "root", Path(args.manifest).parent.parent)
    out = Path(_opt(args, config, "out"))
    threads = int(_opt(args, config, "threads", 1))
    render_manifest(
        manifest,
        out,
        audio_provider=AudioCache(Path(root)),
        threads=threads,
        encoding=_opt(args, config, "encoding", "float32"),
    )
    _echo_config(out, "render", {
        "encoding": _opt(args, config, "encoding", "float32"),
        "manifest": str(args.manifest), "out": str(out),
        "root": str(root), "threads": threads,
    })
    log.info("rendered %d rows -> %s", len(manifest.rows), out)
    return EXIT_OK


def cmd_verify(args):
    config = _load_config(args.config)
    manifest = read_manifest(args.manifest)
    report = verify_manifest(
        manifest,
        Path(_opt(args, config, "rendered")),
        tolerance_db=float(_opt(args, config, "tolerance_db", 0.1)),
        threads=int(_opt(args, config, "threads", 1)),
    )
    worst_snr = max((abs(r.snr_error_db) for r in report.rows if math.isfinite(r.snr_error_db)), default=math.nan)
    worst_lvl = max((abs(r.level_error_db) for r in report.rows if math.isfinite(r.level_error_db)), default=math.nan)
    print(f"verified {len(report.rows)} rows: "
          f"max |snr err| {worst_snr:.4f} dB, max |level err| {worst_lvl:.4f} dB, "
          f"{len(report.failures)} failures")
    if not report.ok:
        for r in report.failures[:20]:
            print(f"  FAIL {r.mixture_id}: {r.detail}")
        return EXIT_CONSTRAINT
    return EXIT_OK


# ---------------------------------------------------------------- evaluation


def _rendered_utterances(rendered: Path, rate_check=None):
    mix_dir = rendered / "mix"
    ids = sorted(p.stem for p in mix_dir.glob("*.wav"))
    if not ids:
        raise SepmixError(f"no rendered mixtures under {mix_dir}")
    for utt_id in ids:
        stems = {
            stem: read_wav(rendered / stem / f"{utt_id}.wav")
            for stem in ("s1", "s2", "noise")
        }
        yield utt_id, stems


def cmd_oracle_eval(args):
    config = _load_config(args.config)
    rendered = Path(_opt(args, config, "rendered"))
    out = Path(_opt(args, config, "out"))
    out.mkdir(parents=True, exist_ok=True)
    tasks = [_opt(args, config, "task", "all")]
    if tasks == ["all"]:
        tasks = list(TASKS)
    kinds = tuple(str(_opt(args, config, "kinds", ",".join(MASK_KINDS))).split(","))
    threads = int(_opt(args, config, "threads", 1))

    utterances = list(_rendered_utterances(rendered))
    all_results = {}
    for task in tasks:
        results = {kind: EvalResult(task, kind) for kind in ("noisy", *kinds)}

        def one(item):
            utt_id, stems = item
            return evaluate_utterance(utt_id, stems, task, kinds)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                scored = list(pool.map(one, utterances))
        else:
            scored = [one(item) for item in utterances]
        for per_kind in scored:
            for kind, score in per_kind.items():
                results[kind].per_utterance.append(score)
        all_results[task] = results
        for kind, res in results.items():
            export_per_utterance_csv(res, out / f"{task}_{kind}.csv")

    (out / "summary.json").write_text(results_to_json(all_results) + "\n")
    _echo_config(out, "oracle-eval", {
        "kinds": ",".join(kinds), "out": str(out),
        "rendered": str(rendered), "task": _opt(args, config, "task", "all"),
        "threads": threads,
    })
    print(format_table(all_results))
    return EXIT_OK


def cmd_eval(args):
    config = _load_config(args.config)
    est_dirs = [Path(p) for p in str(_opt(args, config, "estimates")).split(",")]
    ref_dirs = [Path(p) for p in str(_opt(args, config, "references")).split(",")]
    if len(est_dirs) != len(ref_dirs):
        raise SepmixError("need matching numbers of estimate and reference dirs")
    mix_dir = _opt(args, config, "mixtures")
    out = Path(_opt(args, config, "out"))
    ids = sorted(p.stem for p in ref_dirs[0].glob("*.wav"))
    if not ids:
        raise SepmixError(f"no references in {ref_dirs[0]}")
    result = EvalResult("eval", "estimated")
    for utt_id in ids:
        refs = [read_wav(d / f"{utt_id}.wav") for d in ref_dirs]
        ests = [read_wav(d / f"{utt_id}.wav") for d in est_dirs]
        per_source, perm = si_sdr_permuted(ests, refs)
        mean_db = float(np.mean(per_source))
        if mix_dir:
            mix = read_wav(Path(mix_dir) / f"{utt_id}.wav")
            noisy = float(np.mean([si_sdr(mix, r) for r in refs]))
        else:
            noisy = math.nan
        result.per_utterance.append(
            UtteranceScore(utt_id, mean_db, noisy, mean_db - noisy, perm)
        )
    out.parent.mkdir(parents=True, exist_ok=True)
    export_per_utterance_csv(result, out)
    print(f"{len(ids)} utterances: mean SI-SDR {result.mean_si_sdr_db:.2f} dB"
          + ("" if math.isnan(result.mean_noisy_db)
             else f", improvement {result.mean_improvement_db:.2f} dB"))
    return EXIT_OK


# ---------------------------------------------------------------- loss-check


def cmd_loss_check(args):
    config = _load_config(args.config)
    desc_path = Path(args.descriptor)
    desc = json.loads(desc_path.read_text())
    base = desc_path.parent

    def resolve(key):
        return base / desc[key] if desc.get(key) else None

    tolerance = float(_opt(args, config, "tolerance", 1e-4))
    epsilon = float(_opt(args, config, "epsilon", 1e-6))
    report = {"losses": {}, "grad_checks": {}}
    failed = False

    v = load_tensor(resolve("embeddings")) if desc.get("embeddings") else None
    if v is not None:
        y = load_tensor(resolve("labels"))
        w = load_tensor(resolve("weights")) if desc.get("weights") else None
        nm = load_tensor(resolve("noise_mask")).astype(bool) if desc.get("noise_mask") else None
        pair = EmbeddingLabelPair(v, y, w, nm)
        losses = {"dc_classic": dc_classic, "dc_whitened": dc_whitened}
        if nm is not None:
            losses["dc_noise_aware"] = dc_noise_aware
        for name, fn in losses.items():
            report["losses"][name] = fn(pair).value

            def wrapped(x, fn=fn):
                p = EmbeddingLabelPair(x, y, w, nm)
                lv = fn(p)
                return lv.value, lv.gradients["embeddings"]

            chk = grad_check(wrapped, np.array(v), epsilon=epsilon, tolerance=tolerance)
            report["grad_checks"][name] = {
                "max_rel_error": chk.max_rel_error, "passed": chk.passed,
            }
            failed |= not chk.passed

    tpsa_value = None
    if desc.get("mixture") and desc.get("sources") and desc.get("masks"):
        mixture = load_spectrogram(base / desc["mixture"])
        sources = [load_spectrogram(base / p) for p in desc["sources"]]
        masks = [load_tensor(base / p) for p in desc["masks"]]
        lv = tpsa_loss(masks, mixture, sources)
        tpsa_value = lv
        report["losses"]["tpsa"] = lv.value
        report["permutation"] = list(lv.permutation)

        def wrapped_mask(m0):
            l = tpsa_loss([m0] + masks[1:], mixture, sources)
            return l.value, l.gradients["masks"][0]

        chk = grad_check(wrapped_mask, np.array(masks[0]), epsilon=epsilon, tolerance=tolerance)
        report["grad_checks"]["tpsa"] = {
            "max_rel_error": chk.max_rel_error, "passed": chk.passed,
        }
        failed |= not chk.passed

    if v is not None and tpsa_value is not None:
        alpha = float(desc.get("alpha", 0.975))
        report["losses"]["chimera"] = chimera_loss(
            dc_classic(pair), tpsa_value, alpha
        ).value
        report["alpha"] = alpha

    text = json.dumps(report, indent=2, sort_keys=True)
    out = _opt(args, config, "out")
    if out:
        Path(out).write_text(text + "\n")
    print(text)
    for name, chk in report["grad_checks"].items():
        status = "ok" if chk["passed"] else "FAIL"
        log.info("grad check %-14s %s (max rel %.2e)", name, status, chk["max_rel_error"])
    return EXIT_CONSTRAINT if failed else EXIT_OK


# --------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sepmix", description=__doc__)
    parser.add_argument("--version", action="version", version=f"sepmix {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(fn=fn)
        p.add_argument("--config", help="JSON file with default flag values")
        return p

    p = add("make-demo", cmd_make_demo, help="generate a synthetic mini-corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--rate", type=int, choices=(8000, 16000))
    p.add_argument("--noise-rate", type=int, dest="noise_rate")
    p.add_argument("--locations", type=int)
    p.add_argument("--pairs", type=int)

    p = add("curate", cmd_curate, help="bin, split, and leak-filter a noise corpus")
    p.add_argument("metadata_csv")
    p.add_argument("--out", required=True, help="output index JSON")
    p.add_argument("--root", help="base dir for relative audio paths")
    p.add_argument("--min-locations", type=int, dest="min_locations")
    p.add_argument("--min-hours", type=float, dest="min_hours")
    p.add_argument("--min-split-locations", type=int, dest="min_split_locations")
    p.add_argument("--target-hours", dest="target_hours", help="e.g. 30,10,5")
    p.add_argument("--spl-offset-db", type=float, dest="spl_offset_db")
    p.add_argument("--leak-stems", dest="leak_stems",
                   help="dir of <id>.foreground.wav/<id>.residual.wav pairs")
    p.add_argument("--leak-threshold-db", type=float, dest="leak_threshold_db")

    p = add("plan", cmd_plan, help="draw a mixture manifest")
    p.add_argument("--pairs", required=True, help="CSV: mixture_id,s1_path,s2_path")
    p.add_argument("--index", required=True, help="noise index JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=("min", "max"))
    p.add_argument("--rate", type=int, choices=(8000, 16000))
    p.add_argument("--split", choices=SPLITS)
    p.add_argument("--root")
    p.add_argument("--out", required=True, help="manifest CSV path")

    p = add("render", cmd_render, help="render manifest rows to WAV trees")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--root")
    p.add_argument("--threads", type=int)
    p.add_argument("--encoding", choices=("float32", "pcm16"))

    p = add("verify", cmd_verify, help="re-measure rendered audio against its manifest")
    p.add_argument("manifest")
    p.add_argument("--rendered", required=True)
    p.add_argument("--tolerance-db", type=float, dest="tolerance_db")
    p.add_argument("--threads", type=int)

    p = add("oracle-eval", cmd_oracle_eval, help="oracle-mask benchmark on rendered stems")
    p.add_argument("--rendered", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--task", choices=("all", *TASKS))
    p.add_argument("--kinds", help="comma list from irm,ibm,psf")
    p.add_argument("--threads", type=int)

    p = add("eval", cmd_eval, help="score estimate dirs against reference dirs")
    p.add_argument("--estimates", required=True, help="comma list, one dir per source")
    p.add_argument("--references", required=True, help="comma list, one dir per source")
    p.add_argument("--mixtures", help="dir of unprocessed mixtures (for improvement)")
    p.add_argument("--out", required=True, help="per-utterance CSV")

    p = add("loss-check", cmd_loss_check, help="evaluate objectives on tensor dumps")
    p.add_argument("descriptor", help="JSON naming tensor blobs")
    p.add_argument("--out", help="report JSON")
    p.add_argument("--tolerance", type=float)
    p.add_argument("--epsilon", type=float)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (InfeasiblePartitionError, VerificationError) as exc:
        log.error("%s", exc)
        return EXIT_CONSTRAINT
    except (SepmixError, OSError, json.JSONDecodeError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
