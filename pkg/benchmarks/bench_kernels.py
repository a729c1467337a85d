#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy/scipy fallback.

Run after an editable install:

    python3 benchmarks/bench_kernels.py [--seconds 10] [--repeat 5]

Covers the three hot paths: polyphase FIR resampling, the K-weighting
biquad cascade, and overlap-add synthesis. Also times the user-facing
operations (resample, measure_lufs, istft) under each backend.
"""

import argparse
import time

import numpy as np

from sepmix._accel import kernels_py

try:
    from sepmix._accel import _kernels as compiled
except ImportError:
    compiled = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench(name, make_args, repeat):
    args = make_args()
    t_py = best_of(lambda: getattr(kernels_py, name)(*args), repeat)
    row = f"{name:<22} python {t_py * 1e3:9.3f} ms"
    if compiled is not None:
        t_c = best_of(lambda: getattr(compiled, name)(*args), repeat)
        row += f"   compiled {t_c * 1e3:9.3f} ms   speedup {t_py / t_c:6.2f}x"
        a = getattr(kernels_py, name)(*args)
        b = getattr(compiled, name)(*args)
        err = np.max(np.abs(a - b)) / max(np.max(np.abs(a)), 1e-300)
        row += f"   max rel diff {err:.2e}"
    print(row)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--seconds", type=float, default=10.0,
                        help="signal length to process")
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    n48 = int(args.seconds * 48000)
    x48 = rng.standard_normal(n48)

    from sepmix.loudness import k_weighting_sos
    from sepmix.resample import _design, output_length

    h, up, down, delay = _design(48000, 16000)
    n_out = output_length(n48, 48000, 16000)
    sos = np.array(k_weighting_sos(48000))

    win, hop = 512, 128
    frames = rng.standard_normal((1 + (16 * 16000) // hop, win))
    out_len = (frames.shape[0] - 1) * hop + win

    if compiled is None:
        print("compiled kernels not built; showing fallback timings only")
    print(f"signal: {args.seconds:.0f} s at 48 kHz "
          f"(resample 48k->16k, {len(h)} taps; 2 biquads; "
          f"{frames.shape[0]} frames OLA)\n")
    bench("fir_rational_filter", lambda: (h, x48, up, down, delay, n_out), args.repeat)
    bench("biquad_cascade", lambda: (sos, x48), args.repeat)
    bench("overlap_add", lambda: (frames, hop, out_len), args.repeat)

    # end-to-end operations under each backend
    import sepmix._accel as accel
    from sepmix.audio import AudioBuffer
    from sepmix.loudness import measure_lufs
    from sepmix.resample import resample
    from sepmix.stft import stft, istft

    buf48 = AudioBuffer(x48, 48000)
    spec = stft(AudioBuffer(rng.standard_normal(16 * 16000), 16000))

    print("\nuser-facing operations:")
    for impl, label in ((kernels_py, "python"), (compiled, "compiled")):
        if impl is None:
            continue
        accel.fir_rational_filter = impl.fir_rational_filter
        accel.biquad_cascade = impl.biquad_cascade
        accel.overlap_add = impl.overlap_add
        t_rs = best_of(lambda: resample(buf48, 16000), args.repeat)
        t_lu = best_of(lambda: measure_lufs(buf48), args.repeat)
        t_is = best_of(lambda: istft(spec), args.repeat)
        print(f"  {label:<9} resample {t_rs * 1e3:8.2f} ms   "
              f"measure_lufs {t_lu * 1e3:8.2f} ms   istft {t_is * 1e3:8.2f} ms")


if __name__ == "__main__":
    main()
