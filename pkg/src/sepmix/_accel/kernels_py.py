"""Numpy/scipy implementations of the hot kernels.

Signatures mirror the compiled extension exactly; see `sepmix._accel`.
"""

import numpy as np
from scipy.signal import sosfilt


def fir_rational_filter(h, x, up, down, delay, n_out):
    """Polyphase FIR core: filter `x` zero-stuffed by `up`, keep every
    `down`-th output starting at `delay`.

    y[j] = sum_k h[k] * xu[j*down + delay - k], xu the zero-stuffed input.
    """
    h = np.ascontiguousarray(h, dtype=np.float64)
    x = np.ascontiguousarray(x, dtype=np.float64)
    xu = np.zeros(len(x) * up, dtype=np.float64)
    xu[::up] = x
    full = np.convolve(xu, h)
    idx = delay + down * np.arange(n_out, dtype=np.int64)
    out = np.zeros(n_out, dtype=np.float64)
    valid = idx < len(full)
    out[valid] = full[idx[valid]]
    return out


def biquad_cascade(sos, x):
    """Run `x` through a cascade of second-order sections (a0 == 1)."""
    # scipy needs writeable inputs; callers may hold frozen arrays
    sos = np.array(sos, dtype=np.float64, order="C", copy=True)
    x = np.array(x, dtype=np.float64, order="C", copy=True)
    return sosfilt(sos, x)


def overlap_add(frames, hop, out_len):
    """Sum windowed frames into a single signal at `hop` spacing."""
    frames = np.ascontiguousarray(frames, dtype=np.float64)
    out = np.zeros(out_len, dtype=np.float64)
    win = frames.shape[1]
    for t in range(frames.shape[0]):
        start = t * hop
        stop = min(start + win, out_len)
        if start >= out_len:
            break
        out[start:stop] += frames[t, : stop - start]
    return out
