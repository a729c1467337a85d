"""Oracle time-frequency masks computed from ground-truth spectrograms.

Masks are applied to the mixture magnitude and resynthesized with the
mixture phase. 0/0 bins resolve to 0: silence stays silent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SepmixError
from .stft import Spectrogram

MASK_KINDS = ("irm", "ibm", "psf")


@dataclass(frozen=True)
class MaskSet:
    """One real mask per source, shape (sources, bins, frames)."""

    masks: np.ndarray = field(repr=False)
    kind: str

    def __post_init__(self):
        arr = np.asarray(self.masks, dtype=np.float64)
        if arr.ndim != 3:
            raise SepmixError(f"masks must be (C, F, T), got {arr.shape}")
        if self.kind in ("irm", "ibm"):
            if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
                raise SepmixError(f"{self.kind} mask outside [0, 1]")
        if self.kind == "ibm" and arr.size:
            if not np.all((arr == 0.0) | (arr == 1.0)):
                raise SepmixError("ibm mask must be binary")
        arr = np.array(arr, order="C", copy=True)
        arr.flags.writeable = False
        object.__setattr__(self, "masks", arr)


def oracle_mask(target: Spectrogram, others: list[Spectrogram], kind: str) -> np.ndarray:
    """Oracle mask for `target` against the complex sum of `others`.

    irm: |s| / (|s| + |n|)
    ibm: 1 where |s| > |n|, else 0
    psf: cos(angle(s) - angle(x)) * |s| / |x|, x = s + n (unclipped)
    """
    if kind not in MASK_KINDS:
        raise SepmixError(f"unknown mask kind {kind!r}")
    s = target.bins
    n = np.zeros_like(s)
    for o in others:
        if o.bins.shape != s.shape:
            raise SepmixError(f"shape mismatch: {o.bins.shape} vs {s.shape}")
        n = n + o.bins
    mag_s = np.abs(s)

    if kind == "irm":
        denom = mag_s + np.abs(n)
        return np.divide(mag_s, denom, out=np.zeros_like(mag_s), where=denom > 0)
    if kind == "ibm":
        return (mag_s > np.abs(n)).astype(np.float64)
    x = s + n
    power_x = (x * x.conj()).real
    # cos(theta)*|s|/|x| == Re(s * conj(x)) / |x|^2
    return np.divide((s * x.conj()).real, power_x, out=np.zeros_like(mag_s), where=power_x > 0)


def oracle_mask_set(sources: list[Spectrogram], kind: str) -> MaskSet:
    """Masks for every source against the rest, as one MaskSet."""
    masks = np.stack(
        [
            oracle_mask(src, [o for j, o in enumerate(sources) if j != c], kind)
            for c, src in enumerate(sources)
        ]
    )
    return MaskSet(masks, kind)
