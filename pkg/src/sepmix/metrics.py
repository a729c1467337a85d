"""Scale-invariant SDR and its permutation-resolved variant."""

from __future__ import annotations

import itertools
import math

import numpy as np

from .audio import AudioBuffer
from .errors import SepmixError

SI_SDR_CAP_DB = 100.0


def _as_signal(x) -> np.ndarray:
    if isinstance(x, AudioBuffer):
        return x.mono_samples
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise SepmixError("si_sdr expects mono signals")
    return x


def si_sdr(estimate, reference, cap_db: float = SI_SDR_CAP_DB) -> float:
    """SDR after projecting the estimate onto the reference.

    s_t = (<e, r>/||r||^2) r; returns 10 log10(||s_t||^2/||e - s_t||^2),
    capped to [-cap_db, +cap_db] so exact and orthogonal estimates stay
    finite. Invariant to (nonzero) scaling of the estimate.
    """
    e = _as_signal(estimate)
    r = _as_signal(reference)
    if len(e) != len(r):
        raise SepmixError(f"length mismatch: {len(e)} vs {len(r)}")
    ref_energy = np.dot(r, r)
    if ref_energy == 0.0:
        raise SepmixError("reference has zero energy")
    scale = np.dot(e, r) / ref_energy
    target = scale * r
    residual = e - target
    num = np.dot(target, target)
    den = np.dot(residual, residual)
    if den == 0.0:
        return cap_db
    if num == 0.0:
        return -cap_db
    value = 10.0 * math.log10(num / den)
    return min(max(value, -cap_db), cap_db)


def si_sdr_permuted(estimates, references, cap_db: float = SI_SDR_CAP_DB):
    """Best source ordering by mean SI-SDR over all permutations.

    Returns (per_source_db, permutation); permutation[c] is the estimate
    index scored against reference c. Exhaustive search, so at most four
    sources.
    """
    if len(estimates) != len(references):
        raise SepmixError("estimate/reference count mismatch")
    n_src = len(references)
    if n_src == 0:
        raise SepmixError("no sources")
    if n_src > 4:
        raise SepmixError("exhaustive permutation search limited to 4 sources")
    pair_db = np.empty((n_src, n_src))  # [estimate, reference]
    for i, e in enumerate(estimates):
        for j, r in enumerate(references):
            pair_db[i, j] = si_sdr(e, r, cap_db)
    best_perm = None
    best_mean = -math.inf
    for perm in itertools.permutations(range(n_src)):
        mean = sum(pair_db[perm[j], j] for j in range(n_src)) / n_src
        if mean > best_mean:
            best_mean = mean
            best_perm = perm
    per_source = [pair_db[best_perm[j], j] for j in range(n_src)]
    return per_source, best_perm
