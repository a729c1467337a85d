"""Deterministic assembly of speaker stems for one mixture.

Shared by the planner (to derive the common speaker gain against the
exact stems the renderer will produce) and the renderer itself.
"""

from __future__ import annotations

from .audio import AudioBuffer, apply_gain, pad_or_truncate, shift_and_fit
from .errors import ConvergenceError, SepmixError
from .loudness import measure_lufs


def _place_in_time(
    s1: AudioBuffer,
    s2: AudioBuffer,
    mode: str,
    pad_before_samples: int,
    pad_after_samples: int,
) -> tuple[AudioBuffer, AudioBuffer]:
    n1, n2 = s1.num_samples, s2.num_samples
    if mode == "min":
        if pad_before_samples or pad_after_samples:
            raise SepmixError("min mode forbids noise pads")
        n = min(n1, n2)
        return (
            pad_or_truncate(s1, n, "truncate_end"),
            pad_or_truncate(s2, n, "truncate_end"),
        )
    if mode == "max":
        n = max(n1, n2)
        total = pad_before_samples + n + pad_after_samples
        return (
            shift_and_fit(pad_or_truncate(s1, n, "pad_end_silence"), pad_before_samples, total),
            shift_and_fit(pad_or_truncate(s2, n, "pad_end_silence"), pad_before_samples, total),
        )
    raise SepmixError(f"mode must be min or max, got {mode!r}")


def place_speakers(
    s1: AudioBuffer,
    s2: AudioBuffer,
    rel_level_db: float,
    mode: str,
    pad_before_samples: int,
    pad_after_samples: int,
    tolerance_db: float = 0.02,
    max_iterations: int = 5,
) -> tuple[AudioBuffer, AudioBuffer]:
    """Time-align the two speakers, then gain speaker 2 so the placed
    stems differ by exactly `rel_level_db` LU.

    max mode: both padded with end silence to the longer signal, then
    placed after `pad_before_samples` of silence inside a field extended
    by the pads. min mode: both truncated to the shorter signal, pads
    must be zero. The level is set on the placed signals (padding and
    truncation shift gated loudness), with fixed-point refinement since
    gating can move with gain.
    """
    if s1.sample_rate_hz != s2.sample_rate_hz:
        raise SepmixError("speaker rate mismatch")
    s1p, s2p = _place_in_time(s1, s2, mode, pad_before_samples, pad_after_samples)
    l1 = measure_lufs(s1p)
    l2 = measure_lufs(s2p)
    if l1.is_silent or l2.is_silent:
        raise SepmixError("speaker gated to silence; cannot set relative level")
    gain = (l1.value - l2.value) - rel_level_db
    for _ in range(max_iterations):
        achieved = l1.value - measure_lufs(apply_gain(s2p, gain)).value
        error = rel_level_db - achieved
        if abs(error) <= tolerance_db:
            return s1p, apply_gain(s2p, gain)
        gain -= error
    raise ConvergenceError(
        f"relative level did not converge (last error {error:+.3f} dB)"
    )
