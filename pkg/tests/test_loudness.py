"""Loudness meter against published compliance-tone behavior, plus the
SNR helpers built on it."""

import numpy as np
import pytest

from sepmix.audio import AudioBuffer, apply_gain
from sepmix.errors import SepmixError, SilentSignalError
from sepmix.loudness import (
    gain_for_target_snr,
    k_weighting_sos,
    measure_lufs,
    snr_lufs,
)
from sepmix.synth import ambient_noise


def tone(level_dbfs, freq=997.0, dur=20.0, fs=48000, stereo=True):
    t = np.arange(int(dur * fs)) / fs
    x = 10 ** (level_dbfs / 20.0) * np.sin(2 * np.pi * freq * t)
    return AudioBuffer(np.vstack([x, x]) if stereo else x, fs)


def test_k_weighting_matches_tabulated_48k():
    sos = k_weighting_sos(48000)
    shelf_b = [1.53512485958697, -2.69169618940638, 1.19839281085285]
    shelf_a = [1.0, -1.69065929318241, 0.73248077421585]
    hp_a = [1.0, -1.99004745483398, 0.99007225036621]
    assert np.abs(sos[0, :3] - shelf_b).max() < 1e-6
    assert np.abs(sos[0, 3:] - shelf_a).max() < 1e-6
    assert np.array_equal(sos[1, :3], [1.0, -2.0, 1.0])
    assert np.abs(sos[1, 3:] - hp_a).max() < 1e-6


# published stereo-tone compliance cases: (level, expected)
@pytest.mark.parametrize("level", [-23.0, -33.0])
def test_compliance_tone(level):
    m = measure_lufs(tone(level))
    assert m.value == pytest.approx(level, abs=0.1)


@pytest.mark.parametrize("fs", [8000, 16000, 48000])
def test_compliance_tone_other_rates(fs):
    m = measure_lufs(tone(-23.0, fs=fs))
    assert m.value == pytest.approx(-23.0, abs=0.1)


def test_relative_gate_drops_quiet_segments():
    # 10 s at -36, 60 s at -23, 10 s at -36 -> integrated -23.0
    parts = [tone(-36, dur=10).samples, tone(-23, dur=60).samples, tone(-36, dur=10).samples]
    m = measure_lufs(AudioBuffer(np.concatenate(parts, axis=1), 48000))
    assert m.value == pytest.approx(-23.0, abs=0.1)


def test_absolute_gate_drops_silence():
    parts = [np.zeros((2, 48000 * 10)), tone(-23, dur=10).samples]
    m = measure_lufs(AudioBuffer(np.concatenate(parts, axis=1), 48000))
    assert m.value == pytest.approx(-23.0, abs=0.1)


def test_silence_sentinel():
    m = measure_lufs(AudioBuffer(np.zeros((2, 48000 * 2)), 48000))
    assert m.is_silent
    assert m.value == float("-inf")
    assert m.gated_block_count == 0


def test_too_short_raises():
    with pytest.raises(SepmixError):
        measure_lufs(AudioBuffer(np.ones(1000), 8000))  # < 400 ms


def test_gain_equivariance():
    base = tone(-23.0, fs=16000, dur=6.0, stereo=False)
    ref = measure_lufs(base).value
    for g in (-20, -10, -3, 3, 10, 20):
        got = measure_lufs(apply_gain(base, g)).value
        assert got - ref == pytest.approx(g, abs=0.05)


def test_snr_identities():
    x = tone(-20.0, fs=16000, dur=4.0, stereo=False)
    assert snr_lufs(x, x).value == 0.0
    assert snr_lufs(apply_gain(x, 3.0), x).value == pytest.approx(3.0, abs=0.05)
    # common gain cancels
    n = ambient_noise(4.0, 16000, seed=5, level_dbfs=-30.0)
    base = snr_lufs(x, n).value
    shifted = snr_lufs(apply_gain(x, 7.0), apply_gain(n, 7.0)).value
    assert shifted == pytest.approx(base, abs=0.05)


def test_sine_vs_matched_noise():
    # pink-ish noise scaled to the tone's loudness measures 0 dB SNR
    x = tone(-20.0, fs=16000, dur=8.0, stereo=False)
    n = ambient_noise(8.0, 16000, seed=9, level_dbfs=-28.0)
    n_matched = apply_gain(n, measure_lufs(x).value - measure_lufs(n).value)
    assert snr_lufs(x, n_matched).value == pytest.approx(0.0, abs=0.1)


def test_snr_silent_operand_raises():
    x = tone(-20.0, fs=16000, dur=2.0, stereo=False)
    silent = AudioBuffer(np.zeros(16000 * 2), 16000)
    with pytest.raises(SilentSignalError):
        snr_lufs(x, silent)
    with pytest.raises(SilentSignalError):
        snr_lufs(silent, x)


def test_gain_for_target_snr():
    rng = np.random.default_rng(4)
    speech = AudioBuffer(0.2 * rng.standard_normal(16000 * 3), 16000)
    noise = ambient_noise(3.0, 16000, seed=11, level_dbfs=-26.0)
    current = snr_lufs(speech, noise).value
    assert gain_for_target_snr(speech, noise, current).value == pytest.approx(0.0, abs=0.05)
    assert gain_for_target_snr(speech, noise, current + 4).value == pytest.approx(4.0, abs=0.05)
    g = gain_for_target_snr(speech, noise, -6.0)
    achieved = snr_lufs(apply_gain(speech, g.value), noise).value
    assert achieved == pytest.approx(-6.0, abs=0.05)
