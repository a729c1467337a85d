"""Buffers, WAV I/O, gain, and padding."""

import math

import numpy as np
import pytest

from sepmix.audio import (
    AudioBuffer,
    GainDb,
    apply_gain,
    downmix_mono,
    mix_buffers,
    pad_or_truncate,
)
from sepmix.errors import AudioFormatError
from sepmix.wavfile import read_wav, write_wav


def test_buffer_shapes_and_validation():
    b = AudioBuffer(np.zeros(100), 8000)
    assert b.channels == 1 and b.num_samples == 100
    assert b.duration_s == pytest.approx(100 / 8000)
    st = AudioBuffer(np.zeros((2, 50)), 16000)
    assert st.channels == 2
    with pytest.raises(ValueError):
        AudioBuffer(np.array([1.0, np.nan]), 8000)
    with pytest.raises(ValueError):
        AudioBuffer(np.zeros(10), 0)


def test_buffer_immutable():
    b = AudioBuffer(np.ones(10), 8000)
    with pytest.raises(ValueError):
        b.samples[0] = 2.0


def test_wav_float32_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    x = rng.standard_normal(1000).astype(np.float32).astype(np.float64)
    write_wav(AudioBuffer(x, 16000), tmp_path / "a.wav", encoding="float32")
    back = read_wav(tmp_path / "a.wav")
    assert back.sample_rate_hz == 16000
    assert np.array_equal(back.mono_samples, x)


def test_wav_zero_signal(tmp_path):
    write_wav(AudioBuffer(np.zeros(16000), 16000), tmp_path / "z.wav", "pcm16")
    back = read_wav(tmp_path / "z.wav")
    assert back.num_samples == 16000
    assert not back.mono_samples.any()


def test_pcm16_full_scale_convention(tmp_path):
    # -32768 -> -1.0, +32767 -> +32767/32768
    raw = np.array([-32768, 32767, 0, 16384], dtype=np.int16)
    write_wav(AudioBuffer(raw / 32768.0, 8000), tmp_path / "q.wav", "pcm16")
    back = read_wav(tmp_path / "q.wav")
    assert np.array_equal(back.mono_samples, raw / 32768.0)
    assert back.mono_samples[0] == -1.0
    assert back.mono_samples[1] == 32767 / 32768


def test_pcm16_clipping_counted(tmp_path):
    clipped = write_wav(
        AudioBuffer(np.array([1.5, 0.0, -0.2]), 8000), tmp_path / "c.wav", "pcm16"
    )
    assert clipped == 1
    back = read_wav(tmp_path / "c.wav")
    assert back.mono_samples[0] == 32767 / 32768  # saturated, not wrapped


def test_pcm16_rounds_half_away_from_zero(tmp_path):
    x = np.array([0.5 / 32768, -0.5 / 32768, 1.49 / 32768])
    write_wav(AudioBuffer(x, 8000), tmp_path / "r.wav", "pcm16")
    back = read_wav(tmp_path / "r.wav")
    assert np.array_equal(back.mono_samples * 32768, [1.0, -1.0, 1.0])


def test_wav_empty_buffer(tmp_path):
    write_wav(AudioBuffer(np.zeros(0), 8000), tmp_path / "e.wav", "float32")
    back = read_wav(tmp_path / "e.wav")
    assert back.num_samples == 0


def test_wav_stereo_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    x = rng.standard_normal((2, 300)).astype(np.float32).astype(np.float64)
    write_wav(AudioBuffer(x, 48000), tmp_path / "s.wav", "float32")
    back = read_wav(tmp_path / "s.wav")
    assert back.channels == 2
    assert np.array_equal(back.samples, x)


def test_wav_errors(tmp_path):
    with pytest.raises(AudioFormatError):
        read_wav(tmp_path / "missing.wav")
    bad = tmp_path / "bad.wav"
    bad.write_bytes(b"RIFF\x00\x00\x00\x00WAV")  # truncated header
    with pytest.raises(AudioFormatError):
        read_wav(bad)
    notwav = tmp_path / "n.wav"
    notwav.write_bytes(b"\x00" * 64)
    with pytest.raises(AudioFormatError):
        read_wav(notwav)


def test_apply_gain():
    b = AudioBuffer(np.array([1.0, -0.5]), 8000)
    assert np.array_equal(apply_gain(b, 0.0).samples, b.samples)
    half = apply_gain(b, 20 * math.log10(0.5))
    assert half.mono_samples[0] == pytest.approx(0.5, abs=1e-12)
    fwd_back = apply_gain(apply_gain(b, 3.0), -3.0)
    assert np.allclose(fwd_back.samples, b.samples, rtol=1e-12)


def test_gain_composition():
    rng = np.random.default_rng(2)
    b = AudioBuffer(rng.standard_normal(50), 8000)
    two_step = apply_gain(apply_gain(b, 4.5), -1.25)
    one_step = apply_gain(b, 3.25)
    assert np.allclose(two_step.samples, one_step.samples, rtol=1e-12)
    with pytest.raises(ValueError):
        GainDb(float("inf"))


def test_pad_or_truncate():
    b = AudioBuffer(np.arange(100, dtype=float), 8000)
    assert pad_or_truncate(b, 100, "pad_end_silence") is b
    padded = pad_or_truncate(b, 150, "pad_end_silence")
    assert padded.num_samples == 150
    assert not padded.mono_samples[100:].any()
    trunc = pad_or_truncate(AudioBuffer(np.arange(150, dtype=float), 8000), 100, "truncate_end")
    assert np.array_equal(trunc.mono_samples, np.arange(100, dtype=float))
    with pytest.raises(ValueError):
        pad_or_truncate(b, 50, "pad_end_silence")
    with pytest.raises(ValueError):
        pad_or_truncate(b, 200, "truncate_end")
    with pytest.raises(ValueError):
        pad_or_truncate(b, -1, "truncate_end")


def test_mix_and_downmix():
    a = AudioBuffer(np.array([1.0, 2.0]), 8000)
    b = AudioBuffer(np.array([0.25, -1.0]), 8000)
    assert np.array_equal(mix_buffers(a, b).mono_samples, [1.25, 1.0])
    st = AudioBuffer(np.array([[1.0, 0.0], [0.0, 1.0]]), 8000)
    assert np.array_equal(downmix_mono(st).mono_samples, [0.5, 0.5])
