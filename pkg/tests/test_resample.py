"""Kaiser windowed-sinc resampler against an ideal-sinc oracle.

For pure tones, the ideal band-limited resampler output is the same tone
sampled on the target grid, so sinusoids evaluated directly at target
times serve as the reference (away from filter edges).
"""

import numpy as np
import pytest

from sepmix.audio import AudioBuffer
from sepmix.errors import SepmixError
from sepmix.resample import output_length, resample


def _tone(freq, fs, dur=1.0, amp=0.5):
    t = np.arange(int(dur * fs)) / fs
    return amp * np.sin(2 * np.pi * freq * t)


def _trimmed(x, n=400):
    return x[n:-n]


def test_identity():
    b = AudioBuffer(_tone(1000, 16000), 16000)
    assert resample(b, 16000) is b


def test_output_length():
    assert output_length(48000, 48000, 16000) == 16000
    assert output_length(16000, 16000, 8000) == 8000
    assert output_length(1001, 48000, 16000) == round(1001 / 3) == 334
    assert output_length(0, 48000, 8000) == 0


@pytest.mark.parametrize("src,dst", [(48000, 16000), (48000, 8000), (16000, 8000), (8000, 16000)])
def test_tone_amplitude_preserved(src, dst):
    # ideal-sinc oracle: the same 1 kHz tone on the target grid
    freq = 1000.0
    out = resample(AudioBuffer(_tone(freq, src), src), dst)
    t = np.arange(out.num_samples) / dst
    reference = 0.5 * np.sin(2 * np.pi * freq * t)
    got = _trimmed(out.mono_samples)
    want = _trimmed(reference)
    rms_db = 20 * np.log10(np.sqrt((got**2).mean() / (want**2).mean()))
    assert abs(rms_db) < 0.1
    assert np.abs(got - want).max() < 2e-3  # ripple + stopband leakage


def test_passband_ripple_below_0p1_db():
    src, dst = 48000, 16000
    for freq in (200.0, 1000.0, 2500.0, 3100.0, 6300.0):  # below 0.4*dst
        if freq >= 0.4 * dst:
            continue
        out = resample(AudioBuffer(_tone(freq, src), src), dst)
        t = np.arange(out.num_samples) / dst
        want = _trimmed(0.5 * np.sin(2 * np.pi * freq * t))
        got = _trimmed(out.mono_samples)
        rms_db = 20 * np.log10(np.sqrt((got**2).mean() / (want**2).mean()))
        assert abs(rms_db) < 0.1, freq


def test_stopband_attenuation():
    # 5 kHz lies above the 4 kHz Nyquist of the 8 kHz target. Short fades
    # keep the tone's spectrum at 5 kHz (an abrupt onset is wideband and
    # would legitimately leak into the passband under any resampler).
    x = _tone(5000, 48000)
    ramp = int(0.05 * 48000)
    fade = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
    x[:ramp] *= fade
    x[-ramp:] *= fade[::-1]
    out = resample(AudioBuffer(x, 48000), 8000)
    in_rms = np.sqrt((x**2).mean())
    out_rms = np.sqrt((out.mono_samples**2).mean())
    assert 20 * np.log10(out_rms / in_rms) < -80.0


def test_linearity():
    rng = np.random.default_rng(3)
    x = rng.standard_normal(48000)
    y = rng.standard_normal(48000)
    a, b = 0.7, -1.3
    lhs = resample(AudioBuffer(a * x + b * y, 48000), 16000).mono_samples
    rhs = a * resample(AudioBuffer(x, 48000), 16000).mono_samples \
        + b * resample(AudioBuffer(y, 48000), 16000).mono_samples
    scale = np.abs(rhs).max()
    assert np.abs(lhs - rhs).max() / scale < 1e-9


def test_stereo_and_errors():
    st = AudioBuffer(np.vstack([_tone(500, 48000, 0.2), _tone(800, 48000, 0.2)]), 48000)
    out = resample(st, 16000)
    assert out.channels == 2
    assert out.num_samples == output_length(st.num_samples, 48000, 16000)
    with pytest.raises(SepmixError):
        resample(st, 0)
    with pytest.raises(SepmixError):
        resample(st, -8000)
