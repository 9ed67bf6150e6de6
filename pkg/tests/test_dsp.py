import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emophone.dsp import (
    AudioFormatError,
    FeatureMatrix,
    LogMelConfig,
    fft_power,
    frame_count,
    hz_to_mel,
    log_mel,
    mel_filterbank,
    mel_to_hz,
    read_fmx,
    read_wav,
    write_fmx,
    write_wav,
)


def dft_power(x, n):
    """Direct O(n^2) DFT, the independent oracle."""
    xp = np.zeros(n)
    xp[: len(x)] = x
    k = np.arange(n // 2 + 1)[:, None]
    t = np.arange(n)[None, :]
    spectrum = (xp[None, :] * np.exp(-2j * np.pi * k * t / n)).sum(axis=1)
    return np.abs(spectrum) ** 2


@pytest.mark.parametrize("n", [8, 16, 32, 64, 128, 256, 512, 1024])
def test_fft_power_matches_direct_dft(n):
    rng = np.random.default_rng(n)
    for _ in range(3):
        x = rng.standard_normal(n)
        ref = dft_power(x, n)
        ours = fft_power(x, n)
        assert np.max(np.abs(ours - ref)) <= 1e-6 * np.max(ref)


@given(st.integers(3, 10), st.integers(0, 2 ** 32 - 1))
@settings(max_examples=30, deadline=None)
def test_parseval(log_n, seed):
    n = 2 ** log_n
    x = np.random.default_rng(seed).standard_normal(n)
    p = fft_power(x, n)
    # one-sided spectrum: DC and Nyquist once, the rest twice
    energy = (p[0] + p[-1] + 2 * p[1:-1].sum()) / n
    assert energy == pytest.approx(np.sum(x ** 2), rel=1e-9)


def test_fft_power_zero_pads_short_frames():
    x = np.arange(5.0)
    assert np.allclose(fft_power(x, 16), dft_power(x, 16))


def test_fft_power_rejects_non_power_of_two():
    with pytest.raises(ValueError, match="power of two"):
        fft_power(np.ones(12), 12)


def test_fft_power_of_impulse_is_flat():
    x = np.zeros(64)
    x[0] = 1.0
    assert np.allclose(fft_power(x, 64), 1.0)


def test_mel_scale_round_trip():
    f = np.linspace(0, 8000, 50)
    assert np.allclose(mel_to_hz(hz_to_mel(f)), f)
    assert hz_to_mel(1000.0) == pytest.approx(1000.0, abs=0.5)


def test_filterbank_shape_and_peaks():
    fb = mel_filterbank(512, 40, 16000)
    assert fb.shape == (40, 257)
    assert np.allclose(fb.max(axis=1), 1.0)
    assert np.all(fb >= 0)
    # consecutive filters overlap only with their neighbours
    peaks = fb.argmax(axis=1)
    assert np.all(np.diff(peaks) > 0)


def test_filterbank_rejects_empty_filters():
    with pytest.raises(ValueError, match="no support"):
        mel_filterbank(64, 80, 16000)


def test_one_second_gives_98_frames():
    sr = 16000
    wav = (0.1 * np.sin(2 * np.pi * 440 * np.arange(sr) / sr) * 32767).astype(np.int16)
    fm = log_mel(wav)
    assert fm.frames.shape == (98, 40)
    assert frame_count(sr) == 98
    assert fm.frames.dtype == np.float32
    assert fm.frame_hop_ms == 10.0


@given(st.integers(400, 4000))
@settings(max_examples=20, deadline=None)
def test_frame_count_formula(n):
    wav = np.random.default_rng(n).integers(-3000, 3000, size=n).astype(np.int16)
    assert log_mel(wav).n_frames == 1 + (n - 400) // 160


def test_log_mel_is_column_normalized():
    rng = np.random.default_rng(0)
    wav = (rng.standard_normal(8000) * 3000).astype(np.int16)
    f = log_mel(wav).frames.astype(np.float64)
    assert np.allclose(f.mean(axis=0), 0.0, atol=1e-5)
    assert np.allclose(f.std(axis=0), 1.0, atol=1e-4)


def test_log_mel_silence_is_finite():
    fm = log_mel(np.zeros(1600, dtype=np.int16))
    assert np.all(np.isfinite(fm.frames))
    assert np.all(fm.frames == 0.0)


def test_log_mel_unnormalized_tone_peaks_at_its_band():
    sr = 16000
    wav = np.sin(2 * np.pi * 1000 * np.arange(sr) / sr) * 0.5
    f = log_mel(wav, LogMelConfig(normalize=False)).frames
    fb = mel_filterbank(512, 40, sr)
    expected = int(np.argmax(fb[:, round(1000 * 512 / sr)]))
    assert abs(int(np.median(f.argmax(axis=1))) - expected) <= 1


def test_log_mel_too_short():
    with pytest.raises(AudioFormatError, match="too short"):
        log_mel(np.zeros(399, dtype=np.int16))


def test_wav_round_trip_and_format_checks(tmp_path):
    x = np.arange(-100, 100, dtype=np.int16)
    write_wav(tmp_path / "a.wav", x)
    assert np.array_equal(read_wav(tmp_path / "a.wav"), x)
    write_wav(tmp_path / "b.wav", x, sample_rate=8000)
    with pytest.raises(AudioFormatError, match="16000 Hz"):
        read_wav(tmp_path / "b.wav")
    (tmp_path / "c.wav").write_bytes(b"not a wav")
    with pytest.raises(AudioFormatError, match="unreadable"):
        read_wav(tmp_path / "c.wav")


@given(st.integers(1, 30), st.integers(1, 50), st.floats(1.0, 20.0))
@settings(max_examples=25, deadline=None)
def test_fmx_round_trip(tmp_path_factory, t, m, hop):
    path = tmp_path_factory.mktemp("fmx") / "x.fmx"
    frames = np.random.default_rng(t * m).standard_normal((t, m)).astype(np.float32)
    write_fmx(path, FeatureMatrix(frames, hop))
    back = read_fmx(path)
    assert np.array_equal(back.frames, frames)
    assert back.frame_hop_ms == pytest.approx(hop, rel=1e-6)
    # header + raw little-endian float32 payload
    assert path.stat().st_size == 20 + 4 * t * m


def test_fmx_rejects_bad_files(tmp_path):
    write_fmx(tmp_path / "x.fmx", FeatureMatrix(np.zeros((3, 4)), 10.0))
    data = (tmp_path / "x.fmx").read_bytes()
    (tmp_path / "magic.fmx").write_bytes(b"XXXX" + data[4:])
    (tmp_path / "short.fmx").write_bytes(data[:-4])
    with pytest.raises(ValueError, match="magic"):
        read_fmx(tmp_path / "magic.fmx")
    with pytest.raises(ValueError, match="expected 3x4"):
        read_fmx(tmp_path / "short.fmx")
