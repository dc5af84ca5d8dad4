import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adiff.audio import (
    AudioClip,
    MelConfig,
    UnsupportedWavError,
    WavFormatError,
    frame_count,
    load_wav,
    mel_filterbank,
    mel_spectrogram,
    resample,
    save_wav,
    truncate_random,
)


def _tone(freq, seconds, sr, amp=0.5):
    t = np.arange(int(seconds * sr)) / sr
    return AudioClip((amp * np.sin(2 * np.pi * freq * t)).astype(np.float32), sr)


# -- WAV io


def test_wav_roundtrip_mono(tmp_path):
    clip = _tone(440, 0.25, 32000)
    path = tmp_path / "tone.wav"
    save_wav(clip, path)
    loaded = load_wav(path)
    assert loaded.sample_rate == 32000
    assert loaded.samples.size == clip.samples.size
    assert np.allclose(loaded.samples, clip.samples, atol=1e-3)


def test_wav_all_zero_payload(tmp_path):
    clip = AudioClip(np.zeros(1000, np.float32), 32000)
    path = tmp_path / "zero.wav"
    save_wav(clip, path)
    assert np.all(load_wav(path).samples == 0.0)


def _write_stereo(path, left, right, sr):
    import struct

    pcm = np.empty(left.size * 2, dtype="<i2")
    pcm[0::2] = left
    pcm[1::2] = right
    data = pcm.tobytes()
    with open(path, "wb") as f:
        f.write(b"RIFF" + struct.pack("<I", 36 + len(data)) + b"WAVE")
        f.write(b"fmt " + struct.pack("<IHHIIHH", 16, 1, 2, sr, sr * 4, 4, 16))
        f.write(b"data" + struct.pack("<I", len(data)) + data)


def test_stereo_opposite_channels_average_to_silence(tmp_path):
    path = tmp_path / "stereo.wav"
    n = 500
    _write_stereo(path, np.full(n, 16384, "<i2"), np.full(n, -16384, "<i2"), 32000)
    clip = load_wav(path)
    assert clip.samples.size == n
    assert np.abs(clip.samples).max() == 0.0


def test_malformed_riff_header(tmp_path):
    path = tmp_path / "bad.wav"
    path.write_bytes(b"RIFX" + b"\x00" * 64)
    with pytest.raises(WavFormatError):
        load_wav(path)


def test_unsupported_bit_depth(tmp_path):
    import struct

    path = tmp_path / "bits8.wav"
    data = b"\x80" * 100
    with open(path, "wb") as f:
        f.write(b"RIFF" + struct.pack("<I", 36 + len(data)) + b"WAVE")
        f.write(b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, 8000, 8000, 1, 8))
        f.write(b"data" + struct.pack("<I", len(data)) + data)
    with pytest.raises(UnsupportedWavError, match="16-bit"):
        load_wav(path)


def test_load_resamples_on_request(tmp_path):
    clip = _tone(440, 0.5, 16000)
    path = tmp_path / "lo.wav"
    save_wav(clip, path)
    loaded = load_wav(path, rate=32000)
    assert loaded.sample_rate == 32000
    assert abs(loaded.samples.size - 16000) <= 2


def test_resample_preserves_duration():
    clip = _tone(440, 1.0, 16000)
    up = resample(clip, 48000)
    assert abs(up.duration - 1.0) < 1e-3


# -- random truncation


def test_truncate_identity_when_exact(rng):
    clip = _tone(100, 1.0, 8000)
    out = truncate_random(clip, 1.0, rng)
    assert np.array_equal(out.samples, clip.samples)


def test_truncate_pads_short_clips(rng):
    clip = AudioClip(np.ones(4 * 8000, np.float32), 8000)
    out = truncate_random(clip, 10.0, rng)
    assert out.samples.size == 80000
    assert np.all(out.samples[: 4 * 8000] == 1.0)
    assert np.all(out.samples[4 * 8000 :] == 0.0)


def test_truncate_window_is_uniform():
    # ramp signal: window start is recoverable from the first sample
    sr = 1000
    n, target = 3000, 1000
    clip = AudioClip((np.arange(n) / n).astype(np.float32) * 2 - 1, sr)
    rng = np.random.default_rng(7)
    draws = 10_000
    starts = np.empty(draws, int)
    for i in range(draws):
        out = truncate_random(clip, target / sr, rng)
        starts[i] = int(round((out.samples[0] + 1) / 2 * n))
    feasible = n - target + 1
    assert starts.min() >= 0 and starts.max() <= feasible - 1
    counts, _ = np.histogram(starts, bins=20, range=(0, feasible))
    expected = draws / 20
    sigma = np.sqrt(draws * (1 / 20) * (19 / 20))
    assert np.all(np.abs(counts - expected) < 5 * sigma)


def test_truncate_is_seed_reproducible():
    clip = _tone(330, 3.0, 8000)
    a = truncate_random(clip, 1.0, np.random.default_rng(42)).samples
    b = truncate_random(clip, 1.0, np.random.default_rng(42)).samples
    assert np.array_equal(a, b)


# -- mel features


def test_frame_count_formula_reference_case():
    assert frame_count(320000, 1024, 320) == 997


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4000), st.integers(2, 600), st.integers(1, 400))
def test_frame_count_formula_property(extra, win, hop):
    n = win + extra
    frames = frame_count(n, win, hop)
    assert frames == (n - win) // hop + 1
    assert win + (frames - 1) * hop <= n < win + frames * hop


def test_short_clip_rejected():
    clip = AudioClip(np.zeros(512, np.float32), 32000)
    with pytest.raises(ValueError, match="at least"):
        mel_spectrogram(clip, MelConfig())


def test_silence_gives_log_floor():
    clip = AudioClip(np.zeros(32000, np.float32), 32000)
    spec = mel_spectrogram(clip, MelConfig())
    assert np.allclose(spec.values, np.log(1e-10))


def test_reference_config_shape():
    clip = AudioClip(np.zeros(320000, np.float32) + 1e-4, 32000)
    spec = mel_spectrogram(clip, MelConfig())
    assert spec.values.shape == (997, 64)


def test_filterbank_rows_nonnegative_and_overlap_limited():
    cfg = MelConfig()
    fb = mel_filterbank(cfg)
    assert fb.min() >= 0.0
    contributions = (fb > 0).sum(axis=0)
    assert contributions.max() <= 2
    # bands that own at least one bin appear as contiguous triangles
    assert fb.shape == (64, 513)


def test_sine_peaks_in_the_right_mel_band():
    cfg = MelConfig()
    clip = _tone(1000, 1.0, 32000)
    spec = mel_spectrogram(clip, cfg)
    band = int(spec.values.mean(axis=0).argmax())
    # oracle: locate the DFT peak independently, then ask the filterbank
    frame = clip.samples[: cfg.win] * np.hanning(cfg.win)
    peak_bin = int(np.abs(np.fft.rfft(frame)).argmax())
    expected = int(mel_filterbank(cfg)[:, peak_bin].argmax())
    assert band == expected
