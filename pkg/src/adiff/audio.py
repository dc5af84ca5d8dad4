"""Audio ingestion and mel-spectrogram features.

WAV support covers RIFF/PCM16, mono or stereo, any rate; multi-channel
input is averaged to mono and optionally resampled by linear interpolation.
Features are log mel energies from a Hann-windowed DFT with an HTK-style
triangular filterbank.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "AudioClip",
    "MelConfig",
    "MelSpec",
    "WavFormatError",
    "UnsupportedWavError",
    "load_wav",
    "save_wav",
    "resample",
    "truncate_random",
    "mel_spectrogram",
    "mel_filterbank",
    "hz_to_mel",
    "mel_to_hz",
    "frame_count",
]


class WavFormatError(ValueError):
    """Malformed RIFF container or missing chunks."""


class UnsupportedWavError(WavFormatError):
    """Well-formed WAV using an encoding this loader does not handle."""


@dataclass
class AudioClip:
    """Mono audio in [-1, 1] at a known sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float32)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ValueError("AudioClip needs a non-empty 1-d sample array")
        if self.sample_rate <= 0:
            raise ValueError("sample rate must be positive")
        np.clip(self.samples, -1.0, 1.0, out=self.samples)

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


def load_wav(path, rate: int | None = None) -> AudioClip:
    """Decode a PCM16 WAV file; average channels to mono, scale by 1/32768.

    With ``rate`` set, the clip is resampled to that rate by linear
    interpolation after decoding.
    """
    blob = open(path, "rb").read()
    if len(blob) < 12 or blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise WavFormatError(f"{path}: not a RIFF/WAVE file")
    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(blob):
        chunk_id = blob[pos : pos + 4]
        (size,) = struct.unpack("<I", blob[pos + 4 : pos + 8])
        body = blob[pos + 8 : pos + 8 + size]
        if len(body) < size:
            raise WavFormatError(f"{path}: truncated {chunk_id!r} chunk")
        if chunk_id == b"fmt ":
            if size < 16:
                raise WavFormatError(f"{path}: fmt chunk too short")
            fmt = struct.unpack("<HHIIHH", body[:16])
        elif chunk_id == b"data":
            payload = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned
    if fmt is None or payload is None:
        raise WavFormatError(f"{path}: missing fmt or data chunk")
    audio_format, channels, sample_rate, _, _, bits = fmt
    if audio_format != 1:
        raise UnsupportedWavError(f"{path}: only PCM is supported (format tag {audio_format})")
    if bits != 16:
        raise UnsupportedWavError(f"{path}: only 16-bit samples are supported, got {bits}")
    if channels < 1:
        raise WavFormatError(f"{path}: channel count {channels}")
    raw = np.frombuffer(payload[: len(payload) - len(payload) % (2 * channels)], dtype="<i2")
    if raw.size == 0:
        raise WavFormatError(f"{path}: empty data chunk")
    samples = raw.astype(np.float32) / 32768.0
    if channels > 1:
        samples = samples.reshape(-1, channels).mean(axis=1)
    clip = AudioClip(samples, sample_rate)
    if rate is not None and rate != clip.sample_rate:
        clip = resample(clip, rate)
    return clip


def save_wav(clip: AudioClip, path) -> None:
    """Write a mono PCM16 WAV file."""
    pcm = np.clip(np.round(clip.samples * 32767.0), -32768, 32767).astype("<i2")
    data = pcm.tobytes()
    with open(path, "wb") as f:
        f.write(b"RIFF")
        f.write(struct.pack("<I", 36 + len(data)))
        f.write(b"WAVE")
        f.write(b"fmt ")
        f.write(struct.pack("<IHHIIHH", 16, 1, 1, clip.sample_rate, clip.sample_rate * 2, 2, 16))
        f.write(b"data")
        f.write(struct.pack("<I", len(data)))
        f.write(data)


def resample(clip: AudioClip, rate: int) -> AudioClip:
    """Linear-interpolation resampling."""
    if rate == clip.sample_rate:
        return clip
    n_out = max(1, int(round(clip.samples.size * rate / clip.sample_rate)))
    positions = np.arange(n_out) * (clip.sample_rate / rate)
    samples = np.interp(positions, np.arange(clip.samples.size), clip.samples)
    return AudioClip(samples.astype(np.float32), rate)


def truncate_random(clip: AudioClip, seconds: float, rng: np.random.Generator) -> AudioClip:
    """Cut a uniformly random window of exactly ``seconds`` out of the clip.

    Clips shorter than the target are zero-padded at the end, so the output
    length is always exactly ``round(seconds * rate)`` samples.
    """
    if seconds <= 0:
        raise ValueError("target duration must be positive")
    target = int(round(seconds * clip.sample_rate))
    n = clip.samples.size
    if n > target:
        start = int(rng.integers(0, n - target + 1))
        return AudioClip(clip.samples[start : start + target].copy(), clip.sample_rate)
    if n < target:
        padded = np.zeros(target, dtype=np.float32)
        padded[:n] = clip.samples
        return AudioClip(padded, clip.sample_rate)
    return AudioClip(clip.samples.copy(), clip.sample_rate)


# ---------------------------------------------------------------------------
# mel spectrogram


@dataclass(frozen=True)
class MelConfig:
    sample_rate: int = 32000
    win: int = 1024
    hop: int = 320
    mels: int = 64
    fmin: float = 0.0
    fmax: float | None = None  # defaults to Nyquist

    @property
    def nyquist(self) -> float:
        return self.sample_rate / 2.0

    @property
    def top(self) -> float:
        return self.fmax if self.fmax is not None else self.nyquist


@dataclass
class MelSpec:
    """Log mel energies, frames by bands."""

    values: np.ndarray
    config: MelConfig = field(default_factory=MelConfig)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.ndim != 2 or self.values.shape[1] != self.config.mels:
            raise ValueError(
                f"expected [frames, {self.config.mels}] mel matrix, got {self.values.shape}"
            )

    @property
    def frames(self) -> int:
        return self.values.shape[0]

    @property
    def frame_rate(self) -> float:
        return self.config.sample_rate / self.config.hop


def frame_count(n_samples: int, win: int, hop: int) -> int:
    if n_samples < win:
        raise ValueError(f"need at least {win} samples, got {n_samples}")
    return (n_samples - win) // hop + 1


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(config: MelConfig) -> np.ndarray:
    """Triangular filters on the HTK mel scale, shape [mels, win//2 + 1].

    Rows are non-negative and each DFT bin lands in at most two adjacent
    bands (the triangles of neighbouring filters overlap pairwise).
    """
    n_bins = config.win // 2 + 1
    bin_freqs = np.arange(n_bins) * config.sample_rate / config.win
    points = mel_to_hz(np.linspace(hz_to_mel(config.fmin), hz_to_mel(config.top), config.mels + 2))
    fb = np.zeros((config.mels, n_bins))
    for m in range(config.mels):
        lo, center, hi = points[m], points[m + 1], points[m + 2]
        up = (bin_freqs - lo) / max(center - lo, 1e-12)
        down = (hi - bin_freqs) / max(hi - center, 1e-12)
        fb[m] = np.maximum(0.0, np.minimum(up, down))
    return fb.astype(np.float32)


def _hann(win: int) -> np.ndarray:
    # periodic Hann window
    return (0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(win) / win)).astype(np.float32)


def mel_spectrogram(clip: AudioClip, config: MelConfig | None = None) -> MelSpec:
    """Windowed-DFT magnitudes through the mel filterbank, log compressed.

    Frame count follows floor((len - win) / hop) + 1; clips shorter than one
    window are rejected.
    """
    config = config or MelConfig()
    if clip.sample_rate != config.sample_rate:
        raise ValueError(
            f"clip rate {clip.sample_rate} != feature rate {config.sample_rate}; resample first"
        )
    n = clip.samples.size
    n_frames = frame_count(n, config.win, config.hop)
    frames = np.lib.stride_tricks.sliding_window_view(clip.samples, config.win)[:: config.hop]
    frames = frames[:n_frames] * _hann(config.win)
    magnitude = np.abs(np.fft.rfft(frames, axis=1))
    energy = magnitude @ mel_filterbank(config).T
    return MelSpec(np.log(energy + 1e-10), config)
