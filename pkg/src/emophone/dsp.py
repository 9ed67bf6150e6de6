"""Log-mel feature extraction and the ``.fmx`` feature-file format."""
from __future__ import annotations

import struct
import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels

SAMPLE_RATE = 16000
FRAME_LEN = 400  # 25 ms
FRAME_HOP = 160  # 10 ms
N_FFT = 512
N_MELS = 40
PREEMPHASIS = 0.97
LOG_FLOOR = 1e-10

FMX_MAGIC = b"APFM"
FMX_VERSION = 1
_FMX_HEADER = struct.Struct("<4sIIIf")


class AudioFormatError(ValueError):
    pass


@dataclass
class FeatureMatrix:
    frames: np.ndarray
    frame_hop_ms: float = 10.0

    def __post_init__(self):
        self.frames = np.ascontiguousarray(self.frames, dtype=np.float32)
        if self.frames.ndim != 2:
            raise ValueError("feature matrix must be 2-D (frames x bins)")

    @property
    def n_frames(self):
        return self.frames.shape[0]


@dataclass(frozen=True)
class LogMelConfig:
    sample_rate: int = SAMPLE_RATE
    frame_len: int = FRAME_LEN
    frame_hop: int = FRAME_HOP
    n_fft: int = N_FFT
    n_mels: int = N_MELS
    preemphasis: float = PREEMPHASIS
    log_floor: float = LOG_FLOOR
    normalize: bool = field(default=True)

    @property
    def frame_hop_ms(self):
        return 1000.0 * self.frame_hop / self.sample_rate


def _is_pow2(n):
    return n > 0 and n & (n - 1) == 0


def fft_power(frame, n_fft):
    """``|DFT_k|**2`` for k in ``0..n_fft/2`` of one frame, zero-padded to ``n_fft``."""
    frame = np.asarray(frame, dtype=np.float64)
    if not _is_pow2(int(n_fft)):
        raise ValueError(f"n_fft must be a power of two, got {n_fft}")
    if frame.ndim != 1 or frame.shape[0] > n_fft:
        raise ValueError("frame must be 1-D and no longer than n_fft")
    return _kernels.fft_power_frames(frame[None, :], int(n_fft))[0]


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_fft, n_mels, sr_hz):
    """Triangular mel filters, ``(n_mels, n_fft//2 + 1)``.

    Filter edges are snapped to FFT bins, so each filter peaks at exactly 1
    on its centre bin. Raises if two edges collapse onto the same bin.
    """
    if n_mels < 2:
        raise ValueError("n_mels must be >= 2")
    n_bins = n_fft // 2 + 1
    mel_pts = np.linspace(0.0, hz_to_mel(sr_hz / 2.0), n_mels + 2)
    bins = np.floor((n_fft + 1) * mel_to_hz(mel_pts) / sr_hz).astype(int)
    bins = np.minimum(bins, n_bins - 1)
    if np.any(np.diff(bins) <= 0):
        raise ValueError(
            f"n_mels={n_mels} too large for n_fft={n_fft}: some filters have no support"
        )
    fb = np.zeros((n_mels, n_bins))
    k = np.arange(n_bins)
    for m in range(n_mels):
        lo, mid, hi = bins[m], bins[m + 1], bins[m + 2]
        rising = (k >= lo) & (k <= mid)
        falling = (k > mid) & (k <= hi)
        fb[m, rising] = (k[rising] - lo) / (mid - lo)
        fb[m, falling] = (hi - k[falling]) / (hi - mid)
    return fb


def frame_count(n_samples, frame_len=FRAME_LEN, hop=FRAME_HOP):
    return 1 + (n_samples - frame_len) // hop


def normalize_columns(x):
    """Per-column zero mean / unit variance; constant columns become 0."""
    x = np.asarray(x, dtype=np.float64)
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    out = np.zeros_like(x)
    live = std > 1e-8 * np.maximum(1.0, np.abs(mean))
    out[:, live] = (x[:, live] - mean[live]) / std[live]
    return out


def log_mel(wav, config=None):
    """Featurize 16 kHz mono PCM samples into a normalized log-mel matrix."""
    config = config or LogMelConfig()
    x = np.asarray(wav)
    if x.ndim != 1:
        raise AudioFormatError("expected mono samples")
    if np.issubdtype(x.dtype, np.integer):
        x = x.astype(np.float64) / 32768.0
    else:
        x = x.astype(np.float64)
    if x.shape[0] < config.frame_len:
        raise AudioFormatError(
            f"audio too short: {x.shape[0]} samples < one {config.frame_len}-sample window"
        )
    emph = np.empty_like(x)
    emph[0] = x[0]
    emph[1:] = x[1:] - config.preemphasis * x[:-1]
    t = frame_count(x.shape[0], config.frame_len, config.frame_hop)
    idx = np.arange(config.frame_len)[None, :] + config.frame_hop * np.arange(t)[:, None]
    window = np.hanning(config.frame_len + 1)[:-1]
    frames = emph[idx] * window
    power = _kernels.fft_power_frames(frames, config.n_fft)
    fb = mel_filterbank(config.n_fft, config.n_mels, config.sample_rate)
    mel = np.log(np.maximum(power @ fb.T, config.log_floor))
    if config.normalize:
        mel = normalize_columns(mel)
    return FeatureMatrix(mel.astype(np.float32), config.frame_hop_ms)


def read_wav(path):
    """Read a RIFF WAV; only 16-bit mono 16 kHz PCM is accepted."""
    try:
        with wave.open(str(path), "rb") as wf:
            if wf.getnchannels() != 1:
                raise AudioFormatError(f"{path}: expected mono, got {wf.getnchannels()} channels")
            if wf.getsampwidth() != 2:
                raise AudioFormatError(f"{path}: expected 16-bit PCM, got {8 * wf.getsampwidth()}-bit")
            if wf.getframerate() != SAMPLE_RATE:
                raise AudioFormatError(
                    f"{path}: expected {SAMPLE_RATE} Hz, got {wf.getframerate()} Hz"
                )
            raw = wf.readframes(wf.getnframes())
    except (wave.Error, EOFError) as exc:
        raise AudioFormatError(f"{path}: unreadable WAV: {exc}") from None
    return np.frombuffer(raw, dtype="<i2").copy()


def write_wav(path, samples, sample_rate=SAMPLE_RATE):
    samples = np.asarray(samples, dtype="<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(sample_rate)
        wf.writeframes(samples.tobytes())


def write_fmx(path, fm):
    t, m = fm.frames.shape
    with open(path, "wb") as fh:
        fh.write(_FMX_HEADER.pack(FMX_MAGIC, FMX_VERSION, t, m, fm.frame_hop_ms))
        fh.write(fm.frames.astype("<f4").tobytes(order="C"))


def read_fmx(path):
    data = Path(path).read_bytes()
    if len(data) < _FMX_HEADER.size:
        raise ValueError(f"{path}: truncated feature file")
    magic, version, t, m, hop = _FMX_HEADER.unpack_from(data)
    if magic != FMX_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != FMX_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    body = data[_FMX_HEADER.size:]
    if len(body) != 4 * t * m:
        raise ValueError(f"{path}: expected {t}x{m} floats, found {len(body) // 4}")
    frames = np.frombuffer(body, dtype="<f4").reshape(t, m).astype(np.float32)
    return FeatureMatrix(frames, float(hop))
