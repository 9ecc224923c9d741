"""WAV input and frame-rate-aligned log-mel audio features.

The feature encoder is pluggable: anything callable as
``encoder(samples: float ndarray, sample_rate: int) -> (frames, d_a) ndarray``
can stand in for the default :class:`LogMelEncoder`, e.g. a wrapper around a
pretrained speech model.
"""
from __future__ import annotations

import wave
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import numpy as np
from scipy.signal import resample_poly

SAMPLE_RATE = 16000
FPS = 30


class AudioError(ValueError):
    """Audio input that cannot be used."""


@dataclass(frozen=True)
class AudioClip:
    """Mono PCM16 audio."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        s = np.asarray(self.samples)
        if s.ndim != 1:
            raise AudioError(f"expected mono samples, got shape {s.shape}")
        if s.dtype != np.int16:
            raise AudioError(f"expected int16 PCM, got {s.dtype}")
        object.__setattr__(self, "samples", s)

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def n_frames(self) -> int:
        """Animation frames at 30 fps covering this clip."""
        return int(round(self.duration * FPS))

    def as_float(self) -> np.ndarray:
        return self.samples.astype(np.float64) / 32768.0

    @classmethod
    def from_float(cls, x: np.ndarray, sample_rate: int = SAMPLE_RATE) -> "AudioClip":
        pcm = np.clip(np.round(np.asarray(x, dtype=np.float64) * 32767.0), -32768, 32767)
        return cls(pcm.astype(np.int16), sample_rate)


def read_wav(path, resample: bool = False) -> AudioClip:
    """Read RIFF PCM16 mono. Other rates are resampled to 16 kHz only if ``resample``."""
    try:
        with wave.open(str(path), "rb") as wf:
            channels, width, rate = wf.getnchannels(), wf.getsampwidth(), wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except (wave.Error, EOFError) as exc:
        raise AudioError(f"{path}: not a readable WAV file ({exc})") from None
    if width != 2:
        raise AudioError(f"{path}: expected 16-bit PCM, got {8 * width}-bit")
    if channels != 1:
        raise AudioError(f"{path}: expected mono, got {channels} channels")
    samples = np.frombuffer(raw, dtype="<i2").astype(np.int16)
    if rate != SAMPLE_RATE:
        if not resample:
            raise AudioError(f"{path}: sample rate {rate} Hz unsupported (need {SAMPLE_RATE})")
        y = resample_poly(samples.astype(np.float64) / 32768.0, SAMPLE_RATE, rate)
        return AudioClip.from_float(y)
    return AudioClip(samples)


def write_wav(path, clip: AudioClip) -> None:
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(clip.sample_rate)
        wf.writeframes(clip.samples.astype("<i2").tobytes())


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int, n_fft: int, sample_rate: int, fmin: float, fmax: float) -> np.ndarray:
    """Triangular filters on the HTK mel scale, shape ``(n_mels, n_fft // 2 + 1)``."""
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    freqs = np.arange(n_fft // 2 + 1) * sample_rate / n_fft
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    up = (freqs - lo) / (mid - lo)
    down = (hi - freqs) / (hi - mid)
    return np.clip(np.minimum(up, down), 0.0, None)


class FeatureEncoder(Protocol):
    def __call__(self, samples: np.ndarray, sample_rate: int) -> np.ndarray: ...


@dataclass
class LogMelEncoder:
    """Log mel-band energies, 25 ms Hann window and 10 ms hop at 16 kHz."""

    n_mels: int = 32
    win_length: int = 400
    hop_length: int = 160
    n_fft: int = 512
    fmin: float = 20.0
    fmax: float = 8000.0
    floor: float = 1e-10
    _bank: np.ndarray | None = field(default=None, init=False, repr=False)

    @property
    def log_floor(self) -> float:
        return float(np.log(self.floor))

    def band_edges(self) -> np.ndarray:
        """Lower, centre and upper frequency of each band, shape ``(n_mels, 3)``."""
        e = mel_to_hz(np.linspace(hz_to_mel(self.fmin), hz_to_mel(self.fmax), self.n_mels + 2))
        return np.stack([e[:-2], e[1:-1], e[2:]], axis=1)

    def __call__(self, samples: np.ndarray, sample_rate: int = SAMPLE_RATE) -> np.ndarray:
        if sample_rate != SAMPLE_RATE:
            raise AudioError(f"log-mel encoder expects {SAMPLE_RATE} Hz, got {sample_rate}")
        x = np.asarray(samples, dtype=np.float64)
        if x.size < self.win_length:
            x = np.pad(x, (0, self.win_length - x.size))
        n = 1 + (x.size - self.win_length) // self.hop_length
        idx = np.arange(self.win_length)[None, :] + self.hop_length * np.arange(n)[:, None]
        frames = x[idx] * np.hanning(self.win_length)
        power = np.abs(np.fft.rfft(frames, n=self.n_fft, axis=-1)) ** 2
        if self._bank is None:
            self._bank = mel_filterbank(self.n_mels, self.n_fft, SAMPLE_RATE, self.fmin, self.fmax)
        return np.log(np.maximum(power @ self._bank.T, self.floor))


@dataclass(frozen=True)
class AudioFeatureSeq:
    features: np.ndarray
    frame_rate: int = FPS

    @property
    def n_frames(self) -> int:
        return self.features.shape[0]


def align_features(raw: np.ndarray, n: int) -> np.ndarray:
    """Linearly resample ``(frames, d)`` onto ``n`` points spanning first to last frame."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2 or raw.shape[0] < 1:
        raise ValueError(f"need at least one raw frame, got shape {raw.shape}")
    if n <= 0:
        raise ValueError(f"target length must be positive, got {n}")
    m = raw.shape[0]
    if m == n:
        return raw.copy()
    if m == 1:
        return np.repeat(raw, n, axis=0)
    pos = np.linspace(0.0, m - 1, n)
    lo = np.minimum(np.floor(pos).astype(np.int64), m - 2)
    frac = (pos - lo)[:, None]
    # difference form keeps constant runs exact
    out = raw[lo] + (raw[lo + 1] - raw[lo]) * frac
    out[-1] = raw[-1]
    return out


def extract_audio_features(clip: AudioClip, encoder: Callable | None = None) -> AudioFeatureSeq:
    """Encode a clip and align the result to ``round(duration * 30)`` frames."""
    if clip.samples.size == 0:
        raise AudioError("empty audio clip")
    n = clip.n_frames
    if n < 1:
        raise AudioError(f"clip of {clip.duration:.4f} s is shorter than one animation frame")
    encoder = encoder or LogMelEncoder()
    raw = np.asarray(encoder(clip.as_float(), clip.sample_rate), dtype=np.float64)
    feats = align_features(raw, n)
    if not np.isfinite(feats).all():
        raise AudioError("encoder produced non-finite features")
    return AudioFeatureSeq(feats)
