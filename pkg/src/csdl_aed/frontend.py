"""Framing, magnitude STFT and MFCC features."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft
import scipy.signal

from .errors import ConfigError, DimensionError, InputError


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise InputError("sample_rate must be positive")
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise InputError("AudioClip expects mono samples")
        if not np.all(np.isfinite(samples)):
            raise InputError("samples must be finite")
        object.__setattr__(self, "samples", samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class StftConfig:
    frame_len_ms: float = 40.0
    hop_ms: float = 10.0
    window: str = "hann"

    def __post_init__(self):
        if self.window not in ("hann", "hamming", "rect"):
            raise ConfigError(f"unknown window {self.window!r}")
        if self.hop_ms <= 0 or self.frame_len_ms <= 0:
            raise ConfigError("frame length and hop must be positive")
        if self.hop_ms > self.frame_len_ms:
            raise ConfigError("hop must not exceed the frame length")

    def frame_len(self, sample_rate: int) -> int:
        n = int(round(self.frame_len_ms * sample_rate / 1000.0))
        if n < 1:
            raise ConfigError("frame length is shorter than one sample")
        return n

    def hop(self, sample_rate: int) -> int:
        n = int(round(self.hop_ms * sample_rate / 1000.0))
        if n < 1:
            raise ConfigError("hop is shorter than one sample")
        return n


@dataclass(frozen=True)
class Spectrogram:
    """Non-negative ``(freq_bins, frames)`` matrix plus frame timing.

    Frame ``i`` covers samples ``[i * hop, i * hop + frame_len)``.
    """

    values: np.ndarray
    sample_rate: int
    frame_len: int
    hop: int
    start_frame: np.ndarray | None = field(default=None, compare=False)

    @property
    def n_bins(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]

    @property
    def hop_seconds(self) -> float:
        return self.hop / self.sample_rate

    def frame_starts(self) -> np.ndarray:
        """Sample index of the first sample of every frame."""
        if self.start_frame is not None:
            return np.asarray(self.start_frame) * self.hop
        return np.arange(self.n_frames) * self.hop

    def frame_times(self) -> np.ndarray:
        return self.frame_starts() / self.sample_rate

    def frame_centers(self) -> np.ndarray:
        return (self.frame_starts() + self.frame_len / 2.0) / self.sample_rate

    def with_values(self, values: np.ndarray, start_frame=None) -> "Spectrogram":
        return Spectrogram(values, self.sample_rate, self.frame_len, self.hop, start_frame)

    def select(self, columns) -> "Spectrogram":
        columns = np.asarray(columns, dtype=int)
        starts = self.frame_starts() // self.hop
        return self.with_values(self.values[:, columns], starts[columns])

    @property
    def is_empty(self) -> bool:
        return self.n_frames == 0


def n_frames_for(n_samples: int, frame_len: int, hop: int) -> int:
    if n_samples < frame_len:
        return 0
    return 1 + (n_samples - frame_len) // hop


def _window(name: str, n: int) -> np.ndarray:
    if name == "rect":
        return np.ones(n)
    return scipy.signal.get_window(name, n, fftbins=True)


def magnitude_spectrogram(clip: AudioClip, cfg: StftConfig = StftConfig()) -> Spectrogram:
    """Magnitude STFT with ``frame_len // 2 + 1`` bins and no padding."""
    sr = clip.sample_rate
    frame_len, hop = cfg.frame_len(sr), cfg.hop(sr)
    n = n_frames_for(len(clip.samples), frame_len, hop)
    if n == 0:
        raise InputError(
            f"clip has {len(clip.samples)} samples, shorter than one frame ({frame_len})")
    frames = np.lib.stride_tricks.sliding_window_view(clip.samples, frame_len)[::hop][:n]
    mag = np.abs(np.fft.rfft(frames * _window(cfg.window, frame_len), axis=1)).T
    return Spectrogram(np.ascontiguousarray(mag), sr, frame_len, hop)


@dataclass(frozen=True)
class MfccConfig:
    n_coeffs: int = 23
    n_mel_filters: int = 40
    fmin: float = 0.0
    fmax: float | None = None
    log_floor: float = 1e-10

    def __post_init__(self):
        if self.n_coeffs < 1 or self.n_coeffs >= self.n_mel_filters:
            raise ConfigError("need 1 <= n_coeffs < n_mel_filters")
        if self.fmin < 0:
            raise ConfigError("fmin must be >= 0")


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=float) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=float) / 2595.0) - 1.0)


def mel_filterbank(n_filters: int, n_bins: int, sample_rate: int,
                   fmin: float = 0.0, fmax: float | None = None,
                   n_fft: int | None = None) -> np.ndarray:
    """Triangular mel filters, shape ``(n_filters, n_bins)``.

    Each row is normalized to unit sum, so a spectrally flat frame maps to
    equal filter energies.
    """
    nyq = sample_rate / 2.0
    fmax = nyq if fmax is None else fmax
    if fmax > nyq + 1e-9 or fmin >= fmax:
        raise ConfigError(f"need fmin < fmax <= {nyq}")
    n_fft = 2 * (n_bins - 1) if n_fft is None else n_fft
    if n_fft // 2 + 1 != n_bins:
        raise DimensionError(f"{n_bins} bins do not match an FFT of size {n_fft}")
    freqs = np.arange(n_bins) * sample_rate / n_fft
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_filters + 2))
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    up = (freqs - lo) / (mid - lo)
    down = (hi - freqs) / (hi - mid)
    fb = np.maximum(0.0, np.minimum(up, down))
    sums = fb.sum(axis=1)
    if np.any(sums <= 0):
        raise DimensionError(
            f"{int(np.sum(sums <= 0))} mel filters fall between frequency bins; "
            f"use fewer filters or longer frames")
    return fb / sums[:, None]


def mfcc(spec: Spectrogram | np.ndarray, cfg: MfccConfig = MfccConfig(),
         sample_rate: int | None = None) -> np.ndarray:
    """MFCCs 1..n_coeffs (0th dropped), shape ``(n_coeffs, frames)``.

    mel filterbank -> log (floored) -> orthonormal DCT-II.
    """
    if isinstance(spec, Spectrogram):
        values, sample_rate, n_fft = spec.values, spec.sample_rate, spec.frame_len
    else:
        n_fft = None
        values = np.asarray(spec, dtype=np.float64)
        if sample_rate is None:
            raise ConfigError("sample_rate is required for a bare matrix")
    if values.ndim != 2:
        raise DimensionError("spectrogram must be 2-D")
    fmax = cfg.fmax if cfg.fmax is not None else sample_rate / 2.0
    fb = mel_filterbank(cfg.n_mel_filters, values.shape[0], sample_rate, cfg.fmin, fmax, n_fft)
    logmel = np.log(np.maximum(fb @ values, cfg.log_floor))
    cep = scipy.fft.dct(logmel, type=2, axis=0, norm="ortho")
    return cep[1:cfg.n_coeffs + 1]
