from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, FormatError, ShapeError


@dataclass
class Waveform:
    """Mono audio. ``samples`` are float64, nominally in [-1, 1]."""

    samples: np.ndarray
    sample_rate_hz: int = 16000

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        if int(self.sample_rate_hz) <= 0:
            raise ConfigError(f"sample rate must be positive, got {self.sample_rate_hz}")
        self.sample_rate_hz = int(self.sample_rate_hz)
        if not np.all(np.isfinite(self.samples)):
            raise FormatError("waveform contains non-finite samples")

    def __len__(self):
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz


@dataclass(frozen=True)
class StftParams:
    """Framing parameters. Defaults give a 32 ms Hamming window with 16 ms hop at 16 kHz."""

    window_len_samples: int = 512
    hop_samples: int = 256
    window_kind: str = "hamming"
    fft_len: int = 512

    def __post_init__(self):
        if self.window_len_samples <= 0 or self.hop_samples <= 0:
            raise ConfigError("window and hop lengths must be positive")
        if self.hop_samples > self.window_len_samples:
            raise ConfigError("hop must not exceed the window length")
        if self.fft_len < self.window_len_samples:
            raise ConfigError("fft_len must be at least the window length")
        if self.window_kind != "hamming":
            raise ConfigError(f"unsupported window kind {self.window_kind!r}")

    @property
    def n_bins(self) -> int:
        return self.fft_len // 2 + 1

    def n_frames(self, n_samples: int) -> int:
        if n_samples < self.window_len_samples:
            return 0
        return 1 + (n_samples - self.window_len_samples) // self.hop_samples


@dataclass
class ComplexSpectrogram:
    frames: np.ndarray  # (T, F) complex
    params: StftParams = field(default_factory=StftParams)
    original_len: int = 0

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.complex128)
        if self.frames.ndim != 2 or self.frames.shape[1] != self.params.n_bins:
            raise ShapeError(
                f"expected (T, {self.params.n_bins}) frames, got {self.frames.shape}")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]


@dataclass
class FeatureMatrix:
    values: np.ndarray  # (T, F) log1p magnitudes
    params: StftParams = field(default_factory=StftParams)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ShapeError(f"feature matrix must be 2-D, got shape {self.values.shape}")

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]
