"""STFT analysis, weighted overlap-add synthesis and the log1p feature mapping."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.signal import get_window

from ..errors import ShapeError, TooShortError
from .types import ComplexSpectrogram, FeatureMatrix, StftParams, Waveform

_NORM_FLOOR = 1e-8


@lru_cache(maxsize=8)
def analysis_window(params: StftParams) -> np.ndarray:
    w = get_window(params.window_kind, params.window_len_samples, fftbins=True)
    w.setflags(write=False)
    return w


def frame_signal(x: np.ndarray, params: StftParams) -> np.ndarray:
    """Return a (T, window_len) strided view; trailing partial frames are dropped."""
    n_frames = params.n_frames(x.size)
    if n_frames == 0:
        raise TooShortError(
            f"signal of {x.size} samples is shorter than one {params.window_len_samples}-sample window")
    view = np.lib.stride_tricks.sliding_window_view(x, params.window_len_samples)
    return view[::params.hop_samples][:n_frames]


def stft(w: Waveform, params: StftParams = StftParams()) -> ComplexSpectrogram:
    frames = frame_signal(w.samples, params) * analysis_window(params)
    spec = np.fft.rfft(frames, n=params.fft_len, axis=1)
    return ComplexSpectrogram(spec, params, len(w))


def istft(s: ComplexSpectrogram, sample_rate_hz: int = 16000) -> Waveform:
    """Inverse STFT by overlap-add, normalised by the summed squared window.

    Samples whose normaliser falls below 1e-8 (no frame covers them) are zero.
    """
    p = s.params
    win = analysis_window(p)
    L, H = p.window_len_samples, p.hop_samples
    n_frames = s.n_frames
    span = (n_frames - 1) * H + L if n_frames else 0
    out_len = max(span, s.original_len)
    y = np.zeros(out_len)
    norm = np.zeros(out_len)
    if n_frames:
        frames = np.fft.irfft(s.frames, n=p.fft_len, axis=1)[:, :L] * win
        w2 = win * win
        for t in range(n_frames):
            y[t * H:t * H + L] += frames[t]
            norm[t * H:t * H + L] += w2
    covered = norm >= _NORM_FLOOR
    y[covered] /= norm[covered]
    y[~covered] = 0.0
    return Waveform(y[:s.original_len], sample_rate_hz)


def featurize(s: ComplexSpectrogram) -> tuple[FeatureMatrix, np.ndarray]:
    """Split a spectrogram into log1p magnitude features and the phase angles."""
    return FeatureMatrix(np.log1p(np.abs(s.frames)), s.params), np.angle(s.frames)


def defeaturize(f: FeatureMatrix, phase: np.ndarray, original_len: int = 0) -> ComplexSpectrogram:
    phase = np.asarray(phase, dtype=np.float64)
    if phase.shape != f.values.shape:
        raise ShapeError(f"feature shape {f.values.shape} does not match phase shape {phase.shape}")
    mag = np.maximum(np.expm1(f.values), 0.0)
    return ComplexSpectrogram(mag * np.exp(1j * phase), f.params, original_len)


def log1p_features(w: Waveform, params: StftParams = StftParams()) -> np.ndarray:
    """Shortcut: the (T, F) log1p magnitude array of ``w``."""
    return featurize(stft(w, params))[0].values
