"""Short-time objective intelligibility (Taal et al., 2011).

Signals are brought to 10 kHz, frames where the clean signal is more than
40 dB below its loudest frame are dropped from both signals, and the score is
the mean correlation between clean and normalised/clipped processed one-third
octave band envelopes over 384 ms analysis segments.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.signal import firwin, resample_poly

from ..errors import ConfigError, TooShortError
from ..dsp.types import Waveform

EPS = np.finfo(np.float64).eps


@dataclass(frozen=True)
class StoiConfig:
    fs: int = 10000
    frame_len: int = 256
    hop: int = 128
    nfft: int = 512
    num_bands: int = 15
    min_freq: float = 150.0
    segment_frames: int = 30
    dyn_range_db: float = 40.0
    beta_db: float = -15.0
    resampler_taps: int = 63
    resampler_kaiser_beta: float = 5.0


STOI_CONFIG = StoiConfig()


@lru_cache(maxsize=4)
def third_octave_matrix(fs: int, nfft: int, num_bands: int, min_freq: float) -> np.ndarray:
    """(bands, nfft/2+1) 0/1 matrix grouping FFT bins into one-third octave bands."""
    f = np.linspace(0, fs, nfft + 1)[:nfft // 2 + 1]
    k = np.arange(num_bands, dtype=np.float64)
    lo = min_freq * 2.0 ** ((2 * k - 1) / 6)
    hi = min_freq * 2.0 ** ((2 * k + 1) / 6)
    obm = np.zeros((num_bands, f.size))
    for i in range(num_bands):
        a = int(np.argmin((f - lo[i]) ** 2))
        b = int(np.argmin((f - hi[i]) ** 2))
        obm[i, a:b] = 1.0
    obm.setflags(write=False)
    return obm


@lru_cache(maxsize=4)
def _resampling_filter(up: int, down: int, taps: int, beta: float) -> np.ndarray:
    h = firwin(taps, 1.0 / max(up, down), window=("kaiser", beta))
    h.setflags(write=False)
    return h


def resample(x: np.ndarray, fs_in: int, fs_out: int, cfg: StoiConfig = STOI_CONFIG) -> np.ndarray:
    """Polyphase resampling with a fixed Kaiser-windowed FIR."""
    if fs_in == fs_out:
        return np.asarray(x, dtype=np.float64)
    g = np.gcd(fs_in, fs_out)
    up, down = fs_out // g, fs_in // g
    h = _resampling_filter(up, down, cfg.resampler_taps, cfg.resampler_kaiser_beta)
    return resample_poly(x, up, down, window=np.array(h))


def _hann(n: int) -> np.ndarray:
    return np.hanning(n + 2)[1:-1]


def _frames(x: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    starts = range(0, len(x) - frame_len, hop)
    return np.array([x[i:i + frame_len] for i in starts]).reshape(-1, frame_len)


def _overlap_add(frames: np.ndarray, hop: int) -> np.ndarray:
    if frames.shape[0] == 0:
        return np.zeros(0)
    n, L = frames.shape
    out = np.zeros((n - 1) * hop + L)
    for i in range(n):
        out[i * hop:i * hop + L] += frames[i]
    return out


def remove_silent_frames(x: np.ndarray, y: np.ndarray, cfg: StoiConfig = STOI_CONFIG):
    w = _hann(cfg.frame_len)
    xf = _frames(x, cfg.frame_len, cfg.hop) * w
    yf = _frames(y, cfg.frame_len, cfg.hop) * w
    energies = 20 * np.log10(np.linalg.norm(xf, axis=1) + EPS)
    keep = energies > energies.max() - cfg.dyn_range_db if energies.size else energies.astype(bool)
    return _overlap_add(xf[keep], cfg.hop), _overlap_add(yf[keep], cfg.hop)


def _band_envelopes(x: np.ndarray, cfg: StoiConfig) -> np.ndarray:
    spec = np.fft.rfft(_frames(x, cfg.frame_len, cfg.hop) * _hann(cfg.frame_len), n=cfg.nfft, axis=1)
    obm = third_octave_matrix(cfg.fs, cfg.nfft, cfg.num_bands, cfg.min_freq)
    return np.sqrt(obm @ (np.abs(spec) ** 2).T)  # (bands, frames)


def _as_array(s) -> np.ndarray:
    return s.samples if isinstance(s, Waveform) else np.asarray(s, dtype=np.float64).reshape(-1)


def stoi(clean, processed, fs: int | None = None, cfg: StoiConfig = STOI_CONFIG) -> float:
    """STOI score of ``processed`` against ``clean``.

    Accepts :class:`Waveform` or 1-D arrays (then ``fs`` is required).
    ``processed`` is cut or zero-padded to the clean length with a warning.
    """
    if fs is None:
        if not isinstance(clean, Waveform):
            raise ConfigError("fs is required for raw arrays")
        fs = clean.sample_rate_hz
    if fs not in (10000, 16000):
        raise ConfigError(f"stoi supports 10 kHz or 16 kHz input, got {fs}")
    x, y = _as_array(clean), _as_array(processed)
    if y.size != x.size:
        warnings.warn(f"processed length {y.size} differs from clean length {x.size}; adjusting",
                      RuntimeWarning, stacklevel=2)
        y = np.pad(y, (0, max(0, x.size - y.size)))[:x.size]
    x = resample(x, fs, cfg.fs, cfg)
    y = resample(y, fs, cfg.fs, cfg)
    x, y = remove_silent_frames(x, y, cfg)

    X = _band_envelopes(x, cfg)
    Y = _band_envelopes(y, cfg)
    N = cfg.segment_frames
    if X.shape[1] < N:
        raise TooShortError(
            f"only {X.shape[1]} frames remain after silence removal; need {N}")

    # (segments, bands, N)
    xs = np.lib.stride_tricks.sliding_window_view(X, N, axis=1).transpose(1, 0, 2)
    ys = np.lib.stride_tricks.sliding_window_view(Y, N, axis=1).transpose(1, 0, 2)
    alpha = np.linalg.norm(xs, axis=2, keepdims=True) / (np.linalg.norm(ys, axis=2, keepdims=True) + EPS)
    clip = 10 ** (-cfg.beta_db / 20)
    yp = np.minimum(ys * alpha, xs * (1 + clip))
    yp = yp - yp.mean(axis=2, keepdims=True)
    xc = xs - xs.mean(axis=2, keepdims=True)
    yp /= np.linalg.norm(yp, axis=2, keepdims=True) + EPS
    xc /= np.linalg.norm(xc, axis=2, keepdims=True) + EPS
    return float(np.sum(yp * xc) / (xc.shape[0] * xc.shape[1]))
