from __future__ import annotations

import math

import numpy as np

from ..errors import ConfigError, DegenerateSignalError
from .types import Waveform


def default_train_snrs() -> list[float]:
    """32 training SNR levels: -10 dB to +21 dB in 1 dB steps."""
    return [float(s) for s in range(-10, 22)]


DEFAULT_TEST_SNRS = (15.0, 10.0, 5.0, 0.0, -5.0)


def crop_noise(noise: Waveform, length: int, offset: int | None = None, rng=None) -> tuple[np.ndarray, int]:
    """Cut ``length`` samples out of ``noise``.

    With no ``offset`` the start is drawn uniformly from ``rng`` (or 0 when
    no generator is supplied either).
    """
    if len(noise) < length:
        raise ConfigError(f"noise of {len(noise)} samples cannot cover {length} samples")
    max_offset = len(noise) - length
    if offset is None:
        offset = int(rng.integers(0, max_offset + 1)) if rng is not None else 0
    if not 0 <= offset <= max_offset:
        raise ConfigError(f"noise offset {offset} outside [0, {max_offset}]")
    return noise.samples[offset:offset + length], offset


def mix_at_snr(clean: Waveform, noise: Waveform, snr_db: float, *, offset: int | None = None,
               rng=None) -> Waveform:
    """Add a crop of ``noise`` to ``clean`` scaled to the requested SNR.

    Powers are mean squares over the clean span. ``snr_db = math.inf``
    returns an unmodified copy of ``clean``.
    """
    if clean.sample_rate_hz != noise.sample_rate_hz:
        raise ConfigError(
            f"sample rates differ: clean {clean.sample_rate_hz} Hz, noise {noise.sample_rate_hz} Hz")
    if math.isinf(snr_db) and snr_db > 0:
        return Waveform(clean.samples.copy(), clean.sample_rate_hz)
    crop, _ = crop_noise(noise, len(clean), offset, rng)
    p_clean = np.mean(clean.samples ** 2) if len(clean) else 0.0
    p_noise = np.mean(crop ** 2) if crop.size else 0.0
    if p_clean == 0.0:
        raise DegenerateSignalError("clean signal has zero power")
    if p_noise == 0.0:
        raise DegenerateSignalError("noise crop has zero power")
    alpha = math.sqrt(p_clean / (p_noise * 10.0 ** (snr_db / 10.0)))
    return Waveform(clean.samples + alpha * crop, clean.sample_rate_hz)
