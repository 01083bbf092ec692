"""Synthetic labelled mini-corpus and noise bank.

Utterances are strings of CV syllables rendered from simple source-filter
templates. Phone labels are TIMIT symbols so the bundled manner/place tables
apply to them unchanged. Segment spans use ``(start_sample, end_sample, label)``
triplets, the same layout as TIMIT ``.PHN`` files.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import butter, lfilter, sosfilt

from ..errors import ConfigError
from .types import StftParams, Waveform

KINDS = ("vowel", "fricative", "nasal", "stop", "silence")


@dataclass(frozen=True)
class SegmentTemplate:
    label: str
    kind: str
    formants: tuple[float, ...] = ()
    band: tuple[float, float] = (0.0, 0.0)
    gain_db: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown template kind {self.kind!r}")


def default_templates() -> tuple[SegmentTemplate, ...]:
    return (
        SegmentTemplate("aa", "vowel", (730, 1090, 2440)),
        SegmentTemplate("iy", "vowel", (270, 2290, 3010)),
        SegmentTemplate("uw", "vowel", (300, 870, 2240)),
        SegmentTemplate("ae", "vowel", (660, 1720, 2410)),
        SegmentTemplate("er", "vowel", (490, 1350, 1690)),
        SegmentTemplate("s", "fricative", band=(4500, 7500), gain_db=-3),
        SegmentTemplate("sh", "fricative", band=(2000, 4200), gain_db=-3),
        SegmentTemplate("f", "fricative", band=(1200, 7000), gain_db=-9),
        SegmentTemplate("m", "nasal", (250, 1100), gain_db=-4),
        SegmentTemplate("n", "nasal", (250, 1600), gain_db=-4),
        SegmentTemplate("ng", "nasal", (250, 2300), gain_db=-4),
        SegmentTemplate("p", "stop", band=(400, 1500)),
        SegmentTemplate("t", "stop", band=(3500, 7000)),
        SegmentTemplate("k", "stop", band=(1500, 3000)),
        SegmentTemplate("h#", "silence"),
    )


@dataclass
class MiniCorpusSpec:
    n_utterances: int = 100
    phone_classes: tuple[SegmentTemplate, ...] = field(default_factory=default_templates)
    segment_len_range_ms: tuple[float, float] = (60.0, 160.0)
    seed: int = 0
    syllables_range: tuple[int, int] = (4, 7)
    sample_rate_hz: int = 16000
    level_rms: float = 0.05
    id_prefix: str = "syn"


@dataclass
class Utterance:
    uid: str
    wave: Waveform
    segments: list[tuple[int, int, str]]

    def frame_labels(self, params: StftParams = StftParams()) -> list[str]:
        return frame_labels(self.segments, len(self.wave), params)


def frame_labels(segments, n_samples: int, params: StftParams = StftParams()) -> list[str]:
    """Label each STFT frame by the segment holding its centre sample."""
    n_frames = params.n_frames(n_samples)
    if not segments:
        return []
    starts = np.array([s[0] for s in segments])
    centres = np.arange(n_frames) * params.hop_samples + params.window_len_samples // 2
    idx = np.clip(np.searchsorted(starts, centres, side="right") - 1, 0, len(segments) - 1)
    return [segments[i][2] for i in idx]


# -- segment renderers --------------------------------------------------------

def _fade(x: np.ndarray, fs: int, ms: float = 5.0) -> np.ndarray:
    n = min(int(fs * ms / 1000), x.size // 2)
    if n > 0:
        ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(n) / n)
        x[:n] *= ramp
        x[-n:] *= ramp[::-1]
    return x


def _set_rms(x: np.ndarray, rms: float) -> np.ndarray:
    cur = math.sqrt(float(np.mean(x * x))) if x.size else 0.0
    return x * (rms / cur) if cur > 0 else x


def _pulse_train(n: int, f0: float, fs: int, rng) -> np.ndarray:
    f0_track = f0 * (1.0 + 0.04 * np.sin(2 * np.pi * rng.uniform(2, 5) * np.arange(n) / fs
                                          + rng.uniform(0, 2 * np.pi)))
    phase = np.cumsum(f0_track / fs) + rng.uniform(0, 1)
    src = np.diff(np.floor(phase), prepend=np.floor(phase[0])) if n else np.zeros(0)
    # one-pole glottal tilt
    return lfilter([1.0], [1.0, -0.9], src)


def _resonate(x: np.ndarray, freqs, fs: int, bw: float = 90.0) -> np.ndarray:
    for f in freqs:
        r = math.exp(-math.pi * bw / fs)
        theta = 2 * math.pi * f / fs
        x = lfilter([1.0 - r], [1.0, -2 * r * math.cos(theta), r * r], x)
    return x


def _bandpass(x: np.ndarray, band, fs: int) -> np.ndarray:
    lo, hi = band
    sos = butter(4, [lo, min(hi, 0.49 * fs)], btype="bandpass", fs=fs, output="sos")
    return sosfilt(sos, x)


def _render(t: SegmentTemplate, n: int, f0: float, spec: MiniCorpusSpec, rng) -> np.ndarray:
    fs = spec.sample_rate_hz
    rms = spec.level_rms * 10 ** (t.gain_db / 20)
    if t.kind == "silence" or n == 0:
        return np.zeros(n)
    if t.kind == "vowel":
        jitter = rng.uniform(0.95, 1.05, size=len(t.formants))
        x = _resonate(_pulse_train(n, f0, fs, rng), np.asarray(t.formants) * jitter, fs)
    elif t.kind == "nasal":
        x = _resonate(_pulse_train(n, f0, fs, rng), t.formants, fs, bw=120.0)
        x = sosfilt(butter(2, 2500, fs=fs, output="sos"), x)
    elif t.kind == "fricative":
        x = _bandpass(rng.standard_normal(n), t.band, fs)
    else:  # stop: closure silence, then a decaying band-limited burst
        closure = int(n * rng.uniform(0.4, 0.6))
        m = n - closure
        burst = _bandpass(rng.standard_normal(m), t.band, fs) * np.exp(-np.arange(m) / (0.012 * fs))
        burst = _set_rms(burst, rms * 2.0)
        return np.concatenate([np.zeros(closure), _fade(burst, fs, 1.0)])
    return _fade(_set_rms(x, rms), fs)


def _plan(spec: MiniCorpusSpec, rng) -> list[SegmentTemplate]:
    by_kind: dict[str, list[SegmentTemplate]] = {}
    for t in spec.phone_classes:
        by_kind.setdefault(t.kind, []).append(t)
    sil = by_kind.get("silence", [])
    vowels = by_kind.get("vowel", [])
    cons = [t for k in ("fricative", "nasal", "stop") for t in by_kind.get(k, [])]
    lo, hi = spec.syllables_range
    n_syl = int(rng.integers(lo, hi + 1))
    seq: list[SegmentTemplate] = []
    if sil:
        seq.append(sil[int(rng.integers(len(sil)))])
    for i in range(n_syl):
        if vowels:
            if cons and rng.random() < 0.85:
                seq.append(cons[int(rng.integers(len(cons)))])
            seq.append(vowels[int(rng.integers(len(vowels)))])
            if sil and i < n_syl - 1 and rng.random() < 0.1:
                seq.append(sil[int(rng.integers(len(sil)))])
        else:
            pool = list(spec.phone_classes)
            seq.append(pool[int(rng.integers(len(pool)))])
    if sil:
        seq.append(sil[int(rng.integers(len(sil)))])
    return seq


def generate_utterance(spec: MiniCorpusSpec, index: int, seed_seq: np.random.SeedSequence) -> Utterance:
    rng = np.random.default_rng(seed_seq)
    fs = spec.sample_rate_hz
    f0 = rng.uniform(95.0, 210.0)
    lo_ms, hi_ms = spec.segment_len_range_ms
    pieces, segments, pos = [], [], 0
    for t in _plan(spec, rng):
        n = int(round(rng.uniform(lo_ms, hi_ms) * fs / 1000))
        pieces.append(_render(t, n, f0, spec, rng))
        segments.append((pos, pos + n, t.label))
        pos += n
    samples = np.concatenate(pieces) if pieces else np.zeros(0)
    return Utterance(f"{spec.id_prefix}{index:05d}", Waveform(samples, fs), segments)


def generate_corpus(spec: MiniCorpusSpec) -> list[Utterance]:
    """Render ``spec.n_utterances`` utterances; each draws from its own spawned seed."""
    if not spec.phone_classes:
        raise ConfigError("corpus spec has no segment templates")
    if spec.n_utterances < 0:
        raise ConfigError("n_utterances must be non-negative")
    children = np.random.SeedSequence(spec.seed).spawn(spec.n_utterances)
    return [generate_utterance(spec, i, ss) for i, ss in enumerate(children)]


def write_corpus_manifest(path, utterances, wav_paths: dict[str, str]) -> None:
    records = [{"id": u.uid, "path": wav_paths[u.uid],
                "segments": [[int(a), int(b), lab] for a, b, lab in u.segments]}
               for u in utterances]
    Path(path).write_text(json.dumps({"utterances": records}, indent=1, sort_keys=True))


def read_corpus_manifest(path) -> list[dict]:
    return json.loads(Path(path).read_text())["utterances"]


# -- noise bank ---------------------------------------------------------------

def _colored(n: int, exponent: float, rng) -> np.ndarray:
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.arange(spec.size, dtype=np.float64)
    f[0] = 1.0
    return np.fft.irfft(spec * f ** (-exponent / 2), n=n)


def _harmonic_hum(n: int, f0: float, fs: int, count: int = 12) -> np.ndarray:
    t = np.arange(n) / fs
    return sum(np.sin(2 * np.pi * f0 * k * t + k) / k for k in range(1, count + 1))


def _clicks(n: int, rate_hz: float, fs: int, rng) -> np.ndarray:
    x = np.zeros(n)
    period = int(fs / rate_hz)
    x[::period] = 1.0
    return lfilter([1.0], [1.0, -0.97], x) * rng.choice([-1.0, 1.0])


def _babble(n: int, fs: int, rng) -> np.ndarray:
    talkers = []
    for _ in range(5):
        spec = MiniCorpusSpec(n_utterances=1, seed=int(rng.integers(2**31)), sample_rate_hz=fs)
        parts, total = [], 0
        while total < n:
            u = generate_utterance(spec, 0, np.random.SeedSequence(int(rng.integers(2**31))))
            parts.append(u.wave.samples)
            total += len(u.wave)
        talkers.append(np.concatenate(parts)[:n])
    return np.sum(talkers, axis=0)


def _noise_white(n, fs, rng): return rng.standard_normal(n)
def _noise_pink(n, fs, rng): return _colored(n, 1.0, rng)
def _noise_brown(n, fs, rng): return _colored(n, 2.0, rng)
def _noise_blue(n, fs, rng): return _colored(n, -1.0, rng)
def _noise_lowband(n, fs, rng): return sosfilt(butter(4, 1000, fs=fs, output="sos"), rng.standard_normal(n))
def _noise_highband(n, fs, rng): return sosfilt(butter(4, 3000, "highpass", fs=fs, output="sos"), rng.standard_normal(n))
def _noise_midband(n, fs, rng): return _bandpass(rng.standard_normal(n), (800, 2500), fs)


def _noise_am_white(n, fs, rng):
    return rng.standard_normal(n) * (1 + 0.8 * np.sin(2 * np.pi * 4.0 * np.arange(n) / fs))


def _noise_hum(n, fs, rng):
    return _harmonic_hum(n, 100.0, fs) + 0.3 * rng.standard_normal(n)


def _noise_clicks(n, fs, rng):
    return _clicks(n, 11.0, fs, rng) + 0.2 * _colored(n, 1.0, rng)


def _noise_babble(n, fs, rng): return _babble(n, fs, rng)


def _noise_factory(n, fs, rng):
    return _harmonic_hum(n, 150.0, fs, 8) + 2.0 * _clicks(n, 7.0, fs, rng) + 0.5 * _colored(n, 1.0, rng)


def _noise_pink_am(n, fs, rng):
    return _colored(n, 1.0, rng) * (1 + 0.9 * np.sin(2 * np.pi * 2.0 * np.arange(n) / fs))


def _noise_siren(n, fs, rng):
    t = np.arange(n) / fs
    inst = 1000 + 400 * np.sin(2 * np.pi * 0.5 * t)
    return np.sin(2 * np.pi * np.cumsum(inst) / fs) + 0.2 * rng.standard_normal(n)


def _noise_bandstop(n, fs, rng):
    sos = butter(4, [1000, 3000], btype="bandstop", fs=fs, output="sos")
    return sosfilt(sos, rng.standard_normal(n))


def _synthetic_type(n: int, fs: int, rng, index: int) -> np.ndarray:
    """One member of a procedural noise family.

    ``index`` fixes the type (spectral envelope, modulation, tonal part);
    ``rng`` only draws the instance.
    """
    kind = np.random.default_rng([index, 0x5EED])
    f = np.fft.rfftfreq(n, 1 / fs)
    lf = np.log2(np.maximum(f, 20.0) / 1000.0)
    env_db = kind.uniform(-6, 3) * lf
    for _ in range(int(kind.integers(2, 7))):
        centre = np.log2(kind.uniform(100, 7000) / 1000.0)
        env_db += kind.uniform(-25, 20) * np.exp(-0.5 * ((lf - centre) / kind.uniform(0.15, 1.2)) ** 2)
    x = np.fft.irfft(np.fft.rfft(rng.standard_normal(n)) * 10 ** (env_db / 20), n=n)
    t = np.arange(n) / fs
    mode = kind.integers(3)
    if mode == 1:
        x *= 1 + kind.uniform(0.3, 0.9) * np.sin(2 * np.pi * kind.uniform(0.5, 10) * t + rng.uniform(0, 2 * np.pi))
    elif mode == 2:
        on_s, off_s = kind.uniform(0.05, 0.5, 2)
        gate, pos, state = np.zeros(n), 0, bool(rng.integers(2))
        while pos < n:
            run = max(1, int(rng.exponential(on_s if state else off_s) * fs))
            gate[pos:pos + run] = 1.0 if state else kind.uniform(0.05, 0.3)
            pos, state = pos + run, not state
        x *= lfilter([0.01], [1, -0.99], gate)
    if kind.uniform() < 0.4:
        x = _set_rms(x, 1.0)
        if kind.uniform() < 0.5:
            tone = _harmonic_hum(n, kind.uniform(80, 800), fs, int(kind.integers(1, 8)))
        else:
            lo, hi = sorted(kind.uniform(300, 5000, 2))
            inst = lo + (hi - lo) * ((t * kind.uniform(0.2, 2.0)) % 1.0)
            tone = np.sin(2 * np.pi * np.cumsum(inst) / fs)
        x += _set_rms(tone, kind.uniform(0.3, 2.0))
    return x


SYNTHETIC_PREFIX = "synth_"
N_SYNTHETIC = 90

NOISE_KINDS = {
    "white": _noise_white, "pink": _noise_pink, "brown": _noise_brown, "blue": _noise_blue,
    "lowband": _noise_lowband, "highband": _noise_highband, "midband": _noise_midband,
    "am_white": _noise_am_white, "hum": _noise_hum, "clicks": _noise_clicks,
    "babble": _noise_babble, "factory": _noise_factory, "pink_am": _noise_pink_am,
    "siren": _noise_siren, "bandstop": _noise_bandstop,
}
NAMED_TRAIN_NOISES = ("white", "pink", "brown", "blue", "lowband", "highband", "midband",
                      "am_white", "hum", "clicks")
# 10 named + 90 procedural types: a training bank of 100 noise types
DEFAULT_TRAIN_NOISES = NAMED_TRAIN_NOISES + tuple(f"{SYNTHETIC_PREFIX}{i:02d}" for i in range(N_SYNTHETIC))
DEFAULT_TEST_NOISES = ("babble", "factory", "pink_am", "siren", "bandstop")


def make_noise(kind: str, seed: int, duration_s: float = 10.0, fs: int = 16000,
               level_rms: float = 0.05) -> Waveform:
    """``level_rms``-scaled noise of a named kind or a procedural type ``synth_<index>``."""
    rng = np.random.default_rng(seed)
    if kind.startswith(SYNTHETIC_PREFIX) and kind[len(SYNTHETIC_PREFIX):].isdigit():
        x = _synthetic_type(int(duration_s * fs), fs, rng, int(kind[len(SYNTHETIC_PREFIX):]))
    elif kind in NOISE_KINDS:
        x = NOISE_KINDS[kind](int(duration_s * fs), fs, rng)
    else:
        raise ConfigError(f"unknown noise kind {kind!r}; choose from {sorted(NOISE_KINDS)} or {SYNTHETIC_PREFIX}<n>")
    return Waveform(_set_rms(np.asarray(x, dtype=np.float64), level_rms), fs)
