import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bpse.dsp import (ComplexSpectrogram, FeatureMatrix, MiniCorpusSpec, SegmentTemplate, StftParams,
                      Waveform, analysis_window, default_templates, defeaturize, featurize,
                      generate_corpus, istft, make_noise, mix_at_snr, read_wav, stft, write_wav)
from bpse.dsp.corpus import NOISE_KINDS, frame_labels
from bpse.errors import (ConfigError, DegenerateSignalError, FormatError, ShapeError, TooShortError,
                         UnsupportedError)
from bpse.metrics import measure_snr

P = StftParams()


def _wav_bytes(payload, channels=1, rate=16000, bits=16, tag=1, declared=None):
    block = channels * bits // 8
    fmt = struct.pack("<HHIIHH", tag, channels, rate, rate * block, block, bits)
    size = len(payload) if declared is None else declared
    body = b"fmt " + struct.pack("<I", 16) + fmt + b"data" + struct.pack("<I", size) + payload
    return b"RIFF" + struct.pack("<I", 4 + len(body)) + b"WAVE" + body


class TestWav:
    def test_pcm16_mono_one_second(self, tmp_path):
        p = tmp_path / "a.wav"
        p.write_bytes(_wav_bytes(np.zeros(16000, "<i2").tobytes()))
        w = read_wav(p)
        assert len(w) == 16000 and w.sample_rate_hz == 16000

    def test_pcm16_scaling(self, tmp_path):
        p = tmp_path / "a.wav"
        p.write_bytes(_wav_bytes(np.array([-32768, 16384, 32767], "<i2").tobytes()))
        np.testing.assert_array_equal(read_wav(p).samples, [-1.0, 0.5, 32767 / 32768])

    def test_stereo_downmix(self, tmp_path):
        left = np.array([1000, -2000, 300], "<i2")
        right = np.array([3000, 2000, -300], "<i2")
        inter = np.stack([left, right], axis=1).reshape(-1)
        p = tmp_path / "s.wav"
        p.write_bytes(_wav_bytes(inter.tobytes(), channels=2))
        expected = (left.astype(float) + right) / 2 / 32768
        np.testing.assert_allclose(read_wav(p).samples, expected)

    def test_truncated_raises(self, tmp_path):
        p = tmp_path / "t.wav"
        p.write_bytes(_wav_bytes(np.zeros(100, "<i2").tobytes(), declared=400))
        with pytest.raises(FormatError):
            read_wav(p)

    def test_not_riff(self, tmp_path):
        p = tmp_path / "x.wav"
        p.write_bytes(b"garbage" * 10)
        with pytest.raises(FormatError):
            read_wav(p)

    def test_unsupported_codec(self, tmp_path):
        p = tmp_path / "u.wav"
        p.write_bytes(_wav_bytes(b"\x00" * 24, bits=24, tag=1))
        with pytest.raises(UnsupportedError):
            read_wav(p)

    @pytest.mark.parametrize("codec,tol", [("float32", 1e-7), ("pcm16", 1 / 32768)])
    def test_round_trip(self, tmp_path, codec, tol):
        x = np.random.default_rng(0).uniform(-0.9, 0.9, 1000)
        write_wav(tmp_path / "r.wav", Waveform(x, 16000), codec=codec)
        y = read_wav(tmp_path / "r.wav")
        assert np.max(np.abs(y.samples - x)) <= tol

    def test_sphere(self, tmp_path):
        x = np.array([0, 100, -100, 32767], "<i2")
        header = b"NIST_1A\n   1024\nsample_count -i 4\nsample_rate -i 16000\nchannel_count -i 1\n" \
                 b"sample_n_bytes -i 2\nsample_byte_format -s2 01\nend_head\n"
        p = tmp_path / "t.wav"
        p.write_bytes(header.ljust(1024, b" ") + x.tobytes())
        np.testing.assert_allclose(read_wav(p).samples, x / 32768)


class TestStft:
    def test_frame_count_one_second(self):
        s = stft(Waveform(np.random.default_rng(0).standard_normal(16000)))
        assert s.frames.shape == (61, 257)

    @given(st.integers(512, 5000))
    @settings(max_examples=30, deadline=None)
    def test_frame_count_formula(self, n):
        s = stft(Waveform(np.ones(n)))
        assert s.n_frames == 1 + (n - 512) // 256

    def test_too_short(self):
        with pytest.raises(TooShortError):
            stft(Waveform(np.zeros(511)))

    def test_zero_input(self):
        assert not np.any(stft(Waveform(np.zeros(4000))).frames)

    def test_sine_peak_matches_direct_dft(self):
        fs = 16000
        x = np.sin(2 * np.pi * 1000 * np.arange(fs) / fs)
        s = stft(Waveform(x, fs))
        assert int(np.argmax(np.abs(s.frames).mean(axis=0))) == 32
        # direct DFT oracle on frame 3
        seg = x[3 * 256:3 * 256 + 512] * analysis_window(P)
        n = np.arange(512)
        direct = np.array([np.sum(seg * np.exp(-2j * np.pi * k * n / 512)) for k in range(257)])
        np.testing.assert_allclose(s.frames[3], direct, atol=1e-9)

    def test_round_trip(self):
        x = np.random.default_rng(1).standard_normal(16000)
        y = istft(stft(Waveform(x))).samples
        assert y.size == x.size
        assert np.max(np.abs(y[512:-512] - x[512:-512])) < 1e-6

    @given(st.integers(4 * 512, 6000), st.integers(0, 2**31 - 1))
    @settings(max_examples=20, deadline=None)
    def test_round_trip_property(self, n, seed):
        x = np.random.default_rng(seed).standard_normal(n)
        y = istft(stft(Waveform(x))).samples
        assert np.max(np.abs(y[512:n - 512] - x[512:n - 512])) < 1e-6

    def test_zero_spectrogram(self):
        s = ComplexSpectrogram(np.zeros((10, 257)), P, 3000)
        y = istft(s).samples
        assert y.size == 3000 and not np.any(y)

    def test_single_frame_locality(self):
        frames = np.zeros((10, 257), complex)
        frames[4] = np.random.default_rng(2).standard_normal(257)
        y = istft(ComplexSpectrogram(frames, P, 9 * 256 + 512)).samples
        nz = np.flatnonzero(y)
        assert nz.min() >= 4 * 256 and nz.max() < 4 * 256 + 512

    def test_parseval(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal(8000)
        s = stft(Waveform(x))
        weights = np.full(257, 2.0)
        weights[[0, -1]] = 1.0
        spec_energy = np.sum(np.abs(s.frames) ** 2 * weights) / 512
        frames = np.lib.stride_tricks.sliding_window_view(x, 512)[::256][:s.n_frames]
        sig_energy = np.sum((frames * analysis_window(P)) ** 2)
        assert abs(spec_energy - sig_energy) / sig_energy < 0.01


class TestFeatures:
    def test_zero_and_unit(self):
        frames = np.zeros((2, 257), complex)
        frames[1, 0] = math.e - 1
        f, _ = featurize(ComplexSpectrogram(frames, P, 768))
        assert f.values[0, 0] == 0.0
        assert f.values[1, 0] == pytest.approx(1.0, abs=1e-15)

    def test_inverse_values(self):
        vals = np.zeros((1, 257))
        vals[0, 1] = 1.0
        s = defeaturize(FeatureMatrix(vals, P), np.zeros((1, 257)))
        assert s.frames[0, 0] == 0
        assert s.frames[0, 1].real == pytest.approx(math.e - 1)

    def test_round_trip(self):
        rng = np.random.default_rng(4)
        s = stft(Waveform(rng.standard_normal(5000)))
        f, ph = featurize(s)
        back = defeaturize(f, ph, s.original_len)
        assert np.max(np.abs(np.abs(back.frames) - np.abs(s.frames))) < 1e-9
        f2, _ = featurize(back)
        assert np.max(np.abs(f2.values - f.values)) < 1e-9

    def test_nonnegative(self):
        f, _ = featurize(stft(Waveform(np.random.default_rng(5).standard_normal(3000))))
        assert np.all(f.values >= 0)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            defeaturize(FeatureMatrix(np.zeros((3, 257)), P), np.zeros((2, 257)))


class TestMixing:
    def test_equal_power_zero_db_alpha_one(self):
        rng = np.random.default_rng(6)
        c = rng.standard_normal(1000)
        n = rng.standard_normal(1000)
        n *= np.sqrt(np.mean(c ** 2) / np.mean(n ** 2))
        out = mix_at_snr(Waveform(c), Waveform(n), 0.0, offset=0)
        np.testing.assert_allclose(out.samples, c + n, atol=1e-12)

    def test_infinite_snr_passthrough(self):
        c = np.random.default_rng(7).standard_normal(100)
        out = mix_at_snr(Waveform(c), Waveform(np.ones(100)), math.inf)
        np.testing.assert_array_equal(out.samples, c)

    @pytest.mark.parametrize("snr", [-5, 0, 5, 10, 15])
    def test_measured_snr(self, snr):
        rng = np.random.default_rng(snr + 100)
        c = Waveform(rng.standard_normal(3000))
        n = Waveform(rng.standard_normal(5000))
        out = mix_at_snr(c, n, snr, rng=rng)
        added = out.samples - c.samples
        measured = 10 * np.log10(np.mean(c.samples ** 2) / np.mean(added ** 2))
        assert abs(measured - snr) <= 0.01
        assert abs(measure_snr(c, out) - snr) <= 0.01

    def test_degenerate(self):
        with pytest.raises(DegenerateSignalError):
            mix_at_snr(Waveform(np.zeros(10)), Waveform(np.ones(10)), 0)
        with pytest.raises(DegenerateSignalError):
            mix_at_snr(Waveform(np.ones(10)), Waveform(np.zeros(10)), 0)

    def test_noise_too_short_and_rate_mismatch(self):
        with pytest.raises(ConfigError):
            mix_at_snr(Waveform(np.ones(10)), Waveform(np.ones(5)), 0)
        with pytest.raises(ConfigError):
            mix_at_snr(Waveform(np.ones(10), 16000), Waveform(np.ones(10), 8000), 0)

    def test_offset_respected(self):
        noise = Waveform(np.arange(1, 21, dtype=float))
        out = mix_at_snr(Waveform(np.ones(5)), noise, 0.0, offset=7)
        added = out.samples - 1.0
        np.testing.assert_allclose(added / added[0], np.arange(8, 13) / 8.0)


class TestCorpus:
    def test_determinism(self):
        a = generate_corpus(MiniCorpusSpec(n_utterances=5, seed=7))
        b = generate_corpus(MiniCorpusSpec(n_utterances=5, seed=7))
        for u, v in zip(a, b):
            assert u.uid == v.uid and u.segments == v.segments
            assert u.wave.samples.tobytes() == v.wave.samples.tobytes()

    def test_silence_only(self):
        spec = MiniCorpusSpec(n_utterances=3, phone_classes=(SegmentTemplate("sil", "silence"),), seed=1)
        for u in generate_corpus(spec):
            assert set(u.frame_labels()) == {"sil"}
            assert not np.any(u.wave.samples)

    def test_every_class_appears(self):
        corpus = generate_corpus(MiniCorpusSpec(n_utterances=100, seed=3))
        labels = {lab for u in corpus for _, _, lab in u.segments}
        assert labels == {t.label for t in default_templates()}
        kinds = {t.kind for t in default_templates() if t.label in labels}
        assert len(kinds) == 5

    def test_empty_templates(self):
        with pytest.raises(ConfigError):
            generate_corpus(MiniCorpusSpec(n_utterances=1, phone_classes=()))

    def test_frame_labels_follow_centres(self):
        segs = [(0, 300, "a"), (300, 700, "b"), (700, 2000, "c")]
        labels = frame_labels(segs, 2000, P)
        # centres: 256, 512, 768, 1024, 1280
        assert labels == ["a", "b", "c", "c", "c", "c"][:P.n_frames(2000)]

    def test_segments_tile_waveform(self):
        for u in generate_corpus(MiniCorpusSpec(n_utterances=10, seed=11)):
            assert u.segments[0][0] == 0 and u.segments[-1][1] == len(u.wave)
            for (a0, a1, _), (b0, _, _) in zip(u.segments, u.segments[1:]):
                assert a1 == b0

    @pytest.mark.parametrize("kind", sorted(NOISE_KINDS))
    def test_noise_kinds(self, kind):
        w = make_noise(kind, 0, duration_s=1.0)
        assert len(w) == 16000
        assert np.sqrt(np.mean(w.samples ** 2)) == pytest.approx(0.05)
