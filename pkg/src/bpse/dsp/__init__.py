"""Audio I/O, STFT analysis/synthesis, log1p features, SNR mixing and the synthetic corpus."""
from .corpus import (DEFAULT_TEST_NOISES, DEFAULT_TRAIN_NOISES, MiniCorpusSpec, SegmentTemplate,
                     Utterance, default_templates, frame_labels, generate_corpus, make_noise,
                     read_corpus_manifest, write_corpus_manifest)
from .mixing import DEFAULT_TEST_SNRS, crop_noise, default_train_snrs, mix_at_snr
from .stft import analysis_window, defeaturize, featurize, istft, log1p_features, stft
from .types import ComplexSpectrogram, FeatureMatrix, StftParams, Waveform
from .wavio import read_wav, write_wav

__all__ = [
    "ComplexSpectrogram", "DEFAULT_TEST_NOISES", "DEFAULT_TEST_SNRS", "DEFAULT_TRAIN_NOISES",
    "FeatureMatrix", "MiniCorpusSpec", "SegmentTemplate", "StftParams", "Utterance", "Waveform",
    "analysis_window", "crop_noise", "default_templates", "default_train_snrs", "defeaturize",
    "featurize", "frame_labels", "generate_corpus", "istft", "log1p_features", "make_noise",
    "mix_at_snr", "read_corpus_manifest", "read_wav", "stft", "write_corpus_manifest", "write_wav",
]
