from __future__ import annotations

import numpy as np

from ..dsp import FeatureMatrix, Waveform, defeaturize, featurize, istft, stft
from ..errors import AlignmentError, ConfigError, UsageError
from ..phonetic import AcousticModel, AutoEncoder, encode_bppg, one_hot_posteriorgram, posteriorgram
from .model import SeModel


class PredictedBppg:
    """Latent features from acoustic-model posteriors passed through the AE encoder."""

    def __init__(self, am: AcousticModel, ae: AutoEncoder):
        if ae.cfg.input_dim != am.cfg.classes:
            raise ConfigError(f"AE expects {ae.cfg.input_dim} classes, AM produces {am.cfg.classes}")
        self.am, self.ae = am, ae

    def __call__(self, features: FeatureMatrix) -> np.ndarray:
        return encode_bppg(self.ae, posteriorgram(self.am, features))


class GroundTruthBppg:
    """Latent features from one-hot reference labels (the oracle upper bound)."""

    def __init__(self, ae: AutoEncoder, labels):
        self.ae = ae
        self.labels = np.asarray(labels, dtype=np.int64)

    def __call__(self, features: FeatureMatrix) -> np.ndarray:
        if features.n_frames != self.labels.size:
            raise AlignmentError(f"{self.labels.size} labels for {features.n_frames} frames")
        return encode_bppg(self.ae, one_hot_posteriorgram(self.labels, self.ae.cfg.input_dim))


def enhance_features(model: SeModel, features: FeatureMatrix, bppg_provider=None) -> FeatureMatrix:
    if model.conditioned and bppg_provider is None:
        raise UsageError("this model is BPPG-conditioned; supply a bppg_provider")
    latent = bppg_provider(features) if model.conditioned else None
    return FeatureMatrix(model.predict(features.values, latent), features.params)


def enhance_utterance(model: SeModel, noisy: Waveform, bppg_provider=None) -> Waveform:
    """Noisy waveform -> enhanced waveform of the same length, reusing the noisy phase."""
    if model.conditioned and bppg_provider is None:
        raise UsageError("this model is BPPG-conditioned; supply a bppg_provider")
    spec = stft(noisy)
    feats, phase = featurize(spec)
    enhanced = enhance_features(model, feats, bppg_provider)
    return istft(defeaturize(enhanced, phase, len(noisy)), noisy.sample_rate_hz)
