"""Causal Transformer speech enhancement: model, training loop and waveform pipeline."""
from .model import PRESETS, AttentionBlock, SeConfig, SeModel, build_se_model
from .pipeline import GroundTruthBppg, PredictedBppg, enhance_features, enhance_utterance
from .train import SePair, segment_starts, train_se, validation_mae

__all__ = [
    "AttentionBlock", "GroundTruthBppg", "PRESETS", "PredictedBppg", "SePair", "SeConfig", "SeModel",
    "build_se_model", "enhance_features", "enhance_utterance", "segment_starts", "train_se",
    "validation_mae",
]
