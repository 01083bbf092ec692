"""Acoustic model posteriorgrams, their autoencoder bottleneck and the one-hot ground-truth pathway."""
from .ae import AeConfig, AutoEncoder, encode_bppg, train_ae
from .am import AcousticModel, AmConfig, evaluate_am, frame_loss, posteriorgram, stack_context, train_am
from .posteriorgram import Posteriorgram, one_hot_posteriorgram

__all__ = [
    "AcousticModel", "AeConfig", "AmConfig", "AutoEncoder", "Posteriorgram", "encode_bppg", "evaluate_am",
    "frame_loss", "one_hot_posteriorgram", "posteriorgram", "stack_context", "train_ae", "train_am",
]
