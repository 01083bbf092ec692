"""Minimal numpy neural substrate: autodiff tensors, layers, Adam, checkpoints, gradient checks."""
from . import tensor as ops
from .checkpoint import checkpoint_bytes, history_csv, load_checkpoint, parse_checkpoint, save_checkpoint
from .gradcheck import GRAD_KINDS, GradCheckReport, finite_difference, grad_check, relative_error
from .layers import (LAYER_KINDS, CausalConv1d, CausalSelfAttention, Dense, LayerNorm, LayerSpec,
                     LeakyReLU, Module, ReLU, Sequential, Sigmoid, build_layer, forward)
from .optim import Adam, AdamState, adam_step
from .tensor import Tensor, backward, no_grad

__all__ = [
    "Adam", "AdamState", "CausalConv1d", "CausalSelfAttention", "Dense", "GRAD_KINDS",
    "GradCheckReport", "LAYER_KINDS", "LayerNorm", "LayerSpec", "LeakyReLU", "Module", "ReLU",
    "Sequential", "Sigmoid", "Tensor", "adam_step", "backward", "build_layer", "checkpoint_bytes",
    "finite_difference", "forward", "grad_check", "history_csv", "load_checkpoint", "no_grad", "ops",
    "parse_checkpoint", "relative_error", "save_checkpoint",
]
