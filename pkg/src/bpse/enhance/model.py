"""Causal Transformer spectral-mapping network.

Layout: causal conv stack (in place of positional encoding) -> linear bridge
to the attention width -> N post-norm blocks of masked self-attention and a
feed-forward layer, each with a residual -> linear + ReLU to 257 bins.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import ConfigError, FormatError, ShapeError
from ..nnsub import (CausalConv1d, CausalSelfAttention, Dense, LayerNorm, LeakyReLU, Module, Tensor,
                     checkpoint_bytes, load_checkpoint, no_grad, ops, save_checkpoint)

PRESETS = ("paper", "desk")


@dataclass
class SeConfig:
    conv_channels: list[int] = field(default_factory=lambda: [1024, 512, 256, 128])
    conv_kernel: int = 3
    conv_stride: int = 1
    n_blocks: int = 8
    heads: int = 8
    head_dim: int = 64
    model_dim: int = 512
    ff_dims: list[int] = field(default_factory=lambda: [512])
    feature_dim: int = 257
    cond_dim: int = 96
    segment_frames: int = 64
    segment_hop: int = 0  # 0 = non-overlapping
    batch_segments: int = 8
    epochs: int = 100
    patience: int = 5
    lr: float = 3e-4
    clip_norm: float = 5.0
    lr_schedule: str = "constant"  # or "cosine": decays to 0 over the epoch budget
    norm_position: str = "post"
    seed: int = 0
    dtype: str = "float64"
    preset: str = "paper"

    def __post_init__(self):
        self.conv_channels = list(self.conv_channels)
        self.ff_dims = list(self.ff_dims)
        if self.heads * self.head_dim != self.model_dim:
            raise ConfigError(f"heads*head_dim = {self.heads * self.head_dim} must equal model_dim "
                              f"{self.model_dim}")
        if self.conv_stride != 1:
            raise ConfigError("causal conv layers require stride 1")
        if self.segment_frames < 1:
            raise ConfigError("segment_frames must be >= 1")
        if self.segment_hop < 0 or self.batch_segments < 1 or self.n_blocks < 0:
            raise ConfigError("segment_hop, batch_segments and n_blocks must be non-negative")
        if self.feature_dim < 1 or self.cond_dim < 0 or not self.conv_channels:
            raise ConfigError("feature_dim must be positive and at least one conv layer is required")
        if any(c <= 0 for c in self.conv_channels + self.ff_dims) or self.conv_kernel < 1:
            raise ConfigError("layer widths and kernel size must be positive")
        if self.lr_schedule not in ("constant", "cosine"):
            raise ConfigError("lr_schedule must be 'constant' or 'cosine'")
        if self.norm_position not in ("pre", "post"):
            raise ConfigError("norm_position must be 'pre' or 'post'")
        if self.preset not in PRESETS:
            raise ConfigError(f"preset must be one of {PRESETS}")

    @classmethod
    def paper(cls, **overrides) -> "SeConfig":
        return cls(**{"preset": "paper", **overrides})

    @classmethod
    def desk(cls, **overrides) -> "SeConfig":
        base = dict(conv_channels=[128, 96, 64, 64], n_blocks=4, heads=4, head_dim=32, model_dim=128,
                    ff_dims=[128], dtype="float32", preset="desk")
        return cls(**{**base, **overrides})

    @classmethod
    def from_preset(cls, name: str, **overrides) -> "SeConfig":
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}; choose from {PRESETS}")
        return getattr(cls, name)(**overrides)

    def input_dim(self, conditioned: bool) -> int:
        return self.feature_dim + (self.cond_dim if conditioned else 0)


class AttentionBlock(Module):
    """Post-norm: x -> LN(x + MHSA(x)) -> LN(h + FF(h)). Pre-norm: x + MHSA(LN(x)), then h + FF(LN(h))."""

    def __init__(self, cfg: SeConfig, rng, dtype):
        d = cfg.model_dim
        self.attn = CausalSelfAttention(d, cfg.heads, cfg.head_dim, rng, dtype)
        self.norm1 = LayerNorm(d, dtype=dtype)
        dims = [d] + cfg.ff_dims + [d]
        self.ff = [Dense(a, b, rng, dtype) for a, b in zip(dims[:-1], dims[1:])]
        self.act = LeakyReLU()
        self.norm2 = LayerNorm(d, dtype=dtype)
        self.pre = cfg.norm_position == "pre"

    def _ff(self, y):
        for i, layer in enumerate(self.ff):
            y = layer(y)
            if i < len(self.ff) - 1:
                y = self.act(y)
        return y

    def forward(self, x):
        if self.pre:
            h = x + self.attn(self.norm1(x))
            return h + self._ff(self.norm2(h))
        h = self.norm1(x + self.attn(x))
        return self.norm2(h + self._ff(h))


class SeModel(Module):
    def __init__(self, cfg: SeConfig, conditioned: bool, rng):
        self.cfg = cfg
        self.conditioned = bool(conditioned)
        dt = np.dtype(cfg.dtype)
        chans = [cfg.input_dim(self.conditioned)] + cfg.conv_channels
        self.convs = [CausalConv1d(a, b, cfg.conv_kernel, rng, dt) for a, b in zip(chans[:-1], chans[1:])]
        self.act = LeakyReLU()
        self.bridge = Dense(chans[-1], cfg.model_dim, rng, dt)
        self.blocks = [AttentionBlock(cfg, rng, dt) for _ in range(cfg.n_blocks)]
        self.head = Dense(cfg.model_dim, cfg.feature_dim, rng, dt)
        self.in_mean = np.zeros(cfg.feature_dim)
        self.in_std = np.ones(cfg.feature_dim)

    @property
    def input_dim(self) -> int:
        return self.cfg.input_dim(self.conditioned)

    def prepare_inputs(self, noisy: np.ndarray, latent: np.ndarray | None = None) -> np.ndarray:
        """Normalise noisy log1p frames and append the latent when the model is conditioned."""
        noisy = np.asarray(noisy)
        if noisy.shape[-1] != self.cfg.feature_dim:
            raise ShapeError(f"expected {self.cfg.feature_dim} feature bins, got {noisy.shape[-1]}")
        z = (noisy - self.in_mean) / self.in_std
        if self.conditioned:
            if latent is None:
                raise ShapeError("conditioned model needs latent features")
            latent = np.asarray(latent)
            if latent.shape != noisy.shape[:-1] + (self.cfg.cond_dim,):
                raise ShapeError(f"latent shape {latent.shape} does not pair with features {noisy.shape}")
            z = np.concatenate([z, latent], axis=-1)
        return z.astype(self.cfg.dtype)

    def forward(self, x):
        if x.shape[-1] != self.input_dim:
            raise ShapeError(f"SE model expects {self.input_dim} input channels, got {x.shape[-1]}")
        for conv in self.convs:
            x = self.act(conv(x))
        x = self.bridge(x)
        for block in self.blocks:
            x = block(x)
        return ops.relu(self.head(x))

    def predict(self, noisy: np.ndarray, latent: np.ndarray | None = None) -> np.ndarray:
        """Enhanced log1p frames for a whole utterance (T, 257)."""
        with no_grad():
            return self.forward(Tensor(self.prepare_inputs(noisy, latent))).data.astype(np.float64)

    def _payload(self):
        params = self.state_dict()
        params["norm.mean"] = np.asarray(self.in_mean, dtype=np.float64)
        params["norm.std"] = np.asarray(self.in_std, dtype=np.float64)
        return params, {"kind": "se_model", "conditioned": self.conditioned, "config": asdict(self.cfg)}

    def to_bytes(self) -> bytes:
        params, header = self._payload()
        return checkpoint_bytes(params, header)

    def save(self, path) -> None:
        params, header = self._payload()
        save_checkpoint(path, params, header)

    @classmethod
    def load(cls, path) -> "SeModel":
        header, params = load_checkpoint(path)
        if header.get("kind") != "se_model":
            raise FormatError(f"{path} is not an SE model checkpoint")
        model = cls(SeConfig(**header["config"]), header["conditioned"], np.random.default_rng(0))
        model.in_mean = params.pop("norm.mean")
        model.in_std = params.pop("norm.std")
        model.load_state_dict(params)
        return model


def build_se_model(cfg: SeConfig, conditioned: bool = False, seed: int | None = None) -> SeModel:
    """Fresh model with seeded initialisation (``seed`` defaults to ``cfg.seed``)."""
    return SeModel(cfg, conditioned, np.random.default_rng(cfg.seed if seed is None else seed))
