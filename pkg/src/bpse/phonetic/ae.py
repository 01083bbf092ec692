"""Autoencoder that compresses posteriorgram rows into a 96-dim sigmoid bottleneck."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import ConfigError, FormatError, ShapeError
from ..nnsub import (Adam, Dense, LeakyReLU, Module, Sequential, Sigmoid, Tensor, backward, load_checkpoint,
                     no_grad, ops, save_checkpoint)
from .posteriorgram import Posteriorgram


@dataclass
class AeConfig:
    input_dim: int
    encoder_dims: list[int] = field(default_factory=lambda: [512, 256, 96])
    latent_activation: str = "sigmoid"
    epochs: int = 30
    batch_frames: int = 256
    lr: float = 1e-3
    seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        self.encoder_dims = list(self.encoder_dims)
        if self.input_dim < 1 or not self.encoder_dims or any(w <= 0 for w in self.encoder_dims):
            raise ConfigError("autoencoder widths must be positive")
        if self.latent_activation != "sigmoid":
            raise ConfigError("only a sigmoid latent is supported")

    @property
    def latent_dim(self) -> int:
        return self.encoder_dims[-1]


class AutoEncoder(Module):
    """Encoder ``C -> 512 -> 256 -> 96`` (sigmoid latent); the decoder mirrors it."""

    def __init__(self, cfg: AeConfig, rng=None):
        self.cfg = cfg
        rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        dt = np.dtype(cfg.dtype)
        dims = [cfg.input_dim] + cfg.encoder_dims
        enc = []
        for a, b in zip(dims[:-1], dims[1:]):
            enc += [Dense(a, b, rng, dt), LeakyReLU()]
        enc[-1] = Sigmoid()
        rev = dims[::-1]
        dec = []
        for a, b in zip(rev[:-1], rev[1:]):
            dec += [Dense(a, b, rng, dt), LeakyReLU()]
        dec.pop()
        self.encoder = Sequential(*enc)
        self.decoder = Sequential(*dec)

    def forward(self, x):
        return self.decoder(self.encoder(x))

    def encode(self, rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows)
        if rows.ndim != 2 or rows.shape[1] != self.cfg.input_dim:
            raise ShapeError(f"autoencoder expects (T, {self.cfg.input_dim}) rows, got {rows.shape}")
        with no_grad():
            return self.encoder(Tensor(rows.astype(self.cfg.dtype))).data.astype(np.float64)

    def reconstruct(self, rows: np.ndarray) -> np.ndarray:
        with no_grad():
            return self.forward(Tensor(np.asarray(rows, dtype=self.cfg.dtype))).data.astype(np.float64)

    def save(self, path) -> None:
        save_checkpoint(path, self.state_dict(), {"kind": "autoencoder", "config": asdict(self.cfg)})

    @classmethod
    def load(cls, path) -> "AutoEncoder":
        header, params = load_checkpoint(path)
        if header.get("kind") != "autoencoder":
            raise FormatError(f"{path} is not an autoencoder checkpoint")
        model = cls(AeConfig(**header["config"]))
        model.load_state_dict(params)
        return model


def _rows(posteriorgrams) -> np.ndarray:
    if isinstance(posteriorgrams, Posteriorgram):
        return posteriorgrams.values
    if isinstance(posteriorgrams, np.ndarray):
        return posteriorgrams
    return np.concatenate([getattr(p, "values", p) for p in posteriorgrams])


def train_ae(posteriorgrams, cfg: AeConfig):
    """Minimise the mean squared reconstruction error of posterior rows.

    Returns ``(model, history)`` with history rows ``(epoch, train_mse, None)``.
    """
    x = _rows(posteriorgrams).astype(cfg.dtype)
    if x.ndim != 2 or (x.size and x.shape[1] != cfg.input_dim):
        raise ShapeError(f"expected rows of width {cfg.input_dim}, got {x.shape}")
    rng = np.random.default_rng(cfg.seed)
    model = AutoEncoder(cfg, rng)
    opt = Adam(model.named_parameters(), lr=cfg.lr)
    history = []
    n = x.shape[0]
    for epoch in range(1, cfg.epochs + 1):
        if n == 0:
            break
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_frames):
            batch = x[order[start:start + cfg.batch_frames]]
            opt.zero_grad()
            loss = ops.mse_loss(model(Tensor(batch)), batch)
            backward(loss)
            opt.step()
            total += float(loss.data) * batch.shape[0]
        history.append((epoch, total / n, None))
    return model, history


def encode_bppg(ae: AutoEncoder, pg) -> np.ndarray:
    """Per-frame latent features, shape (T, latent_dim)."""
    return ae.encode(getattr(pg, "values", pg))
