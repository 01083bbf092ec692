"""Differentiable layers built from :mod:`bpse.nnsub.tensor` ops.

Sequence layers take ``(T, D)`` or batched ``(B, T, D)`` input. All weights are
initialised uniformly in ±sqrt(1/fan_in) from a caller-supplied generator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ShapeError
from . import tensor as T
from .tensor import Tensor


def _uniform(rng, shape, fan_in, dtype):
    bound = math.sqrt(1.0 / fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape).astype(dtype), requires_grad=True)


class Module:
    """Parameter container. Parameter names follow attribute order, so they are stable."""

    training = True

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for name, val in vars(self).items():
            key = f"{prefix}{name}"
            if isinstance(val, Tensor) and val.requires_grad:
                out[key] = val
            elif isinstance(val, Module):
                out.update(val.named_parameters(key + "."))
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        out.update(item.named_parameters(f"{key}.{i}."))
        return out

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.named_parameters().items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = self.named_parameters()
        missing = set(params) - set(state)
        extra = set(state) - set(params)
        if missing or extra:
            raise ShapeError(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for k, p in params.items():
            if p.data.shape != state[k].shape:
                raise ShapeError(f"{k}: expected shape {p.data.shape}, got {state[k].shape}")
            p.data = np.array(state[k], dtype=p.data.dtype)

    def __call__(self, x):
        return self.forward(x)

    def forward(self, x):
        raise NotImplementedError


class Dense(Module):
    def __init__(self, in_dim: int, out_dim: int, rng, dtype=np.float64):
        self.weight = _uniform(rng, (in_dim, out_dim), in_dim, dtype)
        self.bias = _uniform(rng, (out_dim,), in_dim, dtype)

    def forward(self, x):
        return T.linear(x, self.weight, self.bias)


class CausalConv1d(Module):
    """1-D convolution over time, stride 1, left-padded with k-1 zero frames.

    Output frame t depends on input frames t-k+1 .. t only.
    """

    def __init__(self, in_ch: int, out_ch: int, kernel: int, rng, dtype=np.float64):
        if kernel < 1:
            raise ConfigError("kernel must be >= 1")
        self.kernel = kernel
        self.in_ch = in_ch
        # rows ordered (tap, in_channel); tap k-1 multiplies the current frame
        self.weight = _uniform(rng, (kernel * in_ch, out_ch), kernel * in_ch, dtype)
        self.bias = _uniform(rng, (out_ch,), kernel * in_ch, dtype)

    def forward(self, x):
        if x.shape[-1] != self.in_ch:
            raise ShapeError(f"conv expects {self.in_ch} input channels, got {x.shape[-1]}")
        n = x.shape[-2]
        xp = T.pad_time_left(x, self.kernel - 1)
        taps = [xp[..., j:j + n, :] for j in range(self.kernel)]
        cols = taps[0] if self.kernel == 1 else T.concat(taps, axis=-1)
        return T.linear(cols, self.weight, self.bias)


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5, dtype=np.float64):
        self.eps = eps
        self.gain = Tensor(np.ones(dim, dtype=dtype), requires_grad=True)
        self.bias = Tensor(np.zeros(dim, dtype=dtype), requires_grad=True)

    def normalize(self, x):
        mu = T.mean(x, axis=-1, keepdims=True)
        xc = x - mu
        var = T.mean(xc * xc, axis=-1, keepdims=True)
        return xc * T.power(var + self.eps, -0.5)

    def forward(self, x):
        return self.normalize(x) * self.gain + self.bias


class CausalSelfAttention(Module):
    """Multi-head self-attention; position t attends to positions <= t only."""

    def __init__(self, model_dim: int, heads: int, head_dim: int, rng, dtype=np.float64):
        if heads * head_dim != model_dim:
            raise ConfigError(f"heads*head_dim = {heads * head_dim} must equal model_dim {model_dim}")
        self.heads, self.head_dim = heads, head_dim
        self.q = Dense(model_dim, model_dim, rng, dtype)
        self.k = Dense(model_dim, model_dim, rng, dtype)
        self.v = Dense(model_dim, model_dim, rng, dtype)
        self.out = Dense(model_dim, model_dim, rng, dtype)

    def _split(self, x, b, n):
        return T.transpose(T.reshape(x, (b, n, self.heads, self.head_dim)), (0, 2, 1, 3))

    def attention_weights(self, x):
        x3 = x if x.ndim == 3 else T.reshape(x, (1,) + x.shape)
        b, n, _ = x3.shape
        q = self._split(self.q(x3), b, n)
        k = self._split(self.k(x3), b, n)
        scores = T.matmul(q, T.transpose(k, (0, 1, 3, 2))) * (1.0 / math.sqrt(self.head_dim))
        future = np.triu(np.ones((n, n), dtype=bool), k=1)
        return T.softmax(scores, axis=-1, mask=future)

    def forward(self, x):
        squeeze = x.ndim == 2
        x3 = T.reshape(x, (1,) + x.shape) if squeeze else x
        b, n, d = x3.shape
        attn = self.attention_weights(x3)
        v = self._split(self.v(x3), b, n)
        ctx = T.reshape(T.transpose(T.matmul(attn, v), (0, 2, 1, 3)), (b, n, d))
        y = self.out(ctx)
        return T.reshape(y, (n, d)) if squeeze else y


class ReLU(Module):
    def forward(self, x):
        return T.relu(x)


class LeakyReLU(Module):
    def __init__(self, slope: float = 0.01):
        self.slope = slope

    def forward(self, x):
        return T.leaky_relu(x, self.slope)


class Sigmoid(Module):
    def forward(self, x):
        return T.sigmoid(x)


class Sequential(Module):
    def __init__(self, *layers):
        self.layers = list(layers)

    def forward(self, x):
        for layer in self.layers:
            x = layer(x)
        return x


LAYER_KINDS = ("dense", "conv1d_causal", "layernorm", "mhsa_causal", "relu", "leaky_relu", "sigmoid")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ConfigError(f"unknown layer kind {self.kind!r}")


def build_layer(spec: LayerSpec, rng, dtype=np.float64) -> Module:
    p = spec.params
    try:
        if spec.kind == "dense":
            return Dense(p["in_dim"], p["out_dim"], rng, dtype)
        if spec.kind == "conv1d_causal":
            if p.get("stride", 1) != 1:
                raise ConfigError("only stride 1 is supported for causal convolution")
            return CausalConv1d(p["in_ch"], p["out_ch"], p.get("kernel", 3), rng, dtype)
        if spec.kind == "layernorm":
            return LayerNorm(p["dim"], p.get("eps", 1e-5), dtype)
        if spec.kind == "mhsa_causal":
            width = p.get("model_dim", p["heads"] * p["head_dim"])
            return CausalSelfAttention(width, p["heads"], p["head_dim"], rng, dtype)
        if spec.kind == "relu":
            return ReLU()
        if spec.kind == "leaky_relu":
            return LeakyReLU(p.get("slope", 0.01))
        return Sigmoid()
    except KeyError as exc:
        raise ConfigError(f"{spec.kind} layer needs parameter {exc}") from None


def forward(layer: Module, x) -> Tensor:
    return layer(T.as_tensor(x))
