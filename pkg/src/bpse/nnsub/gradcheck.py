"""Finite-difference verification of the analytic gradients of every layer kind."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .layers import LayerSpec, build_layer
from .tensor import Tensor

GRAD_KINDS = ("dense", "conv1d_causal", "layernorm", "mhsa_causal", "relu", "leaky_relu", "sigmoid",
              "mae", "mse", "cross_entropy")
REL_FLOOR = 1e-6


@dataclass
class GradCheckReport:
    kind: str
    trials: int
    worst_rel_error: float
    per_tensor: dict[str, float] = field(default_factory=dict)
    shapes: list[tuple] = field(default_factory=list)

    def passed(self, tol: float = 1e-4) -> bool:
        return self.worst_rel_error < tol


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = REL_FLOOR) -> float:
    """max_i |a_i - n_i| / max(|a_i|, |n_i|, floor)."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def finite_difference(f, arr: np.ndarray, h: float = 1e-5) -> np.ndarray:
    grad = np.zeros_like(arr)
    flat, gflat = arr.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        fp = f()
        flat[i] = old - h
        fm = f()
        flat[i] = old
        gflat[i] = (fp - fm) / (2 * h)
    return grad


def _away_from_kink(rng, shape, margin=0.05):
    x = rng.standard_normal(shape)
    small = np.abs(x) < margin
    x[small] = np.sign(x[small] + 1e-12) * (margin + rng.uniform(0, 1, small.sum()))
    return x


def _case(kind: str, rng):
    """Return (module-or-None, input array, loss function of the output Tensor)."""
    batched = bool(rng.integers(2))
    n = int(rng.integers(1, 6))
    lead = (int(rng.integers(1, 3)), n) if batched else (n,)
    if kind == "dense":
        i, o = int(rng.integers(1, 6)), int(rng.integers(1, 6))
        layer = build_layer(LayerSpec("dense", {"in_dim": i, "out_dim": o}), rng)
        x = rng.standard_normal(lead + (i,))
    elif kind == "conv1d_causal":
        i, o, k = int(rng.integers(1, 5)), int(rng.integers(1, 5)), int(rng.integers(1, 4))
        layer = build_layer(LayerSpec("conv1d_causal", {"in_ch": i, "out_ch": o, "kernel": k}), rng)
        x = rng.standard_normal(lead + (i,))
    elif kind == "layernorm":
        d = int(rng.integers(2, 7))
        layer = build_layer(LayerSpec("layernorm", {"dim": d}), rng)
        layer.gain.data = rng.uniform(0.5, 1.5, d)
        layer.bias.data = rng.standard_normal(d)
        x = rng.standard_normal(lead + (d,))
    elif kind == "mhsa_causal":
        heads, hd = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        layer = build_layer(LayerSpec("mhsa_causal", {"heads": heads, "head_dim": hd}), rng)
        x = rng.standard_normal(lead + (heads * hd,))
    elif kind in ("relu", "leaky_relu", "sigmoid"):
        layer = build_layer(LayerSpec(kind, {}), rng)
        x = _away_from_kink(rng, lead + (int(rng.integers(1, 6)),))
    else:
        layer = None
        x = rng.standard_normal(lead + (int(rng.integers(2, 6)),))

    proj = rng.standard_normal
    if kind == "mae":
        target = x - _away_from_kink(rng, x.shape)
        return None, x, lambda out: T.mae_loss(out, target)
    if kind == "mse":
        target = rng.standard_normal(x.shape)
        return None, x, lambda out: T.mse_loss(out, target)
    if kind == "cross_entropy":
        labels = rng.integers(0, x.shape[-1], size=x.shape[:-1])
        return None, x, lambda out: T.cross_entropy(out, labels)
    weights = {}

    def loss(out):
        if "r" not in weights:
            weights["r"] = proj(out.shape)
        return T.sum_(T.mul(out, weights["r"]))
    return layer, x, loss


def grad_check(kind: str, trials: int = 10, seed: int = 0, h: float = 1e-5) -> GradCheckReport:
    """Compare analytic and central-difference gradients for ``trials`` random shapes."""
    if kind not in GRAD_KINDS:
        raise ValueError(f"unknown kind {kind!r}")
    rng = np.random.default_rng(seed)
    report = GradCheckReport(kind, trials, 0.0)
    for _ in range(max(1, trials)):
        layer, x_arr, loss_fn = _case(kind, rng)
        x = Tensor(x_arr, requires_grad=True)
        params = layer.named_parameters() if layer is not None else {}

        def run():
            out = layer(x) if layer is not None else x
            return loss_fn(out)

        loss = run()
        T.backward(loss)
        tensors = dict(params, input=x)
        for name, t in tensors.items():
            analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
            with T.no_grad():
                numeric = finite_difference(lambda: float(run().data), t.data, h)
            err = relative_error(analytic, numeric)
            report.per_tensor[name] = max(report.per_tensor.get(name, 0.0), err)
            report.worst_rel_error = max(report.worst_rel_error, err)
        report.shapes.append(x_arr.shape)
    return report
