from __future__ import annotations

import json
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigError, NumericsError, ShapeError
from ..nnsub import Adam, Tensor, backward, ops
from ..nnsub.tensor import unchecked
from .model import SeConfig, SeModel


@dataclass
class SePair:
    """One training utterance: noisy and clean log1p frames, plus the latent when conditioning."""

    noisy: np.ndarray
    clean: np.ndarray
    latent: np.ndarray | None = None

    def __post_init__(self):
        if self.noisy.shape != self.clean.shape:
            raise ShapeError(f"noisy {self.noisy.shape} and clean {self.clean.shape} frames are not aligned")
        if self.latent is not None and self.latent.shape[0] != self.noisy.shape[0]:
            raise ShapeError("latent frames do not align with the noisy frames")


def segment_starts(n_frames: int, seg: int, hop: int) -> list[tuple[int, int]]:
    """(start, end) spans covering every frame; the last span may be shorter than ``seg``."""
    spans = [(s, s + seg) for s in range(0, max(n_frames - seg, 0) + 1, hop) if s + seg <= n_frames]
    tail = spans[-1][0] + hop if spans else 0
    if tail < n_frames and (not spans or spans[-1][1] < n_frames):
        spans.append((tail, n_frames))
    return spans


def _segments(model: SeModel, pairs, cfg: SeConfig) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Training segments grouped by length, so batches never need padding."""
    hop = cfg.segment_hop or cfg.segment_frames
    groups: dict[int, tuple[list, list]] = {}
    for p in pairs:
        x = model.prepare_inputs(p.noisy, p.latent)
        y = p.clean.astype(x.dtype)
        for s, e in segment_starts(x.shape[0], cfg.segment_frames, hop):
            xs, ys = groups.setdefault(e - s, ([], []))
            xs.append(x[s:e])
            ys.append(y[s:e])
    return {n: (np.stack(xs), np.stack(ys)) for n, (xs, ys) in sorted(groups.items())}


def _batches(groups, batch: int, rng) -> list[tuple[int, np.ndarray]]:
    out = []
    for n, (xs, _) in groups.items():
        order = rng.permutation(len(xs))
        out += [(n, order[i:i + batch]) for i in range(0, len(xs), batch)]
    return [out[i] for i in rng.permutation(len(out))]


def validation_mae(model: SeModel, pairs) -> float:
    total, count = 0.0, 0
    for p in pairs:
        pred = model.predict(p.noisy, p.latent)
        total += float(np.abs(pred - p.clean).sum())
        count += p.clean.size
    return total / max(count, 1)


def _dump(model: SeModel, epoch: int, batch: int, history, dump_dir) -> Path:
    report = {
        "epoch": epoch, "batch": batch, "history": history,
        "parameters": {k: {"finite": bool(np.all(np.isfinite(v.data))),
                           "max_abs": float(np.nanmax(np.abs(v.data))) if v.data.size else 0.0}
                       for k, v in model.named_parameters().items()},
    }
    path = Path(dump_dir or tempfile.gettempdir()) / f"bpse_numerics_{int(time.time() * 1000)}.json"
    path.write_text(json.dumps(report, indent=1))
    return path


HEAD_INIT_GAIN = 0.05


def train_se(model: SeModel, pairs, cfg: SeConfig | None = None, valid=None, *, dump_dir=None, log=None):
    """Train ``model`` in place on 64-frame segments with an MAE objective.

    Utterance tails shorter than a segment form their own batches with other
    tails of the same length.

    Early stopping watches the validation MAE (or the training loss without a
    validation set); the best parameters are restored at the end. Returns
    ``(model, history)`` with rows ``(epoch, train_loss, valid_loss)``.
    """
    cfg = cfg or model.cfg
    pairs = list(pairs)
    if not pairs:
        raise ConfigError("no training pairs supplied")
    if cfg.epochs <= 0:
        return model, []
    stacked = np.concatenate([p.noisy for p in pairs])
    model.in_mean = stacked.mean(axis=0)
    model.in_std = np.maximum(stacked.std(axis=0), 1e-3)
    # start the ReLU head near the mean clean spectrum: no bin begins dead and the
    # random projection does not swamp targets that are an order of magnitude smaller
    model.head.bias.data = np.concatenate([p.clean for p in pairs]).mean(axis=0).astype(model.head.bias.data.dtype)
    model.head.weight.data *= HEAD_INIT_GAIN
    groups = _segments(model, pairs, cfg)
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(model.named_parameters(), lr=cfg.lr, clip_norm=cfg.clip_norm)
    history: list[tuple] = []
    best, best_state, stale = np.inf, model.state_dict(), 0
    step, total_steps = 0, cfg.epochs * sum(-(-len(xs) // cfg.batch_segments) for xs, _ in groups.values())
    for epoch in range(1, cfg.epochs + 1):
        total, weight = 0.0, 0.0
        for b, (n, idx) in enumerate(_batches(groups, cfg.batch_segments, rng)):
            xb, yb = groups[n][0][idx], groups[n][1][idx]
            opt.zero_grad()
            if cfg.lr_schedule == "cosine":
                opt.state.lr = 0.5 * cfg.lr * (1.0 + np.cos(np.pi * step / total_steps))
            step += 1
            try:
                # one scan of the loss replaces a scan after every op
                with unchecked():
                    loss = ops.mae_loss(model(Tensor(xb)), yb)
                if not np.isfinite(loss.data):
                    raise NumericsError("non-finite training loss")
                with unchecked():
                    backward(loss)
                opt.step()
                for p in opt.params.values():
                    if not np.all(np.isfinite(p.data)):
                        raise NumericsError("non-finite parameter after update")
            except NumericsError as exc:
                path = _dump(model, epoch, b, history, dump_dir)
                raise NumericsError(f"{exc} (epoch {epoch}, batch {b}); diagnostics in {path}") from exc
            frames = float(yb.shape[0] * yb.shape[1])
            total += float(loss.data) * frames
            weight += frames
        train_loss = total / weight
        vloss = validation_mae(model, valid) if valid else None
        history.append((epoch, train_loss, vloss))
        if log:
            log(epoch, train_loss, vloss)
        score = vloss if vloss is not None else train_loss
        if score < best:
            best, best_state, stale = score, model.state_dict(), 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    model.load_state_dict(best_state)
    return model, history
