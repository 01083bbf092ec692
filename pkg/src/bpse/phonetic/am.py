"""Frame-level acoustic model: an MLP over context-stacked log1p frames."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..bpc import ConfusionMatrix, PhoneInventory
from ..errors import AlignmentError, ConfigError, FormatError, ShapeError
from ..nnsub import Dense, LeakyReLU, Module, Sequential, Tensor, backward, no_grad, ops
from ..nnsub import Adam, load_checkpoint, save_checkpoint
from .posteriorgram import Posteriorgram


@dataclass
class AmConfig:
    classes: int
    class_names: list[str] = field(default_factory=list)
    context_frames: int = 5
    hidden_dims: list[int] = field(default_factory=lambda: [256, 256])
    feature_dim: int = 257
    epochs: int = 15
    patience: int = 3  # epochs without validation improvement before stopping
    batch_frames: int = 256
    lr: float = 1e-3
    seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        if self.classes < 1:
            raise ConfigError("an acoustic model needs at least one class")
        if self.context_frames < 0:
            raise ConfigError("context_frames must be >= 0")
        if self.patience < 1:
            raise ConfigError("patience must be >= 1")
        if any(w <= 0 for w in self.hidden_dims) or self.feature_dim <= 0:
            raise ConfigError("layer widths must be positive")
        if not self.class_names:
            self.class_names = [f"c{k}" for k in range(self.classes)]
        if len(self.class_names) != self.classes:
            raise ConfigError(f"{len(self.class_names)} class names for {self.classes} classes")
        self.hidden_dims = list(self.hidden_dims)

    @property
    def input_dim(self) -> int:
        return (2 * self.context_frames + 1) * self.feature_dim


def stack_context(x: np.ndarray, context: int) -> np.ndarray:
    """(T, F) -> (T, (2c+1)F); frames beyond either edge replicate the edge frame."""
    x = np.asarray(x)
    if context == 0:
        return x
    n = x.shape[0]
    idx = np.clip(np.arange(n)[:, None] + np.arange(-context, context + 1)[None, :], 0, n - 1)
    return x[idx].reshape(n, -1)


class AcousticModel(Module):
    def __init__(self, cfg: AmConfig, rng=None):
        self.cfg = cfg
        rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        dt = np.dtype(cfg.dtype)
        dims = [cfg.input_dim] + cfg.hidden_dims
        layers = []
        for a, b in zip(dims[:-1], dims[1:]):
            layers += [Dense(a, b, rng, dt), LeakyReLU()]
        layers.append(Dense(dims[-1], cfg.classes, rng, dt))
        self.net = Sequential(*layers)
        self.feat_mean = np.zeros(cfg.feature_dim)
        self.feat_std = np.ones(cfg.feature_dim)

    def _inputs(self, feats: np.ndarray) -> np.ndarray:
        feats = np.asarray(feats)
        if feats.ndim != 2 or feats.shape[1] != self.cfg.feature_dim:
            raise ShapeError(f"acoustic model expects (T, {self.cfg.feature_dim}) features, got {feats.shape}")
        z = (feats - self.feat_mean) / self.feat_std
        return stack_context(z, self.cfg.context_frames).astype(self.cfg.dtype)

    def forward(self, x):
        return self.net(x)

    def logits(self, feats: np.ndarray) -> np.ndarray:
        with no_grad():
            return self.net(Tensor(self._inputs(feats))).data.astype(np.float64)

    def predict(self, feats: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits(feats), axis=1)

    # -- persistence --------------------------------------------------------
    def save(self, path) -> None:
        params = self.state_dict()
        params["norm.mean"] = self.feat_mean
        params["norm.std"] = self.feat_std
        save_checkpoint(path, params, {"kind": "acoustic_model", "config": asdict(self.cfg)})

    @classmethod
    def load(cls, path) -> "AcousticModel":
        header, params = load_checkpoint(path)
        if header.get("kind") != "acoustic_model":
            raise FormatError(f"{path} is not an acoustic model checkpoint")
        model = cls(AmConfig(**header["config"]))
        model.feat_mean = params.pop("norm.mean")
        model.feat_std = params.pop("norm.std")
        model.load_state_dict(params)
        return model


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def posteriorgram(am: AcousticModel, features) -> Posteriorgram:
    """Softmax class posteriors for every frame of ``features`` (FeatureMatrix or (T, F) array)."""
    values = getattr(features, "values", features)
    return Posteriorgram(_softmax_rows(am.logits(values)), list(am.cfg.class_names), "predicted")


def _check_aligned(features, labels):
    if len(features) != len(labels):
        raise AlignmentError(f"{len(features)} feature matrices but {len(labels)} label sequences")
    for i, (f, y) in enumerate(zip(features, labels)):
        if np.asarray(f).shape[0] != len(y):
            raise AlignmentError(f"item {i}: {np.asarray(f).shape[0]} frames but {len(y)} labels")


def train_am(features, labels, cfg: AmConfig, valid=None):
    """Fit an acoustic model by mini-batch Adam on frame cross-entropy.

    ``features``: list of (T_i, F) log1p matrices; ``labels``: list of int
    sequences of matching lengths. ``valid`` is an optional (features, labels)
    pair scored after every epoch; with it, training stops after ``patience``
    epochs without improvement and the best parameters are restored. Returns
    ``(model, history)`` where history rows are ``(epoch, train_loss, valid_loss)``.
    """
    _check_aligned(features, labels)
    rng = np.random.default_rng(cfg.seed)
    model = AcousticModel(cfg, rng)
    if not features:
        return model, []
    allf = np.concatenate([np.asarray(f) for f in features])
    model.feat_mean = allf.mean(axis=0)
    model.feat_std = np.maximum(allf.std(axis=0), 1e-3)
    x = np.concatenate([model._inputs(f) for f in features])
    y = np.concatenate([np.asarray(v, dtype=np.int64) for v in labels])
    if y.size and (y.min() < 0 or y.max() >= cfg.classes):
        raise AlignmentError(f"labels must lie in [0, {cfg.classes})")
    opt = Adam(model.named_parameters(), lr=cfg.lr)
    history = []
    best, best_state, stale = np.inf, model.state_dict(), 0
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(y))
        total = 0.0
        for start in range(0, len(y), cfg.batch_frames):
            idx = order[start:start + cfg.batch_frames]
            opt.zero_grad()
            loss = ops.cross_entropy(model(Tensor(x[idx])), y[idx])
            backward(loss)
            opt.step()
            total += float(loss.data) * idx.size
        vloss = None
        if valid is not None:
            vloss = frame_loss(model, *valid)
        history.append((epoch, total / len(y), vloss))
        if vloss is None:
            continue
        if vloss < best:
            best, best_state, stale = vloss, model.state_dict(), 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    if valid is not None:
        model.load_state_dict(best_state)
    return model, history


def frame_loss(model: AcousticModel, features, labels) -> float:
    _check_aligned(features, labels)
    total, count = 0.0, 0
    for f, lab in zip(features, labels):
        lab = np.asarray(lab, dtype=np.int64)
        logp = np.log(_softmax_rows(model.logits(f)))
        total += float(-logp[np.arange(lab.size), lab].sum())
        count += lab.size
    return total / max(count, 1)


def evaluate_am(am: AcousticModel, test_set):
    """Frame accuracy per SNR and the pooled confusion matrix.

    ``test_set``: iterable of ``(features, labels, snr_db)`` triples. Returns
    ``({snr_db: accuracy}, ConfusionMatrix)`` with classes named after the
    model's class names.
    """
    c = am.cfg.classes
    counts = np.zeros((c, c), dtype=np.int64)
    hits: dict[float, list[int]] = {}
    for feats, lab, snr in test_set:
        lab = np.asarray(lab, dtype=np.int64)
        values = getattr(feats, "values", feats)
        if values.shape[0] != lab.size:
            raise AlignmentError(f"{values.shape[0]} frames but {lab.size} labels")
        pred = am.predict(values)
        np.add.at(counts, (lab, pred), 1)
        h = hits.setdefault(float(snr), [0, 0])
        h[0] += int(np.sum(pred == lab))
        h[1] += lab.size
    acc = {snr: (h / n if n else float("nan")) for snr, (h, n) in hits.items()}
    return acc, ConfusionMatrix(counts, PhoneInventory(tuple(am.cfg.class_names)))
