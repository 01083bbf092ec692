"""Pipeline stages on an in-memory :class:`Dataset`, and the two trend experiments.

The CLI commands are thin wrappers that load inputs from a run directory,
call one stage, and write its outputs back.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from ..bpc import ConfusionMatrix, Partition, PhoneInventory, agglomerate, knowledge_partition
from ..dsp import FeatureMatrix, Waveform, featurize, stft
from ..enhance import GroundTruthBppg, PredictedBppg, SeConfig, SeModel, SePair, build_se_model, enhance_utterance, train_se
from ..errors import ConfigError, DependencyError
from ..metrics import EvalReport, Score, aggregate, stoi
from ..phonetic import (AcousticModel, AeConfig, AmConfig, AutoEncoder, evaluate_am, one_hot_posteriorgram,
                        posteriorgram, train_ae, train_am)
from .config import ExperimentConfig, stage_seed
from .data import Dataset, Mixture, build_dataset


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("BPSE_THREADS", "1")))
    except ValueError:
        raise ConfigError("BPSE_THREADS must be an integer") from None


def ordered_map(fn, items) -> list:
    """``map`` over a BPSE_THREADS-sized pool; results keep input order."""
    items = list(items)
    n = thread_count()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


class FeatureCache:
    """Noisy and clean log1p features per mixture, computed once."""

    def __init__(self):
        self._noisy: dict[str, np.ndarray] = {}
        self._clean: dict[str, np.ndarray] = {}

    @staticmethod
    def _feats(w: Waveform) -> np.ndarray:
        return featurize(stft(w))[0].values

    def noisy(self, m: Mixture) -> np.ndarray:
        if m.id not in self._noisy:
            self._noisy[m.id] = self._feats(m.noisy)
        return self._noisy[m.id]

    def clean(self, m: Mixture) -> np.ndarray:
        if m.id not in self._clean:
            self._clean[m.id] = self._feats(m.clean)
        return self._clean[m.id]


def class_labels(m: Mixture, partition: Partition) -> np.ndarray:
    return np.array([partition.cluster_of(p) for p in m.phone_labels()], dtype=np.int64)


# -- partitions -------------------------------------------------------------

def partition_for(criterion: str, phones, confusion: ConfusionMatrix | None = None, target_k: int = 9) -> Partition:
    if criterion == "mono":
        return Partition.identity(PhoneInventory(tuple(phones)).phones)
    if criterion in ("manner", "place"):
        return knowledge_partition(criterion, PhoneInventory(tuple(phones)))
    if criterion == "data_driven":
        if confusion is None:
            raise DependencyError("a data-driven partition needs a phone confusion matrix (train a mono AM first)")
        return agglomerate(confusion, min(target_k, len(confusion.inventory)))
    raise ConfigError(f"unknown criterion {criterion!r}")


# -- stages -------------------------------------------------------------------

def am_config(cfg: ExperimentConfig, partition: Partition) -> AmConfig:
    a = cfg.am
    return AmConfig(partition.n_clusters, partition.class_names, context_frames=a.context_frames,
                    hidden_dims=list(a.hidden_dims), epochs=a.epochs, patience=a.patience,
                    batch_frames=a.batch_frames, lr=a.lr,
                    seed=stage_seed(cfg.seed, f"am/{partition.criterion}"))


def train_am_stage(ds: Dataset, partition: Partition, cfg: ExperimentConfig, cache: FeatureCache):
    train = ds.split("train")
    valid = ds.split("valid")
    feats = [cache.noisy(m) for m in train]
    labels = [class_labels(m, partition) for m in train]
    vset = ([cache.noisy(m) for m in valid], [class_labels(m, partition) for m in valid]) if valid else None
    return train_am(feats, labels, am_config(cfg, partition), vset)


def accuracy_stage(am: AcousticModel, mixtures, partition: Partition, cache: FeatureCache):
    """Frame accuracy per SNR and the confusion matrix over ``mixtures``."""
    return evaluate_am(am, [(cache.noisy(m), class_labels(m, partition), m.snr_db) for m in mixtures])


def ae_config(cfg: ExperimentConfig, partition: Partition, ground_truth: bool) -> AeConfig:
    a = cfg.ae
    tag = "gt" if ground_truth else "pred"
    return AeConfig(partition.n_clusters, list(a.encoder_dims), epochs=a.epochs, batch_frames=a.batch_frames,
                    lr=a.lr, seed=stage_seed(cfg.seed, f"ae/{partition.criterion}/{tag}"))


def train_ae_stage(ds: Dataset, partition: Partition, cfg: ExperimentConfig, cache: FeatureCache,
                   am: AcousticModel | None = None, ground_truth: bool = False):
    """AE on AM posteriors of the training mixtures, or on one-hot labels with ``ground_truth``."""
    train = ds.split("train")
    if ground_truth:
        rows = [one_hot_posteriorgram(class_labels(m, partition), partition.n_clusters) for m in train]
    else:
        if am is None:
            raise DependencyError("train-ae needs a trained acoustic model (run train-am) or --ground-truth")
        rows = [posteriorgram(am, cache.noisy(m)) for m in train]
    return train_ae(rows, ae_config(cfg, partition, ground_truth))


def bppg_provider(m: Mixture, partition: Partition | None, ae: AutoEncoder | None,
                  am: AcousticModel | None, ground_truth: bool):
    if ae is None:
        return None
    if ground_truth:
        return GroundTruthBppg(ae, class_labels(m, partition))
    if am is None:
        raise DependencyError("predicted BPPG conditioning needs an acoustic model")
    return PredictedBppg(am, ae)


def se_config(cfg: ExperimentConfig, tag: str) -> SeConfig:
    return SeConfig.from_preset(cfg.preset, **{"seed": stage_seed(cfg.seed, f"se/{tag}"), **cfg.se})


def train_se_stage(ds: Dataset, cfg: ExperimentConfig, cache: FeatureCache, *, tag: str = "baseline",
                   partition: Partition | None = None, ae: AutoEncoder | None = None,
                   am: AcousticModel | None = None, ground_truth: bool = False, log=None):
    conditioned = ae is not None
    scfg = se_config(cfg, tag)
    if conditioned:
        scfg = replace(scfg, cond_dim=ae.cfg.latent_dim)

    def pairs(split):
        out = []
        for m in ds.split(split):
            latent = None
            if conditioned:
                latent = bppg_provider(m, partition, ae, am, ground_truth)(FeatureMatrix(cache.noisy(m)))
            out.append(SePair(cache.noisy(m), cache.clean(m), latent))
        return out

    model = build_se_model(scfg, conditioned)
    return train_se(model, pairs("train"), scfg, pairs("valid") or None, log=log)


def enhance_mixture(model: SeModel, m: Mixture, partition=None, ae=None, am=None, ground_truth=False) -> Waveform:
    provider = bppg_provider(m, partition, ae, am, ground_truth) if model.conditioned else None
    return enhance_utterance(model, m.noisy, provider)


def score_systems(mixtures, systems: dict) -> list[Score]:
    """STOI of every system on every mixture.

    ``systems`` maps a name to ``None`` (score the noisy input) or to a
    callable returning the enhanced waveform of a mixture.
    """

    def score(m):
        out = []
        for name, fn in systems.items():
            processed = m.noisy if fn is None else fn(m)
            out.append(Score(name, m.snr_db, m.id, stoi(m.clean, processed)))
        return out

    return [s for group in ordered_map(score, mixtures) for s in group]


def evaluate_stage(mixtures, systems: dict, snrs=None) -> EvalReport:
    return aggregate(score_systems(mixtures, systems), "stoi", list(systems), snrs)


# -- experiments --------------------------------------------------------------

def experiment_config(seed: int, **overrides) -> ExperimentConfig:
    return ExperimentConfig(seed=seed).with_overrides(**overrides)


def run_accuracy_experiment(seeds=(0, 1, 2), criteria=("mono", "manner"), snrs=(-5.0, 0.0), *,
                            n_utterances: int = 220, n_test: int = 40, am_epochs: int = 8) -> dict:
    """Frame accuracy of AMs trained on each criterion, averaged over seeds.

    Returns ``{"mean": {criterion: {snr: acc}}, "per_seed": {seed: {criterion: {snr: acc}}}}``.
    """
    per_seed = {}
    for seed in seeds:
        cfg = experiment_config(seed, corpus={"source": "synthetic", "n_utterances": n_utterances},
                                snr={"train": list(ExperimentConfig().snr.train), "test": list(snrs)},
                                split={"n_test": n_test, "valid_fraction": 0.0, "mixtures_per_train_utterance": 2})
        cfg = replace(cfg, am=replace(cfg.am, epochs=am_epochs))
        ds = build_dataset(cfg)
        cache = FeatureCache()
        per_seed[seed] = {}
        for criterion in criteria:
            part = partition_for(criterion, ds.phones)
            am, _ = train_am_stage(ds, part, cfg, cache)
            acc, _ = accuracy_stage(am, ds.split("test"), part, cache)
            per_seed[seed][criterion] = acc
    mean = {c: {s: float(np.mean([per_seed[k][c][s] for k in seeds])) for s in snrs} for c in criteria}
    return {"mean": mean, "per_seed": per_seed}


def run_se_experiment(seed: int = 0, criterion: str = "manner", snr: float = 0.0, *, n_utterances: int = 470,
                      n_test: int = 50, se_epochs: int = 15, log=None) -> dict:
    """Mean test STOI of noisy input, the baseline, predicted-BPPG and ground-truth-BPPG conditioning."""
    cfg = experiment_config(seed, corpus={"source": "synthetic", "n_utterances": n_utterances},
                            snr={"train": list(ExperimentConfig().snr.train), "test": [snr]},
                            split={"n_test": n_test, "valid_fraction": 0.05, "mixtures_per_train_utterance": 2},
                            criterion=criterion, se={**ExperimentConfig().se, "epochs": se_epochs})
    ds = build_dataset(cfg)
    cache = FeatureCache()
    part = partition_for(criterion, ds.phones)
    am, _ = train_am_stage(ds, part, cfg, cache)
    ae_pred, _ = train_ae_stage(ds, part, cfg, cache, am=am)
    ae_gt, _ = train_ae_stage(ds, part, cfg, cache, ground_truth=True)
    tag = cfg.criterion_tag
    base, _ = train_se_stage(ds, cfg, cache, tag="baseline", log=log)
    pred, _ = train_se_stage(ds, cfg, cache, tag=f"bpse-{tag}", partition=part, ae=ae_pred, am=am, log=log)
    gt, _ = train_se_stage(ds, cfg, cache, tag=f"gt-{tag}", partition=part, ae=ae_gt, ground_truth=True, log=log)
    systems = {
        "noisy": None,
        "baseline": lambda m: enhance_mixture(base, m),
        f"bpse-{tag}": lambda m: enhance_mixture(pred, m, part, ae_pred, am),
        f"gt-{tag}": lambda m: enhance_mixture(gt, m, part, ae_gt, ground_truth=True),
    }
    report = evaluate_stage(ds.at_snr(snr), systems, [snr])
    return {name: report.mean(name, snr) for name in systems} | {"report": report}
