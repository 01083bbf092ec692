"""End-to-end acceptance suite. Each test prints one pass/fail line in the terminal summary."""
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import spearmanr

from bpse.bpc import ConfusionMatrix, PhoneInventory, agglomerate, knowledge_partition, similarity_from_confusion, \
    timit_inventory
from bpse.cli import main, run_accuracy_experiment, run_se_experiment
from bpse.dsp import (DEFAULT_TEST_NOISES, MiniCorpusSpec, Waveform, generate_corpus, istft, make_noise,
                      mix_at_snr, stft)
from bpse.enhance import SeConfig, build_se_model
from bpse.metrics import measure_snr, stoi
from bpse.nnsub import Tensor
from bpse.nnsub.gradcheck import GRAD_KINDS, grad_check
from oracles import agglomerate_oracle, similarity_oracle

SEEDS = (0, 1, 2)
DIPHTHONGS_SEMIVOWELS = ("aw", "ay", "ey", "ow", "oy", "l", "r", "w", "y", "el")


@pytest.mark.criterion(1, "similarity and agglomeration match brute-force oracles on 200 matrices")
def test_criterion_1_oracle_equivalence(record):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    for _ in range(200):
        P = int(rng.integers(2, 11))
        M = rng.integers(0, 50, (P, P))
        inv = PhoneInventory(tuple(f"p{i}" for i in range(P)))
        cm = ConfusionMatrix(M, inv)
        got = similarity_from_confusion(cm).values
        assert np.array_equal(got, np.array(similarity_oracle(M.tolist()), dtype=got.dtype))
        k = int(rng.integers(1, P + 1))
        clusters = agglomerate(cm, k).clusters()
        assert sorted(sorted(int(p[1:]) for p in c) for c in clusters) == agglomerate_oracle(M.tolist(), k)
    elapsed = time.perf_counter() - t0
    record(f"{elapsed:.2f} s")
    assert elapsed < 10


@pytest.mark.criterion(2, "manner gives 5 clusters and place 9 on the 61-phone inventory")
def test_criterion_2_knowledge_partitions(record):
    inv = timit_inventory()
    assert len(inv) == 61
    sizes = {}
    for criterion, k in (("manner", 5), ("place", 9)):
        part = knowledge_partition(criterion, inv)
        sizes[criterion] = part.n_clusters
        assert part.n_clusters == k
        assert sorted(p for c in part.clusters() for p in c) == sorted(inv)
        vowels = part.class_names.index("vowels")
        assert {part.cluster_of(p) for p in DIPHTHONGS_SEMIVOWELS} == {vowels}
    record(f"manner {sizes['manner']}, place {sizes['place']}")


@pytest.mark.criterion(3, "STFT round trip interior error below 1e-6 on 50 two-second signals")
def test_criterion_3_stft_round_trip(record):
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        x = rng.standard_normal(32000) * rng.uniform(0.01, 1.0)
        s = stft(Waveform(x))
        assert s.frames.shape[1] == 257
        y = istft(s).samples
        worst = max(worst, float(np.max(np.abs(y[512:-512] - x[512:-512]))))
    elapsed = time.perf_counter() - t0
    record(f"max error {worst:.2e}, {elapsed:.2f} s")
    assert worst < 1e-6 and elapsed < 5


@pytest.mark.criterion(4, "mixing hits each target SNR within 0.01 dB on 50 pairs")
def test_criterion_4_snr_mixing(record):
    rng = np.random.default_rng(4)
    utts = generate_corpus(MiniCorpusSpec(n_utterances=50, seed=44))
    kinds = sorted(DEFAULT_TEST_NOISES)
    noises = {k: make_noise(k, i, 10.0) for i, k in enumerate(kinds)}
    worst = 0.0
    for u in utts:
        noise = noises[kinds[int(rng.integers(len(kinds)))]]
        offset = int(rng.integers(0, len(noise) - len(u.wave)))
        for target in (-5, 0, 5, 10, 15):
            worst = max(worst, abs(measure_snr(u.wave, mix_at_snr(u.wave, noise, target, offset=offset)) - target))
    record(f"worst deviation {worst:.2e} dB")
    assert worst <= 0.01


@pytest.mark.criterion(5, "every layer kind passes finite-difference gradient checks on 10 shapes")
def test_criterion_5_gradient_checks(record):
    t0 = time.perf_counter()
    worst = {}
    for kind in GRAD_KINDS:
        rep = grad_check(kind, trials=10, seed=5)
        assert len(rep.shapes) >= 10
        worst[kind] = rep.worst_rel_error
    elapsed = time.perf_counter() - t0
    name = max(worst, key=worst.get)
    record(f"worst {worst[name]:.1e} ({name}), {elapsed:.1f} s")
    assert max(worst.values()) < 1e-4 and elapsed < 60


@pytest.mark.criterion(6, "SE outputs at frames <= t are bitwise unchanged when later frames are zeroed")
def test_criterion_6_causality(record):
    model = build_se_model(SeConfig.desk(), conditioned=True, seed=6)
    rng = np.random.default_rng(6)
    checks = 0
    for _ in range(20):
        T = int(rng.integers(20, 80))
        x = rng.standard_normal((T, model.convs[0].in_ch)).astype(np.float32)
        y = model(Tensor(x)).data
        for t in rng.choice(T - 1, 5, replace=False):
            x2 = x.copy()
            x2[t + 1:] = 0.0
            assert np.array_equal(model(Tensor(x2)).data[:t + 1], y[:t + 1])
            checks += 1
    record(f"{checks} prefix checks")


@pytest.mark.criterion(7, "STOI self score, monotone in SNR, invariant to processed gain")
def test_criterion_7_stoi_properties(record):
    utts = generate_corpus(MiniCorpusSpec(n_utterances=20, seed=77))
    self_scores = [stoi(u.wave, u.wave) for u in utts]
    assert min(self_scores) >= 0.999
    rng = np.random.default_rng(7)
    kinds = sorted(DEFAULT_TEST_NOISES)
    noises = [make_noise(k, 70 + i, 10.0) for i, k in enumerate(kinds)]
    snrs = (15, 10, 5, 0, -5)
    means = []
    picks = [(noises[int(rng.integers(len(noises)))], int(rng.integers(0, 80000))) for _ in utts]
    for snr in snrs:
        means.append(float(np.mean([stoi(u.wave, mix_at_snr(u.wave, n, snr, offset=min(off, len(n) - len(u.wave))))
                                    for u, (n, off) in zip(utts, picks)])))
    assert all(a > b for a, b in zip(means, means[1:]))
    rho = spearmanr(snrs, means).statistic
    assert rho == pytest.approx(1.0)
    y = mix_at_snr(utts[0].wave, noises[0], 0, offset=0)
    base = stoi(utts[0].wave, y)
    drift = max(abs(stoi(utts[0].wave, Waveform(y.samples * c, 16000)) - base) for c in (0.1, 2.0, 37.0))
    assert drift < 1e-6
    record(f"min self {min(self_scores):.4f}, means {' > '.join(f'{m:.3f}' for m in means)}, gain drift {drift:.1e}")


@pytest.mark.criterion(8, "manner BPC frame accuracy beats monophone accuracy at -5 and 0 dB over 3 seeds")
def test_criterion_8_accuracy_trend(record):
    t0 = time.perf_counter()
    res = run_accuracy_experiment(seeds=SEEDS, criteria=("mono", "manner"), snrs=(-5.0, 0.0))
    elapsed = time.perf_counter() - t0
    m = res["mean"]
    record(" ; ".join(f"{s:g} dB manner {m['manner'][s]:.3f} vs mono {m['mono'][s]:.3f}" for s in (-5.0, 0.0))
           + f" ; {elapsed / 60:.1f} min")
    for snr in (-5.0, 0.0):
        assert m["manner"][snr] - m["mono"][snr] > 0
    assert elapsed < 600


@pytest.mark.criterion(9, "0 dB STOI: baseline > noisy, conditioned >= baseline, ground truth >= predicted")
def test_criterion_9_stoi_trends(record):
    t0 = time.perf_counter()
    runs = [run_se_experiment(seed, criterion="manner", snr=0.0) for seed in SEEDS]
    elapsed = time.perf_counter() - t0
    names = ("noisy", "baseline", "bpse-manner", "gt-manner")
    mean = {n: float(np.mean([r[n] for r in runs])) for n in names}
    per_seed = " | ".join(" ".join(f"{r[n]:.3f}" for n in names) for r in runs)
    record(f"means noisy {mean['noisy']:.4f} baseline {mean['baseline']:.4f} bpse {mean['bpse-manner']:.4f} "
           f"gt {mean['gt-manner']:.4f} ; per seed [{per_seed}] ; {elapsed / 60:.1f} min")
    failures = []
    if not mean["baseline"] > mean["noisy"]:
        failures.append("(a) baseline not above noisy")
    if not all(r["bpse-manner"] >= r["baseline"] - 0.005 for r in runs) or mean["bpse-manner"] < mean["baseline"]:
        failures.append("(b) conditioned below baseline")
    if not mean["gt-manner"] >= mean["bpse-manner"]:
        failures.append("(c) ground truth below predicted")
    if elapsed >= 1800:
        failures.append("runtime over 30 min")
    assert not failures, "; ".join(failures)


TINY = """{"schema_version": 1, "seed": 10, "corpus": {"n_utterances": 20},
 "split": {"n_test": 4, "valid_fraction": 0.1, "mixtures_per_train_utterance": 1},
 "snr": {"train": [0, 5, 10], "test": [5, 0]},
 "am": {"hidden_dims": [32], "epochs": 2}, "ae": {"encoder_dims": [32, 16], "epochs": 2},
 "se": {"epochs": 2, "conv_channels": [16, 16], "n_blocks": 1, "heads": 2, "head_dim": 8, "model_dim": 16,
        "ff_dims": [16]}}"""


def _pipeline(out: Path, config: Path) -> None:
    steps = [["prepare", "--config", str(config)], ["train-am", "--criterion", "mono"],
             ["cluster", "--criterion", "data-driven", "--target-k", "5"], ["cluster", "--criterion", "manner"],
             ["train-am"], ["train-ae"], ["train-ae", "--ground-truth"], ["train-se", "--baseline"],
             ["train-se"], ["train-se", "--ground-truth"],
             ["evaluate", "--systems", "noisy,baseline,bpse-manner,gt-manner", "--accuracy"]]
    for step in steps:
        assert main(step + ["--out", str(out)]) == 0, step


@pytest.mark.criterion(10, "two full pipeline runs under one seed give byte-identical outputs")
def test_criterion_10_determinism(record, tmp_path, monkeypatch):
    config = tmp_path / "tiny.json"
    config.write_text(TINY)
    _pipeline(tmp_path / "a", config)
    monkeypatch.setenv("BPSE_THREADS", "2")
    _pipeline(tmp_path / "b", config)
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    assert sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*") if p.is_file()) == files
    differing = [str(f) for f in files if (tmp_path / "a" / f).read_bytes() != (tmp_path / "b" / f).read_bytes()]
    ckpts = [f for f in files if f.suffix == ".ckpt"]
    record(f"{len(files)} files compared ({len(ckpts)} checkpoints), {len(differing)} differ")
    assert len(ckpts) == 7 and not differing, differing
