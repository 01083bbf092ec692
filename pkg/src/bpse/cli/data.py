"""Corpus ingestion (synthetic or TIMIT layout), noisy mixture construction and manifests."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..bpc import timit_inventory
from ..dsp import (MiniCorpusSpec, StftParams, Utterance, Waveform, frame_labels, generate_corpus, make_noise,
                   mix_at_snr, read_wav, write_wav)
from ..errors import ConfigError, FormatError, IoError
from .config import ExperimentConfig, stage_seed

SPLITS = ("train", "valid", "test")


def _f32(w: Waveform) -> Waveform:
    # audio is stored as float32 WAV; round in memory too so disk and memory agree exactly
    return Waveform(w.samples.astype(np.float32).astype(np.float64), w.sample_rate_hz)


@dataclass
class Mixture:
    id: str
    utt_id: str
    split: str
    noise_id: str
    offset: int
    snr_db: float
    clean: Waveform
    noisy: Waveform
    segments: list = field(default_factory=list)

    def phone_labels(self, params: StftParams = StftParams()) -> list[str]:
        return frame_labels(self.segments, len(self.clean), params)


@dataclass
class Dataset:
    phones: list[str]
    mixtures: list[Mixture]

    def split(self, name: str) -> list[Mixture]:
        return [m for m in self.mixtures if m.split == name]

    def at_snr(self, snr_db: float, split: str = "test") -> list[Mixture]:
        return [m for m in self.split(split) if m.snr_db == snr_db]


# -- TIMIT layout ---------------------------------------------------------------

def read_phn(path) -> list[tuple[int, int, str]]:
    """Parse a TIMIT ``.PHN`` file of ``start end phone`` lines."""
    out = []
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 3:
            raise FormatError(f"{path}:{n}: expected 'start end phone'")
        out.append((int(parts[0]), int(parts[1]), parts[2]))
    return out


def _timit_dir(root: Path, name: str) -> Path:
    for cand in (root / name, root / name.lower()):
        if cand.is_dir():
            return cand
    raise IoError(f"TIMIT {name} directory not found under {root}")


def read_timit(root, part: str) -> list[Utterance]:
    """All utterances of ``part`` ('TRAIN' or 'TEST'), SA sentences excluded."""
    base = _timit_dir(Path(root), part)
    utts = []
    for wav in sorted(p for p in base.rglob("*") if p.suffix.lower() == ".wav"):
        if wav.stem.upper().startswith("SA"):
            continue
        phn = next((wav.with_suffix(s) for s in (".PHN", ".phn") if wav.with_suffix(s).exists()), None)
        if phn is None:
            raise IoError(f"missing .PHN transcription next to {wav}")
        rel = wav.relative_to(base).with_suffix("")
        utts.append(Utterance("_".join(rel.parts).lower(), read_wav(wav), read_phn(phn)))
    if not utts:
        raise IoError(f"no TIMIT utterances found under {base}")
    return utts


# -- building -------------------------------------------------------------------

def corpus_utterances(cfg: ExperimentConfig) -> tuple[list[str], list[Utterance], list[Utterance]]:
    """(phone inventory, train-pool utterances, test utterances)."""
    if cfg.corpus.source == "timit":
        train = read_timit(cfg.corpus.timit_path, "TRAIN")
        test = read_timit(cfg.corpus.timit_path, "TEST")
        if cfg.split.n_test:
            test = test[:cfg.split.n_test]
        return list(timit_inventory().phones), train, test
    spec = MiniCorpusSpec(n_utterances=cfg.corpus.n_utterances, seed=stage_seed(cfg.seed, "corpus"))
    utts = generate_corpus(spec)
    n_test = cfg.split.n_test
    if n_test >= len(utts):
        raise ConfigError(f"n_test = {n_test} leaves no training utterances out of {len(utts)}")
    return [t.label for t in spec.phone_classes], utts[:len(utts) - n_test], utts[len(utts) - n_test:]


def load_noises(names, cfg: ExperimentConfig) -> dict[str, Waveform]:
    out = {}
    for name in names:
        if name.lower().endswith(".wav"):
            out[name] = read_wav(name)
        else:
            out[name] = make_noise(name, stage_seed(cfg.seed, f"noise/{name}"), cfg.noise.duration_s)
    return out


def build_dataset(cfg: ExperimentConfig) -> Dataset:
    """Mix every utterance with seeded noise crops; deterministic given the config."""
    phones, pool, test = corpus_utterances(cfg)
    rng = np.random.default_rng(stage_seed(cfg.seed, "prepare"))
    n_valid = int(round(cfg.split.valid_fraction * len(pool)))
    if cfg.split.valid_fraction > 0 and len(pool) > 1:
        n_valid = max(n_valid, 1)
    valid_ids = {pool[i].uid for i in rng.choice(len(pool), n_valid, replace=False)} if n_valid else set()
    train_noise = load_noises(cfg.noise.train, cfg)
    test_noise = load_noises(cfg.noise.test, cfg)
    mixtures = []

    def mix(u, split, k, noises, snr):
        name = list(noises)[int(rng.integers(len(noises)))]
        noise = noises[name]
        offset = int(rng.integers(0, len(noise) - len(u.wave) + 1))
        clean = _f32(u.wave)
        noisy = _f32(mix_at_snr(clean, noise, snr, offset=offset))
        mixtures.append(Mixture(f"{u.uid}_{k}", u.uid, split, name, offset, float(snr), clean, noisy,
                                list(u.segments)))

    for u in pool:
        split = "valid" if u.uid in valid_ids else "train"
        for k in range(cfg.split.mixtures_per_train_utterance):
            snr = cfg.snr.train[int(rng.integers(len(cfg.snr.train)))]
            mix(u, split, f"m{k}", train_noise, snr)
    for u in test:
        for snr in cfg.snr.test:
            mix(u, "test", f"snr{snr:+g}", test_noise, snr)
    return Dataset(phones, mixtures)


# -- manifest -------------------------------------------------------------------

def write_dataset(ds: Dataset, out_dir) -> Path:
    """Write clean/noisy float32 WAVs and ``manifest.json``; returns the manifest path."""
    out = Path(out_dir)
    (out / "audio" / "clean").mkdir(parents=True, exist_ok=True)
    (out / "audio" / "noisy").mkdir(parents=True, exist_ok=True)
    records, written = [], set()
    for m in ds.mixtures:
        clean_rel = f"audio/clean/{m.utt_id}.wav"
        noisy_rel = f"audio/noisy/{m.id}.wav"
        if clean_rel not in written:
            write_wav(out / clean_rel, m.clean, codec="float32")
            written.add(clean_rel)
        write_wav(out / noisy_rel, m.noisy, codec="float32")
        records.append({"id": m.id, "utt_id": m.utt_id, "split": m.split, "noise_id": m.noise_id,
                        "offset": m.offset, "snr_db": m.snr_db, "clean_path": clean_rel,
                        "noisy_path": noisy_rel, "segments": [list(s) for s in m.segments]})
    ids = [r["id"] for r in records]
    if len(set(ids)) != len(ids):
        raise ConfigError("mixture ids are not unique")
    path = out / "manifest.json"
    path.write_text(json.dumps({"schema_version": 1, "phones": ds.phones, "mixtures": records},
                               indent=1, sort_keys=True))
    return path


def read_dataset(manifest_path) -> Dataset:
    path = Path(manifest_path)
    if not path.exists():
        raise IoError(f"manifest not found: {path}")
    try:
        data = json.loads(path.read_text())
        base = path.parent
        cache: dict[str, Waveform] = {}
        mixtures = []
        for r in data["mixtures"]:
            if r["split"] not in SPLITS:
                raise FormatError(f"unknown split {r['split']!r} for {r['id']}")
            for key in ("clean_path", "noisy_path"):
                if not (base / r[key]).exists():
                    raise IoError(f"{r['id']}: referenced file {base / r[key]} does not exist")
            if r["clean_path"] not in cache:
                cache[r["clean_path"]] = read_wav(base / r["clean_path"])
            mixtures.append(Mixture(r["id"], r["utt_id"], r["split"], r["noise_id"], int(r["offset"]),
                                    float(r["snr_db"]), cache[r["clean_path"]], read_wav(base / r["noisy_path"]),
                                    [tuple(s) for s in r["segments"]]))
        return Dataset(list(data["phones"]), mixtures)
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise FormatError(f"malformed manifest {path}: {exc}") from exc
