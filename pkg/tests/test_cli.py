import json

import numpy as np
import pytest

from bpse.cli import ExperimentConfig, build_dataset, load_config, main, read_dataset, stage_seed, write_dataset
from bpse.cli.data import read_phn, read_timit
from bpse.cli.experiments import partition_for
from bpse.dsp import Waveform, write_wav
from bpse.errors import ConfigError, DependencyError, FormatError, IoError

TINY = {
    "schema_version": 1, "seed": 3, "corpus": {"n_utterances": 16},
    "split": {"n_test": 4, "valid_fraction": 0.1, "mixtures_per_train_utterance": 1},
    "snr": {"train": [0, 5], "test": [5, 0]},
    "am": {"hidden_dims": [16], "epochs": 1},
    "ae": {"encoder_dims": [16, 8], "epochs": 1},
    "se": {"epochs": 1, "conv_channels": [8], "n_blocks": 1, "heads": 2, "head_dim": 4, "model_dim": 8,
           "ff_dims": [8]},
}


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(TINY))
    return path


class TestConfig:
    def test_defaults(self):
        cfg = ExperimentConfig()
        assert cfg.snr.test == [15, 10, 5, 0, -5]
        assert not set(cfg.noise.train) & set(cfg.noise.test)

    def test_overlap_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"noise": {"train": ["pink", "white"], "test": ["pink"]}})

    def test_overlap_allowed_when_not_required(self):
        ExperimentConfig.from_dict({"noise": {"train": ["pink"], "test": ["pink"], "require_disjoint": False}})

    @pytest.mark.parametrize("bad", [{"criterion": "vowelness"}, {"preset": "huge"}, {"schema_version": 9},
                                     {"nonsense": 1}, {"corpus": {"source": "timit"}}])
    def test_invalid(self, bad):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(bad)

    def test_load_errors(self, tmp_path):
        with pytest.raises(IoError):
            load_config(tmp_path / "missing.json")
        (tmp_path / "bad.json").write_text("{")
        with pytest.raises(FormatError):
            load_config(tmp_path / "bad.json")

    def test_json_round_trip(self):
        cfg = ExperimentConfig.from_dict(TINY)
        assert ExperimentConfig.from_dict(json.loads(cfg.to_json())) == cfg

    def test_stage_seeds_independent(self):
        assert stage_seed(0, "am/manner") != stage_seed(0, "se/baseline")
        assert stage_seed(0, "am/manner") == stage_seed(0, "am/manner")
        assert stage_seed(0, "am/manner") != stage_seed(1, "am/manner")


class TestPrepare:
    def test_fifty_utterances_five_snrs(self):
        cfg = ExperimentConfig.from_dict({"corpus": {"n_utterances": 60}, "split": {"n_test": 50}})
        ds = build_dataset(cfg)
        test = ds.split("test")
        assert len(test) == 250
        assert sorted({m.snr_db for m in test}) == [-5, 0, 5, 10, 15]
        assert {m.noise_id for m in test} <= set(cfg.noise.test)
        assert {m.noise_id for m in ds.split("train")} <= set(cfg.noise.train)

    def test_byte_identical_rerun(self, tmp_path, tiny_config):
        for name in ("a", "b"):
            assert main(["prepare", "--config", str(tiny_config), "--out", str(tmp_path / name)]) == 0
        for rel in ("config.json", "data/manifest.json"):
            assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()
        wavs = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*.wav"))
        assert wavs and all((tmp_path / "a" / w).read_bytes() == (tmp_path / "b" / w).read_bytes() for w in wavs)

    def test_seed_changes_manifest(self, tmp_path, tiny_config):
        main(["prepare", "--config", str(tiny_config), "--out", str(tmp_path / "a")])
        main(["prepare", "--config", str(tiny_config), "--out", str(tmp_path / "b"), "--seed", "4"])
        assert (tmp_path / "a/data/manifest.json").read_bytes() != (tmp_path / "b/data/manifest.json").read_bytes()

    def test_manifest_round_trip(self, tmp_path):
        ds = build_dataset(ExperimentConfig.from_dict(TINY))
        ds2 = read_dataset(write_dataset(ds, tmp_path))
        assert [m.id for m in ds2.mixtures] == [m.id for m in ds.mixtures]
        for a, b in zip(ds.mixtures, ds2.mixtures):
            assert np.array_equal(a.noisy.samples, b.noisy.samples)
            assert np.array_equal(a.clean.samples, b.clean.samples)
            assert a.phone_labels() == b.phone_labels()

    def test_manifest_missing_file(self, tmp_path):
        path = write_dataset(build_dataset(ExperimentConfig.from_dict(TINY)), tmp_path)
        next((tmp_path / "audio" / "noisy").glob("*.wav")).unlink()
        with pytest.raises(IoError):
            read_dataset(path)

    def test_splits_and_ids(self):
        ds = build_dataset(ExperimentConfig.from_dict(TINY))
        ids = [m.id for m in ds.mixtures]
        assert len(ids) == len(set(ids))
        assert {m.split for m in ds.mixtures} == {"train", "valid", "test"}
        train_utts = {m.utt_id for m in ds.split("train")}
        assert not train_utts & {m.utt_id for m in ds.split("valid")}
        assert not train_utts & {m.utt_id for m in ds.split("test")}


class TestTimit:
    def make_tree(self, root):
        rng = np.random.default_rng(0)
        for part in ("TRAIN", "TEST"):
            d = root / part / "DR1" / "FABC0"
            d.mkdir(parents=True)
            for stem in ("SA1", "SX10", "SI20"):
                write_wav(d / f"{stem}.WAV", Waveform(rng.standard_normal(1600) * 0.1, 16000))
                (d / f"{stem}.PHN").write_text("0 400 h#\n400 1200 aa\n1200 1600 h#\n")

    def test_reads_and_skips_sa(self, tmp_path):
        self.make_tree(tmp_path)
        utts = read_timit(tmp_path, "TRAIN")
        assert [u.uid for u in utts] == ["dr1_fabc0_si20", "dr1_fabc0_sx10"]
        assert utts[0].segments == [(0, 400, "h#"), (400, 1200, "aa"), (1200, 1600, "h#")]

    def test_missing_corpus(self, tmp_path):
        with pytest.raises(IoError, match=str(tmp_path)):
            read_timit(tmp_path, "TRAIN")

    def test_missing_phn(self, tmp_path):
        self.make_tree(tmp_path)
        (tmp_path / "TRAIN/DR1/FABC0/SX10.PHN").unlink()
        with pytest.raises(IoError):
            read_timit(tmp_path, "TRAIN")

    def test_bad_phn(self, tmp_path):
        (tmp_path / "x.PHN").write_text("0 10\n")
        with pytest.raises(FormatError):
            read_phn(tmp_path / "x.PHN")

    def test_timit_dataset(self, tmp_path):
        self.make_tree(tmp_path)
        cfg = ExperimentConfig.from_dict({"corpus": {"source": "timit", "timit_path": str(tmp_path)},
                                          "split": {"n_test": 0, "valid_fraction": 0.0}})
        ds = build_dataset(cfg)
        assert len(ds.split("train")) == 4 and len(ds.split("test")) == 10
        assert len(ds.phones) == 61


class TestCluster:
    def test_manner_partition(self, tmp_path, capsys):
        assert main(["cluster", "--criterion", "manner", "--out", str(tmp_path)]) == 0
        data = json.loads((tmp_path / "partition-manner.json").read_text())
        assert len(data["clusters"]) == 5
        assert "vowels" in capsys.readouterr().out

    def test_target_k_on_matrix(self, tmp_path):
        rng = np.random.default_rng(0)
        phones = [f"p{i}" for i in range(12)]
        counts = rng.integers(0, 20, (12, 12)) + np.diag(rng.integers(50, 100, 12))
        csv = "," + ",".join(phones) + "\n" + "\n".join(
            p + "," + ",".join(str(v) for v in row) for p, row in zip(phones, counts)) + "\n"
        (tmp_path / "conf.csv").write_text(csv)
        for k, expected in ((9, 9), (12, 12)):
            assert main(["cluster", "--criterion", "data-driven", "--confusion", str(tmp_path / "conf.csv"),
                         "--target-k", str(k), "--out", str(tmp_path)]) == 0
            data = json.loads((tmp_path / "partition-data-driven.json").read_text())
            assert len(data["clusters"]) == expected
        assert all(len(c["phones"]) == 1 for c in data["clusters"])

    def test_data_driven_needs_confusion(self, tmp_path):
        assert main(["cluster", "--criterion", "data-driven", "--out", str(tmp_path)]) == 3
        with pytest.raises(DependencyError):
            partition_for("data_driven", ["aa", "iy"])


class TestPipeline:
    def test_stage_order_enforced(self, tmp_path, tiny_config, capsys):
        out = str(tmp_path / "run")
        assert main(["train-am", "--out", out]) == 3
        assert main(["prepare", "--config", str(tiny_config), "--out", out]) == 0
        assert main(["train-se", "--out", out]) == 3
        assert "train-ae" in capsys.readouterr().err
        assert main(["train-ae", "--out", out]) == 3
        assert main(["train-ae", "--out", out, "--ground-truth"]) == 0
        # ground-truth AE exists, but predicted conditioning still needs the AM
        assert main(["train-se", "--out", out, "--ae", str(tmp_path / "run" / "ae-gt-manner.ckpt")]) == 3
        assert "train-am" in capsys.readouterr().err

    def test_full_pipeline(self, tmp_path, tiny_config):
        out = str(tmp_path / "run")
        steps = [["prepare", "--config", str(tiny_config)], ["cluster"], ["train-am"], ["train-ae"],
                 ["train-ae", "--ground-truth"], ["train-se", "--baseline"], ["train-se"],
                 ["train-se", "--ground-truth"],
                 ["evaluate", "--systems", "noisy,baseline,bpse-manner,gt-manner", "--accuracy"]]
        for step in steps:
            assert main(step + ["--out", out]) == 0, step
        run = tmp_path / "run"
        table = (run / "report-stoi.txt").read_text().splitlines()
        assert table[0].split(" | ") == ["SNR", "noisy", "baseline", "bpse-manner", "gt-manner"]
        assert len(table) == 2 + 2 + 2
        assert (run / "report-accuracy.txt").exists()
        # ground-truth AE is trained on one-hot rows: its latents differ from the posterior-trained one
        assert (run / "ae-gt-manner.ckpt").read_bytes() != (run / "ae-manner.ckpt").read_bytes()
        noisy = next((run / "data/audio/noisy").glob("*.wav"))
        assert main(["enhance", "--out", out, "--model", str(run / "se-bpse-manner.ckpt"),
                     "--input", str(noisy), "--output", str(tmp_path / "e.wav")]) == 0
        assert (tmp_path / "e.wav").exists()

    def test_exit_codes(self, tmp_path, tiny_config):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"noise": {"train": ["pink"], "test": ["pink"]}}))
        assert main(["prepare", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2
        broken = tmp_path / "broken.json"
        broken.write_text("[1,")
        assert main(["prepare", "--config", str(broken), "--out", str(tmp_path / "x")]) == 4
        out = str(tmp_path / "run")
        main(["prepare", "--config", str(tiny_config), "--out", out])
        assert main(["evaluate", "--out", out, "--systems", "noisy,mystery"]) == 2
        (tmp_path / "run/data/manifest.json").write_text("{}")
        assert main(["train-am", "--out", out]) == 4

    def test_unknown_command(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2
