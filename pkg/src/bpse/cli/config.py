"""Experiment configuration: one JSON document, versioned, with named seed streams."""
from __future__ import annotations

import copy
import json
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..bpc import CRITERIA
from ..dsp import DEFAULT_TEST_NOISES, DEFAULT_TEST_SNRS, DEFAULT_TRAIN_NOISES, default_train_snrs
from ..enhance import PRESETS
from ..errors import ConfigError, FormatError, IoError

SCHEMA_VERSION = 1
STAGES = ("prepare", "am", "ae", "se", "evaluate")


def stage_seed(root: int, stage: str) -> int:
    """Independent, reproducible seed for one pipeline stage."""
    ss = [int(root), zlib.crc32(stage.encode())]
    return int(np.random.SeedSequence(ss).generate_state(1)[0])


@dataclass
class CorpusConfig:
    source: str = "synthetic"  # synthetic | timit
    n_utterances: int = 470
    timit_path: str | None = None


@dataclass
class NoiseConfig:
    train: list[str] = field(default_factory=lambda: list(DEFAULT_TRAIN_NOISES))
    test: list[str] = field(default_factory=lambda: list(DEFAULT_TEST_NOISES))
    require_disjoint: bool = True
    duration_s: float = 10.0


@dataclass
class SnrConfig:
    train: list[float] = field(default_factory=default_train_snrs)
    test: list[float] = field(default_factory=lambda: list(DEFAULT_TEST_SNRS))


@dataclass
class SplitConfig:
    n_test: int = 50
    valid_fraction: float = 0.05
    mixtures_per_train_utterance: int = 2


@dataclass
class AmSection:
    context_frames: int = 5
    hidden_dims: list[int] = field(default_factory=lambda: [256, 256])
    epochs: int = 8
    patience: int = 3
    batch_frames: int = 256
    lr: float = 1e-3


@dataclass
class AeSection:
    encoder_dims: list[int] = field(default_factory=lambda: [512, 256, 96])
    epochs: int = 4
    batch_frames: int = 256
    lr: float = 1e-3


@dataclass
class ExperimentConfig:
    schema_version: int = SCHEMA_VERSION
    seed: int = 0
    out_dir: str = "bpse_run"
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    snr: SnrConfig = field(default_factory=SnrConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    criterion: str = "manner"
    target_k: int = 9
    ground_truth: bool = False
    preset: str = "desk"
    am: AmSection = field(default_factory=AmSection)
    ae: AeSection = field(default_factory=AeSection)
    se: dict = field(default_factory=lambda: {"epochs": 15, "batch_segments": 4})
    systems: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported config schema_version {self.schema_version}")
        if self.criterion not in CRITERIA:
            raise ConfigError(f"criterion must be one of {CRITERIA}, got {self.criterion!r}")
        if self.preset not in PRESETS:
            raise ConfigError(f"preset must be one of {PRESETS}, got {self.preset!r}")
        if self.corpus.source not in ("synthetic", "timit"):
            raise ConfigError(f"unknown corpus source {self.corpus.source!r}")
        if self.corpus.source == "timit" and not self.corpus.timit_path:
            raise ConfigError("corpus.timit_path is required for a TIMIT corpus")
        if self.noise.require_disjoint:
            shared = sorted(set(self.noise.train) & set(self.noise.test))
            if shared:
                raise ConfigError(f"train and test noise types overlap: {shared}")
        if not self.noise.train or not self.noise.test:
            raise ConfigError("train and test noise lists must be non-empty")
        if not 0.0 <= self.split.valid_fraction < 1.0:
            raise ConfigError("split.valid_fraction must lie in [0, 1)")
        if self.split.n_test < 0 or self.split.mixtures_per_train_utterance < 1:
            raise ConfigError("split sizes must be positive")
        if self.target_k < 1:
            raise ConfigError("target_k must be >= 1")

    @property
    def criterion_tag(self) -> str:
        return self.criterion.replace("_", "-")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = copy.deepcopy(data)
        sections = {"corpus": CorpusConfig, "noise": NoiseConfig, "snr": SnrConfig, "split": SplitConfig,
                    "am": AmSection, "ae": AeSection}
        try:
            for key, kind in sections.items():
                if key in data:
                    data[key] = kind(**data[key])
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(f"invalid config field: {exc}") from exc

    def with_overrides(self, **flags) -> "ExperimentConfig":
        """Copy with command-line flags applied; ``None`` values are ignored."""
        data = asdict(self)
        for key, value in flags.items():
            if value is not None:
                data[key] = value
        return ExperimentConfig.from_dict(data)


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return ExperimentConfig.from_dict(data)
