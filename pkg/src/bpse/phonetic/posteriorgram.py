from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, CoverageError, ShapeError

SOURCES = ("predicted", "one_hot_ground_truth")


@dataclass
class Posteriorgram:
    """Per-frame class posteriors, shape (T, C); every row is a probability vector."""

    values: np.ndarray
    class_names: list[str]
    source: str = "predicted"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.source not in SOURCES:
            raise ConfigError(f"unknown posteriorgram source {self.source!r}")
        if self.values.ndim != 2 or self.values.shape[1] != len(self.class_names):
            raise ShapeError(f"posteriorgram shape {self.values.shape} does not match "
                             f"{len(self.class_names)} class names")
        if self.values.size and (np.any(self.values < 0)
                                 or np.max(np.abs(self.values.sum(axis=1) - 1.0)) > 1e-6):
            raise ShapeError("posteriorgram rows must be non-negative and sum to 1")

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_classes(self) -> int:
        return self.values.shape[1]


def one_hot_posteriorgram(labels, n_classes: int, class_names=None) -> Posteriorgram:
    """Ground-truth posteriorgram: row t is the indicator of ``labels[t]``."""
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    bad = labels[(labels < 0) | (labels >= n_classes)]
    if bad.size:
        raise CoverageError(f"label {int(bad[0])} outside [0, {n_classes})")
    values = np.zeros((labels.size, n_classes))
    values[np.arange(labels.size), labels] = 1.0
    names = list(class_names) if class_names is not None else [f"c{k}" for k in range(n_classes)]
    return Posteriorgram(values, names, "one_hot_ground_truth")
