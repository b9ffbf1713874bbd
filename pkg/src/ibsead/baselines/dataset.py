"""Labelled datasets and their JSON-lines form."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np


@dataclass(eq=False)
class Dataset:
    feature_names: list[str]
    features: np.ndarray  # (n_rows, n_features)
    labels: np.ndarray  # (n_rows,) integer classes
    n_classes: int

    def __post_init__(self):
        self.feature_names = list(self.feature_names)
        self.features = np.asarray(self.features, dtype=float).reshape(-1, len(self.feature_names))
        self.labels = np.asarray(self.labels, dtype=int).reshape(-1)
        if len(self.features) != len(self.labels):
            raise ValueError("features and labels differ in length")
        if self.n_classes < 2:
            raise ValueError("n_classes must be >= 2")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ValueError("labels outside [0, n_classes)")

    @classmethod
    def from_rows(cls, feature_names, rows: Iterable[tuple[Sequence[float], int]], n_classes: int) -> "Dataset":
        rows = list(rows)
        X = np.array([r[0] for r in rows], dtype=float).reshape(len(rows), len(feature_names))
        y = np.array([r[1] for r in rows], dtype=int)
        return cls(feature_names, X, y, n_classes)

    def __len__(self):
        return len(self.labels)

    @property
    def arity(self) -> int:
        return len(self.feature_names)

    def rows(self) -> list[tuple[list[float], int]]:
        return [(list(x), int(c)) for x, c in zip(self.features.tolist(), self.labels.tolist())]

    def subset(self, index) -> "Dataset":
        return Dataset(self.feature_names, self.features[index], self.labels[index], self.n_classes)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.feature_names == other.feature_names
            and self.n_classes == other.n_classes
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )


def write_jsonl(dataset: Dataset, path, truth: Sequence[Mapping] | None = None, truth_path=None) -> None:
    """Learner-visible rows go to ``path``; hidden ground truth only to ``truth_path``."""
    with open(path, "w") as fh:
        for x, c in dataset.rows():
            fh.write(json.dumps({"features": x, "label": c}) + "\n")
    if truth is not None:
        if truth_path is None:
            raise ValueError("ground truth needs its own file")
        with open(truth_path, "w") as fh:
            for row in truth:
                fh.write(json.dumps({"truth": dict(row)}, sort_keys=True) + "\n")


def read_jsonl(path, feature_names: Sequence[str] | None = None, n_classes: int | None = None) -> Dataset:
    rows = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                rows.append((obj["features"], int(obj["label"])))
    arity = len(rows[0][0]) if rows else len(feature_names or [])
    names = list(feature_names) if feature_names is not None else [f"x{i}" for i in range(arity)]
    if n_classes is None:
        n_classes = max(2, max((c for _, c in rows), default=0) + 1)
    return Dataset.from_rows(names, rows, n_classes)


def read_truth_jsonl(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line)["truth"] for line in fh if line.strip()]
