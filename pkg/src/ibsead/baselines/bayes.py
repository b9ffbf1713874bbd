"""Gaussian naive Bayes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientClassData
from .dataset import Dataset

VAR_FLOOR = 1e-6


@dataclass(frozen=True, eq=False)
class GaussianNB:
    log_prior: np.ndarray  # (C,)
    means: np.ndarray  # (C, d)
    variances: np.ndarray  # (C, d)

    def to_dict(self) -> dict:
        return {"log_prior": self.log_prior.tolist(), "means": self.means.tolist(), "variances": self.variances.tolist()}

    @classmethod
    def from_dict(cls, d) -> "GaussianNB":
        return cls(*(np.asarray(d[k], dtype=float) for k in ("log_prior", "means", "variances")))


def nb_train(data: Dataset) -> GaussianNB:
    counts = np.bincount(data.labels, minlength=data.n_classes)
    short = [c for c in range(data.n_classes) if counts[c] < 2]
    if short:
        raise InsufficientClassData(f"classes {short} have fewer than 2 rows")
    means = np.array([data.features[data.labels == c].mean(axis=0) for c in range(data.n_classes)])
    var = np.array([data.features[data.labels == c].var(axis=0) for c in range(data.n_classes)])
    return GaussianNB(np.log(counts / counts.sum()), means, np.maximum(var, VAR_FLOOR))


def nb_log_posterior(model: GaussianNB, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    ll = -0.5 * (np.log(2 * np.pi * model.variances) + (x - model.means) ** 2 / model.variances).sum(axis=1)
    return model.log_prior + ll


def nb_predict(model: GaussianNB, x) -> int:
    # argmax returns the first maximum, so ties resolve to the lower label
    return int(np.argmax(nb_log_posterior(model, x)))
