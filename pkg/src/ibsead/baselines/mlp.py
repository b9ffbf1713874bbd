"""One-hidden-layer perceptron: logistic hidden units, softmax head, full-batch descent."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import EmptyDataset
from .dataset import Dataset

PARAM_NAMES = ("W1", "b1", "W2", "b2")


@dataclass(frozen=True, eq=False)
class TinyMLP:
    W1: np.ndarray  # (d, H)
    b1: np.ndarray  # (H,)
    W2: np.ndarray  # (H, C)
    b2: np.ndarray  # (C,)
    # input standardisation fitted on the training rows
    mean: np.ndarray
    std: np.ndarray

    @property
    def hidden(self) -> int:
        return self.W1.shape[1]

    def params(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k) for k in PARAM_NAMES}

    def flat(self) -> np.ndarray:
        return np.concatenate([getattr(self, k).ravel() for k in PARAM_NAMES])

    def with_flat(self, theta: np.ndarray) -> "TinyMLP":
        out, i = {}, 0
        for k in PARAM_NAMES:
            shape = getattr(self, k).shape
            size = int(np.prod(shape))
            out[k] = np.asarray(theta[i:i + size], dtype=float).reshape(shape)
            i += size
        return replace(self, **out)

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in PARAM_NAMES + ("mean", "std")}

    @classmethod
    def from_dict(cls, d) -> "TinyMLP":
        return cls(**{k: np.asarray(d[k], dtype=float) for k in PARAM_NAMES + ("mean", "std")})


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _log_softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def mlp_init(n_in: int, hidden: int, n_out: int, seed: int, mean=None, std=None) -> TinyMLP:
    rng = np.random.default_rng(seed)
    return TinyMLP(
        W1=rng.normal(0.0, 1.0 / np.sqrt(n_in), size=(n_in, hidden)),
        b1=np.zeros(hidden),
        W2=rng.normal(0.0, 1.0 / np.sqrt(hidden), size=(hidden, n_out)),
        b2=np.zeros(n_out),
        mean=np.zeros(n_in) if mean is None else np.asarray(mean, dtype=float),
        std=np.ones(n_in) if std is None else np.asarray(std, dtype=float),
    )


def mlp_loss_and_grad(mlp: TinyMLP, X: np.ndarray, y: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy and its gradient with respect to every weight."""
    Z = (np.asarray(X, dtype=float) - mlp.mean) / mlp.std
    n = len(Z)
    h = sigmoid(Z @ mlp.W1 + mlp.b1)
    logp = _log_softmax(h @ mlp.W2 + mlp.b2)
    loss = -float(logp[np.arange(n), y].mean())

    d_out = np.exp(logp)
    d_out[np.arange(n), y] -= 1.0
    d_out /= n
    d_h = (d_out @ mlp.W2.T) * h * (1.0 - h)
    grads = {
        "W2": h.T @ d_out,
        "b2": d_out.sum(axis=0),
        "W1": Z.T @ d_h,
        "b1": d_h.sum(axis=0),
    }
    return loss, grads


def mlp_train(
    data: Dataset,
    hidden: int = 16,
    epochs: int = 500,
    lr: float = 0.5,
    seed: int = 0,
    return_losses: bool = False,
):
    if len(data) == 0:
        raise EmptyDataset("cannot train on zero rows")
    if hidden < 1 or lr <= 0:
        raise ValueError("need hidden >= 1 and lr > 0")
    X, y = data.features, data.labels
    std = X.std(axis=0)
    std[std == 0.0] = 1.0
    mlp = mlp_init(data.arity, hidden, data.n_classes, seed, X.mean(axis=0), std)
    losses = []
    for _ in range(epochs):
        loss, g = mlp_loss_and_grad(mlp, X, y)
        losses.append(loss)
        mlp = replace(mlp, **{k: getattr(mlp, k) - lr * g[k] for k in PARAM_NAMES})
    return (mlp, losses) if return_losses else mlp


def mlp_predict(mlp: TinyMLP, x) -> np.ndarray:
    """Class probabilities for one row (or a batch of rows)."""
    X = np.atleast_2d(np.asarray(x, dtype=float))
    Z = (X - mlp.mean) / mlp.std
    h = sigmoid(Z @ mlp.W1 + mlp.b1)
    p = np.exp(_log_softmax(h @ mlp.W2 + mlp.b2))
    return p[0] if np.ndim(x) == 1 else p
