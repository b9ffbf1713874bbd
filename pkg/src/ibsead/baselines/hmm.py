"""Discrete hidden Markov model: scaled forward, Viterbi and Baum-Welch."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import EmptySequence, SymbolOutOfRange

STOCHASTIC_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class DiscreteHMM:
    pi: np.ndarray  # (N,)
    A: np.ndarray  # (N, N)
    B: np.ndarray  # (N, M)

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        n = len(pi)
        if A.shape != (n, n) or B.ndim != 2 or B.shape[0] != n:
            raise ValueError(f"inconsistent shapes pi{pi.shape} A{A.shape} B{B.shape}")
        for name, m in (("pi", pi[None, :]), ("A", A), ("B", B)):
            if np.any(m < 0) or np.any(np.abs(m.sum(axis=1) - 1.0) > STOCHASTIC_TOL):
                raise ValueError(f"{name} is not row-stochastic")
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n_states(self) -> int:
        return len(self.pi)

    @property
    def n_symbols(self) -> int:
        return self.B.shape[1]

    def __eq__(self, other):
        if not isinstance(other, DiscreteHMM):
            return NotImplemented
        return (
            np.array_equal(self.pi, other.pi)
            and np.array_equal(self.A, other.A)
            and np.array_equal(self.B, other.B)
        )

    def to_dict(self) -> dict:
        return {"pi": self.pi.tolist(), "A": self.A.tolist(), "B": self.B.tolist()}

    @classmethod
    def from_dict(cls, d) -> "DiscreteHMM":
        return cls(np.array(d["pi"]), np.array(d["A"]), np.array(d["B"]))


def random_hmm(n_states: int, n_symbols: int, rng: np.random.Generator) -> DiscreteHMM:
    return DiscreteHMM(
        rng.dirichlet(np.ones(n_states)),
        rng.dirichlet(np.ones(n_states), size=n_states),
        rng.dirichlet(np.ones(n_symbols), size=n_states),
    )


def _check(hmm: DiscreteHMM, obs) -> np.ndarray:
    obs = np.asarray(obs, dtype=int).reshape(-1)
    if len(obs) == 0:
        raise EmptySequence("observation sequence is empty")
    if obs.min() < 0 or obs.max() >= hmm.n_symbols:
        raise SymbolOutOfRange(f"symbols must lie in [0, {hmm.n_symbols})")
    return obs


def _forward_scaled(hmm: DiscreteHMM, obs: np.ndarray):
    T, N = len(obs), hmm.n_states
    alpha = np.zeros((T, N))
    scale = np.zeros(T)
    a = hmm.pi * hmm.B[:, obs[0]]
    for t in range(T):
        if t > 0:
            a = (alpha[t - 1] @ hmm.A) * hmm.B[:, obs[t]]
        scale[t] = a.sum()
        if scale[t] == 0.0:
            return alpha, scale
        alpha[t] = a / scale[t]
    return alpha, scale


def hmm_forward(hmm: DiscreteHMM, obs: Sequence[int]) -> float:
    """log P(obs | hmm); ``-inf`` for impossible sequences."""
    obs = _check(hmm, obs)
    _, scale = _forward_scaled(hmm, obs)
    if np.any(scale == 0.0):
        return float("-inf")
    return float(np.log(scale).sum())


def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


def hmm_viterbi(hmm: DiscreteHMM, obs: Sequence[int]) -> list[int]:
    """Most probable state path; ties go to the lower state index."""
    obs = _check(hmm, obs)
    T, N = len(obs), hmm.n_states
    logA, logB = _log(hmm.A), _log(hmm.B)
    delta = _log(hmm.pi) + logB[:, obs[0]]
    back = np.zeros((T, N), dtype=int)
    for t in range(1, T):
        cand = delta[:, None] + logA  # (from, to)
        back[t] = np.argmax(cand, axis=0)
        delta = cand[back[t], np.arange(N)] + logB[:, obs[t]]
    path = [int(np.argmax(delta))]
    for t in range(T - 1, 0, -1):
        path.append(int(back[t, path[-1]]))
    return path[::-1]


def path_log_prob(hmm: DiscreteHMM, obs: Sequence[int], path: Sequence[int]) -> float:
    obs = np.asarray(obs)
    lp = _log(hmm.pi[path[0]]) + _log(hmm.B[path[0], obs[0]])
    for t in range(1, len(obs)):
        lp += _log(hmm.A[path[t - 1], path[t]]) + _log(hmm.B[path[t], obs[t]])
    return float(lp)


def _expected_counts(hmm: DiscreteHMM, obs: np.ndarray):
    T, N = len(obs), hmm.n_states
    alpha, scale = _forward_scaled(hmm, obs)
    if np.any(scale == 0.0):
        raise ValueError("sequence has zero probability under the model")
    beta = np.zeros((T, N))
    beta[-1] = 1.0
    for t in range(T - 2, -1, -1):
        beta[t] = (hmm.A @ (hmm.B[:, obs[t + 1]] * beta[t + 1])) / scale[t + 1]
    gamma = alpha * beta
    gamma /= gamma.sum(axis=1, keepdims=True)
    xi_sum = np.zeros((N, N))
    for t in range(T - 1):
        xi = alpha[t][:, None] * hmm.A * (hmm.B[:, obs[t + 1]] * beta[t + 1])[None, :] / scale[t + 1]
        xi_sum += xi
    emit = np.zeros((N, hmm.n_symbols))
    for t in range(T):
        emit[:, obs[t]] += gamma[t]
    return gamma[0], xi_sum, gamma[:-1].sum(axis=0), emit, gamma.sum(axis=0)


def hmm_baum_welch(hmm: DiscreteHMM, obs, iters: int) -> DiscreteHMM:
    """EM re-estimation over one sequence or a list of sequences.

    Rows whose expected occupancy is zero keep their previous values.
    """
    if iters < 0:
        raise ValueError("iters must be >= 0")
    if len(obs) and np.ndim(obs[0]) == 0:
        seqs = [_check(hmm, obs)]
    else:
        seqs = [_check(hmm, o) for o in obs]
        if not seqs:
            raise EmptySequence("no sequences given")
    model = hmm
    N, M = hmm.n_states, hmm.n_symbols
    for _ in range(iters):
        pi_acc = np.zeros(N)
        xi_acc = np.zeros((N, N))
        from_acc = np.zeros(N)
        emit_acc = np.zeros((N, M))
        occ_acc = np.zeros(N)
        for s in seqs:
            g0, xi, g_from, emit, occ = _expected_counts(model, s)
            pi_acc += g0
            xi_acc += xi
            from_acc += g_from
            emit_acc += emit
            occ_acc += occ
        pi = pi_acc / pi_acc.sum()
        A = model.A.copy()
        ok = from_acc > 0
        A[ok] = xi_acc[ok] / from_acc[ok, None]
        B = model.B.copy()
        ok = occ_acc > 0
        B[ok] = emit_acc[ok] / occ_acc[ok, None]
        # renormalise away rounding drift
        A /= A.sum(axis=1, keepdims=True)
        B /= B.sum(axis=1, keepdims=True)
        model = DiscreteHMM(pi / pi.sum(), A, B)
    return model


@dataclass(frozen=True, eq=False)
class HmmClassifier:
    """One HMM per class over rows read as symbol sequences (quantile-binned features)."""

    edges: np.ndarray  # (d, M-1) bin edges per feature
    models: tuple[DiscreteHMM, ...]
    log_prior: np.ndarray

    def symbols(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.array([np.searchsorted(self.edges[f], x[f], side="right") for f in range(len(x))])


def hmm_classifier_train(
    data,
    n_states: int = 2,
    n_symbols: int = 3,
    iters: int = 20,
    seed: int = 0,
    smoothing: float = 1e-3,
) -> HmmClassifier:
    qs = np.linspace(0, 1, n_symbols + 1)[1:-1]
    edges = np.quantile(data.features, qs, axis=0).T.reshape(data.arity, n_symbols - 1)
    proto = HmmClassifier(edges, (), np.zeros(0))
    seqs = np.array([proto.symbols(x) for x in data.features]).reshape(len(data), data.arity)
    rng = np.random.default_rng(seed)
    models = []
    counts = np.bincount(data.labels, minlength=data.n_classes)
    for c in range(data.n_classes):
        init = random_hmm(n_states, n_symbols, rng)
        rows = seqs[data.labels == c]
        model = hmm_baum_welch(init, list(rows), iters) if len(rows) else init
        B = (1 - smoothing) * model.B + smoothing / n_symbols
        models.append(DiscreteHMM(model.pi, model.A, B))
    with np.errstate(divide="ignore"):
        log_prior = np.log(counts / counts.sum())
    return HmmClassifier(edges, tuple(models), log_prior)


def hmm_classifier_predict(clf: HmmClassifier, x) -> int:
    seq = clf.symbols(x)
    scores = [lp + hmm_forward(m, seq) for lp, m in zip(clf.log_prior, clf.models)]
    return int(np.argmax(scores))
