"""IBSEAD as a supervised classifier over observation streams.

The CB reads visible feature entities through channels of varying quality and
also feels a net effect that includes entities it cannot see.  Fitting runs
the algorithm's steps over the training cases:

* visible channels are grouped by reading correlation and each group is
  summarised by its quality-weighted average reading;
* the felt effect is regressed on the group readings, trimming cases whose
  residual is too large to be read noise.  Those cases are attributed to an
  Invisible entity; the spread of what remains is the unknown-risk reserve;
* per-class group profiles and a pooled covariance are estimated from the
  cases the visible entities explain.

At prediction time a channel's degraded quality inflates its variance by the
read-noise it implies, so a blocked channel carries little evidence.  When a
case's felt residual exceeds the trimming threshold and enough Invisible cases
were seen in training, the class is read off the felt effect instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .learner import LearnerParams, correlation_groups
from .world import Observation

MISSING_VAR = 1e8
SHRINK = 0.1
TRIM_SIGMAS = 3.0
MAD_TO_SIGMA = 1.4826


@dataclass(frozen=True, eq=False)
class IbseadClassifier:
    params: LearnerParams
    n_classes: int
    feature_keys: tuple[tuple[int, str], ...]
    center: np.ndarray
    scale: np.ndarray
    noise_scale: np.ndarray  # full-blockage read-noise magnitude, standardised units
    groups: tuple[tuple[int, ...], ...]
    class_means: np.ndarray  # (C, G)
    covariance: np.ndarray  # (G, G)
    log_prior: np.ndarray
    felt_coef: np.ndarray | None = None  # intercept first
    threshold: float = float("inf")
    unknown_reserve: float = 0.0
    invisible_active: bool = False
    felt_means: np.ndarray = field(default_factory=lambda: np.zeros(0))
    felt_var: float = 1.0
    n_flagged: int = 0


def observation_matrix(observations: Sequence[Observation], feature_keys) -> tuple[np.ndarray, np.ndarray]:
    """Readings (NaN where undetected) and channel qualities (0 where undetected)."""
    R = np.full((len(observations), len(feature_keys)), np.nan)
    Q = np.zeros_like(R)
    for i, obs in enumerate(observations):
        for j, (eid, name) in enumerate(feature_keys):
            if (eid, name) in obs.readings:
                R[i, j] = obs.readings[(eid, name)]
                Q[i, j] = obs.qualities.get(eid, 0.0)
    return R, Q


def felt_vector(observations: Sequence[Observation]) -> np.ndarray:
    return np.array([float(np.sum(o.felt_effect)) for o in observations])


def _group_readings(parts, R, Q):
    center, scale, noise_scale, groups = parts
    Z = (R - center) / scale
    NV = ((1.0 - Q) * noise_scale) ** 2 / 3.0
    missing = np.isnan(Z)
    Z = np.where(missing, 0.0, Z)
    W = np.where(missing, 0.0, Q)
    NV = np.where(missing, MISSING_VAR, NV)

    n = len(R)
    G = np.zeros((n, len(groups)))
    GV = np.zeros((n, len(groups)))
    for g, members in enumerate(groups):
        m = list(members)
        w = W[:, m]
        tot = w.sum(axis=1)
        empty = tot <= 0.0
        safe = np.where(empty, 1.0, tot)[:, None]
        frac = w / safe
        G[:, g] = np.where(empty, 0.0, (frac * Z[:, m]).sum(axis=1))
        GV[:, g] = np.where(empty, MISSING_VAR, (frac**2 * NV[:, m]).sum(axis=1))
    return G, GV


def _robust_felt_fit(X, felt, tau, max_rounds=20):
    keep = np.ones(len(felt), dtype=bool)
    coef = np.zeros(X.shape[1])
    thr = float("inf")
    sigma = 0.0
    for _ in range(max_rounds):
        coef, *_ = np.linalg.lstsq(X[keep], felt[keep], rcond=None)
        r = felt - X @ coef
        kr = r[keep]
        sigma = MAD_TO_SIGMA * float(np.median(np.abs(kr - np.median(kr))))
        if sigma == 0.0:
            sigma = float(kr.std())
        thr = max(tau, TRIM_SIGMAS * sigma)
        new_keep = np.abs(r) <= thr
        if np.array_equal(new_keep, keep) or new_keep.sum() <= X.shape[1]:
            break
        keep = new_keep
    return coef, thr, sigma, keep


def ibsead_fit(
    observations: Sequence[Observation],
    labels,
    n_classes: int,
    feature_keys: Sequence[tuple[int, str]],
    attribute_scales: Sequence[float] | None = None,
    params: LearnerParams | None = None,
) -> IbseadClassifier:
    params = params or LearnerParams()
    y = np.asarray(labels, dtype=int)
    keys = tuple((int(e), str(a)) for e, a in feature_keys)
    R, Q = observation_matrix(observations, keys)
    center = np.nanmean(R, axis=0)
    scale = np.nanstd(R, axis=0)
    scale = np.where((scale > 0) & np.isfinite(scale), scale, 1.0)
    center = np.where(np.isfinite(center), center, 0.0)
    raw_scales = np.ones(len(keys)) if attribute_scales is None else np.asarray(attribute_scales, dtype=float)
    noise_scale = raw_scales / scale

    Z = (R - center) / scale
    complete = ~np.isnan(Z).any(axis=1)
    series = {j: Z[complete, j] for j in range(len(keys))}
    groups = tuple(tuple(sorted(g)) for g in correlation_groups(series, range(len(keys)), params.rho))
    G, _ = _group_readings((center, scale, noise_scale, groups), R, Q)

    felt = felt_vector(observations)
    felt_coef = None
    threshold = float("inf")
    reserve = 0.0
    keep = np.ones(len(y), dtype=bool)
    if felt.std() > 1e-12:
        X = np.column_stack([np.ones(len(G)), G])
        felt_coef, threshold, sigma, keep = _robust_felt_fit(X, felt, params.tau)
        reserve = sigma**2
    n_flagged = int((~keep).sum())
    invisible_active = felt_coef is not None and n_flagged >= params.window

    means = np.zeros((n_classes, len(groups)))
    resid = []
    for c in range(n_classes):
        rows = (y == c) & keep
        if not rows.any():
            rows = y == c
        if rows.any():
            means[c] = G[rows].mean(axis=0)
            resid.append(G[rows] - means[c])
    resid = np.vstack(resid)
    S = resid.T @ resid / max(len(resid), 1)
    S = (1 - SHRINK) * S + SHRINK * np.diag(np.diag(S)) + 1e-6 * np.eye(len(groups))

    counts = np.bincount(y, minlength=n_classes).astype(float)
    with np.errstate(divide="ignore"):
        log_prior = np.log(counts / counts.sum())

    felt_means = np.array([felt[y == c].mean() if (y == c).any() else np.nan for c in range(n_classes)])
    dev = np.concatenate([felt[y == c] - felt_means[c] for c in range(n_classes) if (y == c).any()])
    felt_var = max(float(dev.var()), 1e-12)

    return IbseadClassifier(
        params=params,
        n_classes=n_classes,
        feature_keys=keys,
        center=center,
        scale=scale,
        noise_scale=noise_scale,
        groups=groups,
        class_means=means,
        covariance=S,
        log_prior=log_prior,
        felt_coef=felt_coef,
        threshold=threshold,
        unknown_reserve=reserve,
        invisible_active=invisible_active,
        felt_means=felt_means,
        felt_var=felt_var,
        n_flagged=n_flagged,
    )


def felt_residuals(model: IbseadClassifier, observations: Sequence[Observation]) -> np.ndarray:
    R, Q = observation_matrix(observations, model.feature_keys)
    G, _ = _group_readings((model.center, model.scale, model.noise_scale, model.groups), R, Q)
    felt = felt_vector(observations)
    if model.felt_coef is None:
        return np.zeros(len(felt))
    return felt - np.column_stack([np.ones(len(G)), G]) @ model.felt_coef


def ibsead_scores(model: IbseadClassifier, observations: Sequence[Observation]) -> tuple[np.ndarray, np.ndarray]:
    """Per-class log scores and a mask of cases attributed to an Invisible entity."""
    R, Q = observation_matrix(observations, model.feature_keys)
    G, GV = _group_readings((model.center, model.scale, model.noise_scale, model.groups), R, Q)
    scores = np.zeros((len(G), model.n_classes))
    for i in range(len(G)):
        cov = model.covariance + np.diag(GV[i])
        d = G[i][None, :] - model.class_means
        sol = np.linalg.solve(cov, d.T)
        scores[i] = -0.5 * np.einsum("cg,gc->c", d, sol) + model.log_prior

    invisible = np.zeros(len(G), dtype=bool)
    if model.invisible_active:
        felt = felt_vector(observations)
        r = felt - np.column_stack([np.ones(len(G)), G]) @ model.felt_coef
        invisible = np.abs(r) > model.threshold
        if invisible.any():
            ok = np.isfinite(model.felt_means)
            fs = np.full((invisible.sum(), model.n_classes), -np.inf)
            diff = felt[invisible][:, None] - model.felt_means[ok][None, :]
            fs[:, ok] = -0.5 * diff**2 / model.felt_var + model.log_prior[ok]
            scores[invisible] = fs
    return scores, invisible


def ibsead_predict(model: IbseadClassifier, observation: Observation) -> int:
    scores, _ = ibsead_scores(model, [observation])
    return int(np.argmax(scores[0]))


def ibsead_predict_many(model: IbseadClassifier, observations: Sequence[Observation]) -> np.ndarray:
    scores, _ = ibsead_scores(model, observations)
    return np.argmax(scores, axis=1)
