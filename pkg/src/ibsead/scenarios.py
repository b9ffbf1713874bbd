"""Deterministic scenario generators.

Every generator builds a :class:`~ibsead.world.World`, steps it once per case
(or tick, or episode) and records two views of each step: the learner-visible
dataset row (detected readings only) and the CB's full observation, which
also carries channel qualities and the felt effect.  Hidden drivers live in
``world.truth`` and the per-row ``truth`` records only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Mapping

import numpy as np

from .baselines.dataset import Dataset
from .world import (
    BlockageAgent,
    BlockageKind,
    Entity,
    Env,
    InteractionLink,
    Observation,
    VisibilityClass,
    World,
    make_world,
    step_world,
)

SCENARIOS = ("visual", "loans", "stock", "train_route")

DEFAULTS: dict[str, dict[str, Any]] = {
    "visual": {
        "hidden_strength": 0.9,
        "train_per_class": 20,
        "test_per_class": 10,
        "n_features": 16,
        "noise_fraction": 0.3,
        "blocked_fraction": 0.5,
        "noise_scale": 20.0,
        "class_separation": 1.0,
    },
    "loans": {
        "hidden_strength": 0.5,
        "n_rows": 500,
        "volatile_fraction": 0.2,
        "test_fraction": 0.2,
        "market_noise": 0.5,
    },
    "stock": {
        "hidden_strength": 0.5,
        "n_ticks": 400,
        "test_fraction": 0.3,
        "shock_rate": 0.04,
        "shock_length": [5, 10],
        "shocks": None,
    },
    "train_route": {
        "hidden_strength": 0.5,
        "n_episodes": 300,
        "test_fraction": 0.3,
        "rain_prob": 0.3,
        "rust_gain": 0.5,
        "rust_decay": 0.2,
        "delay_threshold": 12.0,
        "rain": None,
    },
}

VISUAL_CLASSES = ("dog", "cat", "table")
LOAN_FIELDS = ("Income", "Advance EMI", "Rent", "Qualifications", "Dependents", "Experience")
LOAN_HIDDEN = ("black_money_income", "influence", "corruption")


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    seed: int = 0
    hidden_strength: float | None = None
    params: Mapping[str, Any] = field(default_factory=dict)
    # report label; defaults to the scenario name
    label: str | None = None

    def __post_init__(self):
        if self.name not in SCENARIOS:
            from .errors import UnknownScenario

            raise UnknownScenario(self.name)
        hs = self.resolved("hidden_strength")
        if not 0.0 <= hs <= 1.0:
            raise ValueError("hidden_strength must lie in [0, 1]")
        unknown = set(self.params) - set(DEFAULTS[self.name])
        if unknown:
            from .errors import InvalidConfig

            raise InvalidConfig(sorted(unknown)[0], f"unknown {self.name} parameter {sorted(unknown)[0]!r}")

    def resolved(self, key: str):
        if key == "hidden_strength" and self.hidden_strength is not None:
            return self.hidden_strength
        return self.params.get(key, DEFAULTS[self.name][key])

    @property
    def display(self) -> str:
        return self.label or self.name


@dataclass(eq=False)
class ScenarioData:
    name: str
    world: World
    train: Dataset
    test: Dataset
    train_obs: list[Observation]
    test_obs: list[Observation]
    feature_keys: list[tuple[int, str]]
    attribute_scales: np.ndarray
    test_hidden: np.ndarray  # rows touched by hidden structure (corrupted/volatile/shocked)
    train_truth: list[dict] = field(default_factory=list)
    test_truth: list[dict] = field(default_factory=list)
    log: list[dict] = field(default_factory=list)


def _rng(cfg: ScenarioConfig, stream: int = 0) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, SCENARIOS.index(cfg.name), stream])


def _features(obs: Observation, keys) -> list[float]:
    # an undetected channel reads as 0.0 for learners that need a number
    return [obs.readings.get(k, 0.0) for k in keys]


def _cb(dim: int = 1) -> Entity:
    return Entity(0, Env.INTERNAL, VisibilityClass.KNOWN, {}, (0.0,) * dim)


# -- visual ------------------------------------------------------------------------

def gen_visual(cfg: ScenarioConfig) -> ScenarioData:
    """Three clustered object classes sensed through 16 channels.

    Corrupted test rows have a share of their channels blocked by a Noise
    entity, which lowers channel quality and therefore widens read noise.
    """
    rng = _rng(cfg)
    p = {k: cfg.resolved(k) for k in DEFAULTS["visual"]}
    F = int(p["n_features"])
    strength = float(p["hidden_strength"])
    n_classes = len(VISUAL_CLASSES)
    centers = rng.normal(0.0, p["class_separation"], size=(n_classes, F))

    def draw(per_class):
        y = np.repeat(np.arange(n_classes), per_class)
        X = centers[y] + rng.normal(size=(len(y), F))
        order = rng.permutation(len(y))
        return X[order], y[order]

    Xtr, ytr = draw(int(p["train_per_class"]))
    Xte, yte = draw(int(p["test_per_class"]))
    n_test = len(yte)
    n_corrupt = int(round(p["noise_fraction"] * n_test))
    corrupted = np.zeros(n_test, dtype=bool)
    corrupted[rng.permutation(n_test)[:n_corrupt]] = True
    n_blocked = int(round(p["blocked_fraction"] * F))
    blocked = [sorted(rng.choice(F, n_blocked, replace=False).tolist()) if c else [] for c in corrupted]

    noise_id = F + 1
    feature_ids = list(range(1, F + 1))
    entities = [_cb()] + [
        Entity(i, Env.EXTERNAL, VisibilityClass.KNOWN, {"value": 0.0}, (0.0,), attribute_scales={"value": p["noise_scale"]})
        for i in feature_ids
    ] + [Entity(noise_id, Env.EXTERNAL, VisibilityClass.UNKNOWN, {}, (0.0,))]
    clean_links = tuple(InteractionLink(0, i) for i in feature_ids)
    world = make_world(entities, clean_links, rng_seed=cfg.seed)
    keys = [(i, "value") for i in feature_ids]

    def sense(world, x, blocked_channels):
        links = tuple(
            InteractionLink(0, i, blockages=(BlockageAgent(BlockageKind.NOISE, strength),))
            if (i - 1) in blocked_channels else InteractionLink(0, i)
            for i in feature_ids
        )
        world = world.update_entities({i: {"attributes": {"value": float(x[i - 1])}} for i in feature_ids})
        world = replace(world, links=links)
        return step_world(world)

    train_obs, test_obs = [], []
    for x in Xtr:
        world, obs = sense(world, x, [])
        train_obs.append(obs)
    for x, b in zip(Xte, blocked):
        world, obs = sense(world, x, b)
        test_obs.append(obs)
    world = replace(world, links=clean_links, truth={
        "classes": list(VISUAL_CLASSES),
        "noise_entity": noise_id,
        "corrupted_test_rows": np.flatnonzero(corrupted).tolist(),
        "blocked_channels": blocked,
    })

    names = [f"channel_{i}" for i in range(F)]
    train = Dataset(names, [_features(o, keys) for o in train_obs], ytr, n_classes)
    test = Dataset(names, [_features(o, keys) for o in test_obs], yte, n_classes)
    return ScenarioData(
        "visual", world, train, test, train_obs, test_obs, keys,
        np.full(F, float(p["noise_scale"])), corrupted,
        [{"corrupted": False}] * len(ytr),
        [{"corrupted": bool(c), "blocked_channels": b} for c, b in zip(corrupted, blocked)],
    )


# -- loans ------------------------------------------------------------------------------

INCOME_LOG_MEAN, INCOME_LOG_SD = 10.5, 0.4
EMI_BURDEN = (0.05, 0.45)
# population moments of Income and Advance EMI under the generator below
_INCOME_MEAN = math.exp(INCOME_LOG_MEAN + INCOME_LOG_SD**2 / 2)
_INCOME_SD = _INCOME_MEAN * math.sqrt(math.exp(INCOME_LOG_SD**2) - 1)
_B_MEAN = sum(EMI_BURDEN) / 2
_B_SQ = (EMI_BURDEN[1] - EMI_BURDEN[0]) ** 2 / 12 + _B_MEAN**2
_EMI_MEAN = _INCOME_MEAN * _B_MEAN / 12
_EMI_SD = math.sqrt((_INCOME_SD**2 + _INCOME_MEAN**2) * _B_SQ / 144 - _EMI_MEAN**2)
LOAN_RISK_WEIGHTS = {"Income": -0.4, "Advance EMI": 1.6}


def loan_visible_risk(x) -> float:
    """Default risk carried by the visible fields (positive means default)."""
    z_income = (x[0] - _INCOME_MEAN) / _INCOME_SD
    z_emi = (x[1] - _EMI_MEAN) / _EMI_SD
    return LOAN_RISK_WEIGHTS["Income"] * z_income + LOAN_RISK_WEIGHTS["Advance EMI"] * z_emi


def gen_loans(cfg: ScenarioConfig) -> ScenarioData:
    """Loan applications with a volatile share driven by hidden factors.

    Volatile cases carry black-money income, influence and corruption whose
    combined effect pushes the outcome against the visible trend by a margin
    that grows with ``hidden_strength``.  A market entity adds bounded noise to
    the felt effect only.
    """
    rng = _rng(cfg)
    p = {k: cfg.resolved(k) for k in DEFAULTS["loans"]}
    n = int(p["n_rows"])
    hs = float(p["hidden_strength"])
    margin = 1.0 + 2.0 * hs

    income = np.exp(rng.normal(INCOME_LOG_MEAN, INCOME_LOG_SD, n))
    emi = income * rng.uniform(*EMI_BURDEN, n) / 12
    rent = income * rng.uniform(0.05, 0.3, n) / 12
    qual = rng.integers(0, 5, n).astype(float)
    deps = rng.integers(0, 6, n).astype(float)
    exper = rng.integers(0, 31, n).astype(float)
    X = np.column_stack([income, emi, rent, qual, deps, exper])
    risk = np.array([loan_visible_risk(x) for x in X])

    volatile = np.zeros(n, dtype=bool)
    volatile[rng.permutation(n)[: int(round(p["volatile_fraction"] * n))]] = True
    trend = np.where(risk >= 0, 1.0, -1.0)
    hidden_total = np.where(volatile, -risk - trend * margin, 0.0)
    shares = rng.dirichlet(np.ones(len(LOAN_HIDDEN)), size=n)
    hidden = shares * hidden_total[:, None]
    market = rng.uniform(-p["market_noise"], p["market_noise"], n)
    labels = ((risk + hidden_total) > 0).astype(int)

    vis_ids = list(range(1, 7))
    hid_ids = [7, 8, 9]
    market_id = 10
    classes = [VisibilityClass.INVISIBLE, VisibilityClass.INVISIBLE, VisibilityClass.UNKNOWN]
    entities = (
        [_cb()]
        + [Entity(i, Env.EXTERNAL, VisibilityClass.KNOWN, {"value": 0.0}, (0.0,)) for i in vis_ids]
        + [Entity(i, Env.EXTERNAL, c, {}, (0.0,)) for i, c in zip(hid_ids, classes)]
        + [Entity(market_id, Env.EXTERNAL, VisibilityClass.UNKNOWN, {}, (0.0,))]
    )
    world = make_world(entities, [InteractionLink(0, i) for i in vis_ids], rng_seed=cfg.seed)
    keys = [(i, "value") for i in vis_ids]

    z_income = (income - _INCOME_MEAN) / _INCOME_SD
    z_emi = (emi - _EMI_MEAN) / _EMI_SD
    contrib = np.zeros((n, 6))
    contrib[:, 0] = LOAN_RISK_WEIGHTS["Income"] * z_income
    contrib[:, 1] = LOAN_RISK_WEIGHTS["Advance EMI"] * z_emi

    observations = []
    for r in range(n):
        updates = {i: {"attributes": {"value": float(X[r, i - 1])}, "true_impact": (float(contrib[r, i - 1]),)} for i in vis_ids}
        updates.update({i: {"true_impact": (float(hidden[r, j]),)} for j, i in enumerate(hid_ids)})
        updates[market_id] = {"true_impact": (float(market[r]),)}
        world, obs = step_world(world.update_entities(updates))
        observations.append(obs)

    truth = [
        {"volatile": bool(volatile[r]), **{h: float(hidden[r, j]) for j, h in enumerate(LOAN_HIDDEN)},
         "corruption_flag": bool(volatile[r] and hidden[r, 2] != 0.0)}
        for r in range(n)
    ]
    world = replace(world, truth={"volatile_rows": np.flatnonzero(volatile).tolist(), "margin": margin})
    n_test = int(round(p["test_fraction"] * n))
    split = n - n_test
    data = Dataset(list(LOAN_FIELDS), [_features(o, keys) for o in observations], labels, 2)
    return ScenarioData(
        "loans", world, data.subset(slice(0, split)), data.subset(slice(split, n)),
        observations[:split], observations[split:], keys, np.ones(6), volatile[split:],
        truth[:split], truth[split:],
    )


# -- stock -----------------------------------------------------------------------------------

TREND_WEIGHT, ACCOUNTS_WEIGHT = 0.6, 0.4


def _stock_shocks(cfg, p, rng, n_ticks) -> np.ndarray:
    shock = np.zeros(n_ticks + 2)
    hs = float(p["hidden_strength"])
    if p["shocks"] is not None:
        for start, length, magnitude in p["shocks"]:
            shock[int(start): int(start) + int(length)] += float(magnitude)
        return shock
    if hs == 0.0:
        return shock
    lo, hi = p["shock_length"]
    t = 0
    while t < n_ticks + 2:
        if rng.random() < p["shock_rate"]:
            length = int(rng.integers(lo, hi + 1))
            shock[t: t + length] += rng.choice([-1.0, 1.0]) * hs * rng.uniform(1.5, 3.0)
            t += length
        else:
            t += 1
    return shock


def gen_stock(cfg: ScenarioConfig) -> ScenarioData:
    """Share price driven by trend and company accounts plus insider-trading shocks.

    Each tick's felt effect is the realised price change; the label is the
    direction of the next change.
    """
    rng = _rng(cfg)
    p = {k: cfg.resolved(k) for k in DEFAULTS["stock"]}
    T = int(p["n_ticks"])
    trend = np.zeros(T + 2)
    accounts = np.zeros(T + 2)
    for t in range(1, T + 2):
        trend[t] = 0.9 * trend[t - 1] + rng.normal(0.0, 0.3)
        accounts[t] = rng.normal() if t % 20 == 1 else accounts[t - 1]
    shock = _stock_shocks(cfg, p, rng, T)
    change = np.zeros(T + 2)
    change[1:] = TREND_WEIGHT * trend[:-1] + ACCOUNTS_WEIGHT * accounts[:-1] + shock[1:]

    entities = [
        _cb(),
        Entity(1, Env.EXTERNAL, VisibilityClass.KNOWN, {"value": 0.0}, (0.0,)),
        Entity(2, Env.EXTERNAL, VisibilityClass.KNOWN, {"value": 0.0}, (0.0,)),
        Entity(3, Env.EXTERNAL, VisibilityClass.INVISIBLE, {}, (0.0,)),
    ]
    world = make_world(entities, [InteractionLink(0, 1), InteractionLink(0, 2)], rng_seed=cfg.seed)
    keys = [(1, "value"), (2, "value")]
    observations, labels = [], []
    for t in range(1, T + 1):
        world, obs = step_world(world.update_entities({
            1: {"attributes": {"value": float(trend[t])}, "true_impact": (TREND_WEIGHT * float(trend[t - 1]),)},
            2: {"attributes": {"value": float(accounts[t])}, "true_impact": (ACCOUNTS_WEIGHT * float(accounts[t - 1]),)},
            3: {"true_impact": (float(shock[t]),)},
        }))
        observations.append(obs)
        labels.append(int(change[t + 1] > 0))
    price = 100.0 + np.cumsum(change[: T + 2])
    truth = [{"shock": float(shock[t + 1]), "shocked": bool(shock[t + 1] != 0.0)} for t in range(1, T + 1)]
    world = replace(world, truth={"price": price.tolist(), "shock": shock.tolist()})

    data = Dataset(["trend", "accounts"], [_features(o, keys) for o in observations], labels, 2)
    split = T - int(round(p["test_fraction"] * T))
    shocked = np.array([t["shocked"] for t in truth])
    return ScenarioData(
        "stock", world, data.subset(slice(0, split)), data.subset(slice(split, T)),
        observations[:split], observations[split:], keys, np.ones(2), shocked[split:],
        truth[:split], truth[split:],
    )


# -- train route ------------------------------------------------------------------------------

RAIN_DELAY = 10.0
RUST_DELAY = 30.0


def rust_series(rain, gain: float, decay: float) -> np.ndarray:
    """Rust after each episode: ``rust[e] = (1 - decay) * rust[e-1] + gain * rain[e]``."""
    rust = np.zeros(len(rain))
    prev = 0.0
    for e, r in enumerate(rain):
        prev = (1.0 - decay) * prev + gain * r
        rust[e] = prev
    return rust


def gen_train_route(cfg: ScenarioConfig) -> ScenarioData:
    """Rain rusts engine parts and rails out of the CB's sight; rust delays trains.

    Before each ride the CB sees today's and the two previous days' rain and
    feels the previous ride's delay; the label is whether this ride is late.
    """
    rng = _rng(cfg)
    p = {k: cfg.resolved(k) for k in DEFAULTS["train_route"]}
    hs = float(p["hidden_strength"])
    if p["rain"] is not None:
        rain = np.asarray(p["rain"], dtype=float)
    else:
        E = int(p["n_episodes"])
        rain = (rng.random(E) < p["rain_prob"]) * rng.uniform(0.5, 1.5, E)
    E = len(rain)
    rust = rust_series(rain, p["rust_gain"], p["rust_decay"])
    delay = RAIN_DELAY * rain + hs * RUST_DELAY * rust
    delayed = (delay > p["delay_threshold"]).astype(int)
    hidden_delayed = (delay > p["delay_threshold"]) & (RAIN_DELAY * rain <= p["delay_threshold"])

    def lag(a, k, e):
        return float(a[e - k]) if e - k >= 0 else 0.0

    entities = [
        _cb(),
        Entity(1, Env.EXTERNAL, VisibilityClass.KNOWN, {"value": 0.0, "previous": 0.0, "previous2": 0.0}, (0.0,)),
        Entity(2, Env.EXTERNAL, VisibilityClass.UNKNOWN, {"rust": 0.0}, (0.0,)),
    ]
    world = make_world(entities, [InteractionLink(0, 1)], rng_seed=cfg.seed)
    keys = [(1, "value"), (1, "previous"), (1, "previous2")]
    observations = []
    for e in range(E):
        world, obs = step_world(world.update_entities({
            1: {"attributes": {"value": float(rain[e]), "previous": lag(rain, 1, e), "previous2": lag(rain, 2, e)},
                "true_impact": (RAIN_DELAY * lag(rain, 1, e),)},
            2: {"attributes": {"rust": lag(rust, 1, e)}, "true_impact": (hs * RUST_DELAY * lag(rust, 1, e),)},
        }))
        observations.append(obs)

    log = [{"episode": e, "rain": float(rain[e]), "delay": float(delay[e]), "delayed": int(delayed[e])} for e in range(E)]
    truth = [{"rust": float(rust[e]), "hidden_cause": bool(hidden_delayed[e])} for e in range(E)]
    world = replace(world, truth={"rust": rust.tolist()})
    names = ["rain", "rain_previous", "rain_previous2"]
    data = Dataset(names, [_features(o, keys) for o in observations], delayed, 2)
    split = E - int(round(p["test_fraction"] * E))
    return ScenarioData(
        "train_route", world, data.subset(slice(0, split)), data.subset(slice(split, E)),
        observations[:split], observations[split:], keys, np.ones(3), hidden_delayed[split:],
        truth[:split], truth[split:], log,
    )


GENERATORS = {"visual": gen_visual, "loans": gen_loans, "stock": gen_stock, "train_route": gen_train_route}


def generate(cfg: ScenarioConfig) -> ScenarioData:
    return GENERATORS[cfg.name](cfg)
