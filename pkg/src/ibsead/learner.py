"""The IBSEAD tick learner.

Each tick the CB scans what it detected, (re)classifies its beliefs as Known,
Invisible or Unknown, maps believed entities into groups, and learns group
impacts through at most one gated interaction.  Persistent unexplained felt
effect is attributed to synthetic Invisible entities; whatever is never
attributed accumulates in a scalar unknown-risk reserve.

All operations are pure: they take a :class:`BeliefModel` and return a new one.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import GateClosed
from .world import (
    InteractionLink,
    Observation,
    VisibilityClass,
    World,
    can_interact,
    effective_quality,
    step_world,
)


@dataclass(frozen=True)
class LearnerParams:
    alpha: float = 0.3
    tau: float = 0.1
    window: int = 5
    rho: float = 0.9

    def __post_init__(self):
        # alpha == 0 is the frozen, no-learning limit
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha {self.alpha} outside [0, 1]")
        if not self.tau > 0:
            raise ValueError("tau must be > 0")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError("rho must be a correlation value")


@dataclass(frozen=True)
class BeliefEntity:
    id: int
    believed_class: VisibilityClass
    impact_estimate: tuple[float, ...]
    confidence: float = 0.0
    last_seen_tick: int = 0

    @property
    def synthetic(self) -> bool:
        return self.id < 0


@dataclass(frozen=True)
class BeliefModel:
    params: LearnerParams = field(default_factory=LearnerParams)
    beliefs: Mapping[int, BeliefEntity] = field(default_factory=dict)
    group_map: Mapping[int, frozenset[int]] = field(default_factory=dict)
    group_impacts: Mapping[int, tuple[float, ...]] = field(default_factory=dict)
    unknown_reserve: float = 0.0
    residual_window: tuple[tuple[float, ...], ...] = ()
    next_synthetic_id: int = -1

    def group_of(self, entity_id: int) -> int | None:
        for gid, members in self.group_map.items():
            if entity_id in members:
                return gid
        return None

    def invisible_beliefs(self) -> list[BeliefEntity]:
        return [
            b for k, b in sorted(self.beliefs.items())
            if b.synthetic and b.believed_class is VisibilityClass.INVISIBLE
        ]


def _zeros(dim: int) -> tuple[float, ...]:
    return (0.0,) * dim


def _dim(obs: Observation) -> int:
    return len(obs.outcome)


# -- step 1 ---------------------------------------------------------------------

def scan_physical_scope(observation: Observation, world_view=None) -> frozenset[int]:
    """Entities the CB can scan this tick: exactly what the world let it detect."""
    return frozenset(observation.detected)


# -- step 2 ---------------------------------------------------------------------

def classify_beliefs(model: BeliefModel, observation: Observation) -> BeliefModel:
    k = model.params.window
    dim = _dim(observation)
    beliefs = dict(model.beliefs)
    group_map = dict(model.group_map)
    group_impacts = dict(model.group_impacts)

    for eid in sorted(observation.detected):
        prior = beliefs.get(eid)
        if prior is None:
            beliefs[eid] = BeliefEntity(eid, VisibilityClass.KNOWN, _zeros(dim), 0.0, observation.tick)
            if model.group_of(eid) is None:
                group_map[eid] = frozenset({eid})
                group_impacts[eid] = _zeros(dim)
        else:
            beliefs[eid] = replace(prior, believed_class=VisibilityClass.KNOWN, last_seen_tick=observation.tick)

    for eid, b in list(beliefs.items()):
        if b.synthetic or eid in observation.detected:
            continue
        if observation.tick - b.last_seen_tick > k:
            has_effect = any(v != 0.0 for v in b.impact_estimate)
            cls = VisibilityClass.INVISIBLE if has_effect else VisibilityClass.UNKNOWN
            if cls is not b.believed_class:
                beliefs[eid] = replace(b, believed_class=cls)

    return replace(model, beliefs=beliefs, group_map=group_map, group_impacts=group_impacts)


# -- step 3 ---------------------------------------------------------------------

def pearson(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Pearson correlation, or None when either series is constant."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dx = x - x.mean()
    dy = y - y.mean()
    sx = math.sqrt(float(dx @ dx))
    sy = math.sqrt(float(dy @ dy))
    if sx == 0.0 or sy == 0.0:
        return None
    return float(dx @ dy) / (sx * sy)


def correlation_groups(series: Mapping[int, Sequence[float]], ids: Iterable[int], rho: float) -> list[frozenset[int]]:
    """Partition ``ids`` by transitive closure of pairwise correlation >= rho.

    Ids without a usable series stay singletons.
    """
    ids = sorted(ids)
    parent = {i: i for i in ids}

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    usable = [i for i in ids if i in series and len(series[i]) >= 2]
    for a_pos, a in enumerate(usable):
        for b in usable[a_pos + 1:]:
            if len(series[a]) != len(series[b]):
                continue
            r = pearson(series[a], series[b])
            if r is not None and r >= rho:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)

    buckets: dict[int, set[int]] = {}
    for i in ids:
        buckets.setdefault(find(i), set()).add(i)
    return [frozenset(buckets[r]) for r in sorted(buckets)]


def map_groups(model: BeliefModel, correlation_history: Mapping[int, Sequence[float]]) -> BeliefModel:
    """Regroup believed (non-synthetic) entities by reading correlation.

    A new group's impact is the sum of its members' per-member estimates, so
    the total believed impact is preserved across regrouping.
    """
    real_ids = [i for i in model.beliefs if i >= 0]
    if not real_ids:
        return model
    partition = correlation_groups(correlation_history, real_ids, model.params.rho)
    dim = len(next(iter(model.beliefs.values())).impact_estimate)

    beliefs = dict(model.beliefs)
    group_map: dict[int, frozenset[int]] = {}
    group_impacts: dict[int, tuple[float, ...]] = {}
    for members in partition:
        gid = min(members)
        total = np.zeros(dim)
        for m in members:
            total += beliefs[m].impact_estimate
        group_map[gid] = members
        group_impacts[gid] = tuple(total.tolist())
        share = tuple((total / len(members)).tolist())
        for m in members:
            beliefs[m] = replace(beliefs[m], impact_estimate=share)
    return replace(model, beliefs=beliefs, group_map=group_map, group_impacts=group_impacts)


# -- step 4 ---------------------------------------------------------------------

def _open_weights(model: BeliefModel, observation: Observation) -> dict[int, float]:
    weights = {}
    for gid, members in model.group_map.items():
        w = sum(observation.qualities.get(m, 0.0) for m in members if m in observation.detected)
        if w > 0.0:
            weights[gid] = w
    return weights


def estimate_impacts(
    model: BeliefModel,
    observation: Observation,
    only_groups: Iterable[int] | None = None,
) -> BeliefModel:
    """EWMA update of each open group's share of the observed outcome.

    The outcome is split across groups with an open channel in proportion to
    the summed effective quality of their detected members.  Only detected
    members' per-member estimates are refreshed.
    """
    alpha = model.params.alpha
    weights = _open_weights(model, observation)
    total = sum(weights.values())
    if total <= 0.0:
        return model
    outcome = np.asarray(observation.outcome, dtype=float)
    targets = set(weights) if only_groups is None else set(weights) & set(only_groups)

    beliefs = dict(model.beliefs)
    group_impacts = dict(model.group_impacts)
    for gid in sorted(targets):
        share = outcome * (weights[gid] / total)
        prev = np.asarray(group_impacts.get(gid, _zeros(len(outcome))))
        new = (1.0 - alpha) * prev + alpha * share
        group_impacts[gid] = tuple(new.tolist())
        members = model.group_map[gid]
        per_member = tuple((new / len(members)).tolist())
        for m in members:
            if m in observation.detected and m in beliefs:
                beliefs[m] = replace(beliefs[m], impact_estimate=per_member)
    return replace(model, beliefs=beliefs, group_impacts=group_impacts)


# -- focus and step 5 -------------------------------------------------------------

def select_focus(candidates: Sequence[InteractionLink], model: BeliefModel) -> InteractionLink | None:
    """The one gated CB link worth attending to: largest counterpart-group impact norm."""
    best = None
    best_key = None
    for link in candidates:
        if not can_interact(link):
            continue
        gid = model.group_of(link.to_id)
        norm = float(np.linalg.norm(model.group_impacts[gid])) if gid is not None else 0.0
        key = (-norm, link.to_id)
        if best_key is None or key < best_key:
            best, best_key = link, key
    return best


def interact_and_learn(
    model: BeliefModel,
    link: InteractionLink,
    observation: Observation,
    correlation_history: Mapping[int, Sequence[float]] | None = None,
) -> BeliefModel:
    if not can_interact(link):
        raise GateClosed(f"link {link.from_id}->{link.to_id} is not open")
    model = classify_beliefs(model, observation)
    if correlation_history:
        model = map_groups(model, correlation_history)
    target = link.to_id
    gid = model.group_of(target)
    if gid is not None:
        model = estimate_impacts(model, observation, only_groups=[gid])
    b = model.beliefs.get(target)
    if b is not None and target in observation.detected:
        gain = model.params.alpha * effective_quality(link)
        conf = b.confidence + (1.0 - b.confidence) * gain
        beliefs = dict(model.beliefs)
        beliefs[target] = replace(b, confidence=min(1.0, conf))
        model = replace(model, beliefs=beliefs)
    return model


# -- hidden entities -----------------------------------------------------------------

def explained_effect(model: BeliefModel, observation: Observation) -> np.ndarray:
    """What the CB can account for: the outcome of detected entities plus inferred ones."""
    explained = np.asarray(observation.outcome, dtype=float).copy()
    for b in model.invisible_beliefs():
        explained += b.impact_estimate
    return explained


def infer_invisible(model: BeliefModel, observation: Observation) -> BeliefModel:
    """Residual attribution.

    When the mean residual over a full window exceeds ``tau``, a synthetic
    Invisible entity carrying that mean is created and the window cleared.
    Ticks that create nothing feed the squared residual into the unknown
    reserve.
    """
    p = model.params
    residual = np.asarray(observation.felt_effect, dtype=float) - explained_effect(model, observation)
    window = (model.residual_window + (tuple(residual.tolist()),))[-p.window:]

    if len(window) == p.window:
        mean = np.mean(np.asarray(window), axis=0)
        size = float(np.linalg.norm(mean))
        if size > p.tau:
            sid = model.next_synthetic_id
            beliefs = dict(model.beliefs)
            beliefs[sid] = BeliefEntity(
                id=sid,
                believed_class=VisibilityClass.INVISIBLE,
                impact_estimate=tuple(mean.tolist()),
                confidence=size / (size + p.tau),
                last_seen_tick=observation.tick,
            )
            return replace(model, beliefs=beliefs, residual_window=(), next_synthetic_id=sid - 1)

    energy = float(residual @ residual)
    reserve = (1.0 - p.alpha) * model.unknown_reserve + p.alpha * energy
    return replace(model, residual_window=window, unknown_reserve=reserve)


# -- prediction ------------------------------------------------------------------------

def group_quality(model: BeliefModel, gid: int, observation: Observation) -> float:
    qs = [observation.qualities.get(m, 0.0) for m in model.group_map[gid] if m in observation.detected]
    return float(np.mean(qs)) if qs else 0.0


def predict(model: BeliefModel, observation: Observation) -> np.ndarray:
    """Quality-weighted sum of group impacts plus inferred Invisible impacts."""
    out = np.zeros(_dim(observation))
    for gid in sorted(model.group_map):
        q = group_quality(model, gid, observation)
        if q > 0.0:
            out = out + q * np.asarray(model.group_impacts[gid])
    for b in model.invisible_beliefs():
        out = out + np.asarray(b.impact_estimate)
    return out


def predict_interval(model: BeliefModel, observation: Observation, z: float = 2.0) -> tuple[np.ndarray, float]:
    """Prediction with a half-width widened by the unknown reserve."""
    return predict(model, observation), z * math.sqrt(model.unknown_reserve)


# -- agent loop --------------------------------------------------------------------------

class IbseadAgent:
    """Drives the learner against a world, one focused interaction per tick.

    Readings of ``group_attribute`` are buffered per entity; once every
    buffered series holds ``history_len`` values the CB regroups by correlation.
    """

    def __init__(self, params: LearnerParams | None = None, history_len: int = 20, group_attribute: str = "value"):
        self.model = BeliefModel(params=params or LearnerParams())
        self.history_len = history_len
        self.group_attribute = group_attribute
        self.history: dict[int, deque] = {}
        self.interactions: list[tuple[int, int]] = []

    def _record(self, obs: Observation):
        for (eid, name), value in obs.readings.items():
            if name == self.group_attribute:
                self.history.setdefault(eid, deque(maxlen=self.history_len)).append(value)

    def _full_history(self) -> dict[int, list[float]] | None:
        full = {k: list(v) for k, v in self.history.items() if len(v) == self.history_len}
        return full or None

    def observe(self, world: World, obs: Observation) -> InteractionLink | None:
        self._record(obs)
        scan_physical_scope(obs, world)
        model = classify_beliefs(self.model, obs)
        model = infer_invisible(model, obs)
        focus = select_focus(world.cb_links(), model)
        if focus is not None:
            model = interact_and_learn(model, focus, obs, self._full_history())
            self.interactions.append((obs.tick, focus.to_id))
        self.model = model
        return focus

    def run(self, world: World, ticks: int, dynamics=None) -> tuple[World, list[Observation]]:
        observations = []
        for _ in range(ticks):
            world, obs = step_world(world, dynamics=dynamics)
            self.observe(world, obs)
            observations.append(obs)
        return world, observations


# -- serialization -------------------------------------------------------------------------

def belief_model_to_dict(model: BeliefModel) -> dict:
    return {
        "params": {
            "alpha": model.params.alpha,
            "tau": model.params.tau,
            "window": model.params.window,
            "rho": model.params.rho,
        },
        "beliefs": [
            {
                "id": b.id,
                "believed_class": b.believed_class.value,
                "impact_estimate": list(b.impact_estimate),
                "confidence": b.confidence,
                "last_seen_tick": b.last_seen_tick,
            }
            for _, b in sorted(model.beliefs.items())
        ],
        "group_map": {str(g): sorted(m) for g, m in sorted(model.group_map.items())},
        "group_impacts": {str(g): list(v) for g, v in sorted(model.group_impacts.items())},
        "unknown_reserve": model.unknown_reserve,
        "residual_window": [list(r) for r in model.residual_window],
        "next_synthetic_id": model.next_synthetic_id,
    }


def belief_model_from_dict(data: Mapping) -> BeliefModel:
    return BeliefModel(
        params=LearnerParams(**data["params"]),
        beliefs={
            int(b["id"]): BeliefEntity(
                id=int(b["id"]),
                believed_class=VisibilityClass(b["believed_class"]),
                impact_estimate=tuple(float(v) for v in b["impact_estimate"]),
                confidence=float(b["confidence"]),
                last_seen_tick=int(b["last_seen_tick"]),
            )
            for b in data["beliefs"]
        },
        group_map={int(g): frozenset(m) for g, m in data["group_map"].items()},
        group_impacts={int(g): tuple(float(x) for x in v) for g, v in data["group_impacts"].items()},
        unknown_reserve=float(data["unknown_reserve"]),
        residual_window=tuple(tuple(float(x) for x in r) for r in data["residual_window"]),
        next_synthetic_id=int(data["next_synthetic_id"]),
    )


def belief_model_to_json(model: BeliefModel) -> str:
    return json.dumps(belief_model_to_dict(model), sort_keys=True)


def belief_model_from_json(text: str) -> BeliefModel:
    return belief_model_from_dict(json.loads(text))
