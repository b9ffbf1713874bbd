"""Ground-truth world: entities, gated links, groups and the observation step.

A :class:`World` is an immutable value.  :func:`step_world` advances it by one
tick and returns what the computer brain (CB) perceives at that tick.  The CB
only detects Known entities that sit inside its scope radius and whose link to
the CB passes :func:`can_interact`; every entity, seen or not, contributes to
the felt effect.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Iterable, Mapping

import numpy as np

from .errors import EmptyGroup, UnknownId


class VisibilityClass(str, Enum):
    KNOWN = "Known"
    INVISIBLE = "Invisible"
    UNKNOWN = "Unknown"


class Env(str, Enum):
    INTERNAL = "Internal"
    EXTERNAL = "External"


class BlockageKind(str, Enum):
    NOISE = "Noise"
    DARKNESS = "Darkness"
    IGNORANCE = "Ignorance"


def _as_vector(values) -> tuple[float, ...]:
    if np.isscalar(values):
        values = (values,)
    vec = tuple(float(v) for v in values)
    if not vec:
        raise ValueError("impact vectors must have at least one component")
    if not all(math.isfinite(v) for v in vec):
        raise ValueError(f"non-finite impact {vec}")
    return vec


@dataclass(frozen=True)
class BlockageAgent:
    kind: BlockageKind
    strength: float

    def __post_init__(self):
        object.__setattr__(self, "kind", BlockageKind(self.kind))
        if not 0.0 <= self.strength <= 1.0:
            raise ValueError(f"blockage strength {self.strength} outside [0, 1]")


@dataclass(frozen=True)
class InteractionLink:
    from_id: int
    to_id: int
    switch_from: bool = True
    switch_to: bool = True
    quality: float = 1.0
    blockages: tuple[BlockageAgent, ...] = ()

    def __post_init__(self):
        if self.from_id == self.to_id:
            raise ValueError("a link needs two distinct entities")
        if not 0.0 <= self.quality <= 1.0:
            raise ValueError(f"quality {self.quality} outside [0, 1]")
        object.__setattr__(self, "blockages", tuple(self.blockages))

    def counterpart(self, entity_id: int) -> int:
        return self.to_id if self.from_id == entity_id else self.from_id


@dataclass(frozen=True)
class Entity:
    id: int
    env: Env = Env.EXTERNAL
    visibility: VisibilityClass = VisibilityClass.KNOWN
    attributes: Mapping[str, float] = field(default_factory=dict)
    true_impact: tuple[float, ...] = (0.0,)
    switch_default: bool = True
    # magnitude of full-strength read noise per attribute; missing names mean 1.0
    attribute_scales: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.id < 0:
            raise ValueError("world entity ids are non-negative; negatives are reserved")
        object.__setattr__(self, "env", Env(self.env))
        object.__setattr__(self, "visibility", VisibilityClass(self.visibility))
        object.__setattr__(self, "true_impact", _as_vector(self.true_impact))
        attrs = {str(k): float(v) for k, v in self.attributes.items()}
        if not all(math.isfinite(v) for v in attrs.values()):
            raise ValueError(f"non-finite attribute on entity {self.id}")
        object.__setattr__(self, "attributes", attrs)
        object.__setattr__(
            self, "attribute_scales", {str(k): float(v) for k, v in self.attribute_scales.items()}
        )

    @property
    def pos(self) -> float:
        return self.attributes.get("pos", 0.0)


@dataclass(frozen=True)
class EntityGroup:
    group_id: int
    member_ids: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "member_ids", frozenset(self.member_ids))


@dataclass(frozen=True)
class Observation:
    tick: int
    detected: frozenset[int]
    readings: Mapping[tuple[int, str], float]
    outcome: tuple[float, ...]
    felt_effect: tuple[float, ...]
    # effective channel quality for every detected entity
    qualities: Mapping[int, float] = field(default_factory=dict)

    @property
    def residual(self) -> np.ndarray:
        """Felt effect not accounted for by the CB and the entities it detected."""
        return np.asarray(self.felt_effect) - np.asarray(self.outcome)


@dataclass(frozen=True)
class World:
    entities: Mapping[int, Entity]
    links: tuple[InteractionLink, ...] = ()
    groups: tuple[EntityGroup, ...] = ()
    cb_id: int = 0
    scope_radius: float = math.inf
    tick: int = 0
    rng_seed: int = 0
    # scenario ground truth (hidden drivers, corruption flags); never shown to learners
    truth: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "entities", dict(self.entities))
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "groups", tuple(self.groups))
        for key, ent in self.entities.items():
            if key != ent.id:
                raise ValueError(f"entity stored under {key} has id {ent.id}")
        if self.cb_id not in self.entities:
            raise UnknownId(self.cb_id)
        if self.scope_radius < 0:
            raise ValueError("scope_radius must be >= 0")
        if self.tick < 0:
            raise ValueError("tick must be >= 0")
        dims = {len(e.true_impact) for e in self.entities.values()}
        if len(dims) > 1:
            raise ValueError(f"entities disagree on impact dimension: {sorted(dims)}")
        seen: set[int] = set()
        for g in self.groups:
            for m in g.member_ids:
                if m not in self.entities:
                    raise UnknownId(m)
                if m in seen:
                    raise ValueError(f"entity {m} is in more than one group")
                seen.add(m)

    @property
    def impact_dim(self) -> int:
        return len(self.entities[self.cb_id].true_impact)

    @property
    def cb(self) -> Entity:
        return self.entities[self.cb_id]

    def link_between(self, a: int, b: int) -> InteractionLink | None:
        for link in self.links:
            if {link.from_id, link.to_id} == {a, b}:
                return link
        return None

    def cb_links(self) -> list[InteractionLink]:
        """Links touching the CB, oriented CB -> counterpart."""
        out = []
        for link in self.links:
            if link.from_id == self.cb_id:
                out.append(link)
            elif link.to_id == self.cb_id:
                out.append(
                    replace(
                        link,
                        from_id=link.to_id,
                        to_id=link.from_id,
                        switch_from=link.switch_to,
                        switch_to=link.switch_from,
                    )
                )
        return out

    def in_scope(self, entity_id: int) -> bool:
        return abs(self.entities[entity_id].pos - self.cb.pos) <= self.scope_radius

    def with_entity(self, entity: Entity) -> "World":
        entities = dict(self.entities)
        entities[entity.id] = entity
        return replace(self, entities=entities)

    def update_entities(self, updates: Mapping[int, Mapping[str, Any]]) -> "World":
        """Return a copy with per-entity field replacements applied."""
        entities = dict(self.entities)
        for eid, changes in updates.items():
            entities[eid] = replace(entities[eid], **changes)
        return replace(self, entities=entities)


# -- gating -----------------------------------------------------------------

def effective_quality(link: InteractionLink) -> float:
    q = link.quality
    for b in link.blockages:
        q *= 1.0 - b.strength
    return q


def can_interact(link: InteractionLink) -> bool:
    return bool(link.switch_from and link.switch_to and effective_quality(link) > 0.0)


def group_impact(group: EntityGroup, world: World) -> np.ndarray:
    """Componentwise mean of the members' true impact vectors."""
    if not group.member_ids:
        raise EmptyGroup(f"group {group.group_id} has no members")
    missing = [m for m in group.member_ids if m not in world.entities]
    if missing:
        raise UnknownId(min(missing))
    impacts = np.array([world.entities[m].true_impact for m in sorted(group.member_ids)])
    return impacts.mean(axis=0)


# -- dynamics ----------------------------------------------------------------

Dynamics = Callable[[World, np.random.Generator], World]


def world_rng(world: World) -> np.random.Generator:
    """Per-tick generator derived from the world seed, so a world value alone fixes its step."""
    return np.random.default_rng([world.rng_seed, world.tick])


def step_world(
    world: World,
    rng: np.random.Generator | None = None,
    dynamics: Dynamics | None = None,
) -> tuple[World, Observation]:
    """Advance one tick and compute the CB's observation.

    ``dynamics`` may rewrite attributes, impacts or links before sensing.  Read
    noise is ``u * (1 - effective_quality) * scale`` with ``u ~ U[-1, 1]``, one
    draw per reading in (entity id, attribute name) order.
    """
    if rng is None:
        rng = world_rng(world)
    if dynamics is not None:
        world = dynamics(world, rng)
    world = replace(world, tick=world.tick + 1)

    cb = world.cb_id
    channels = {link.to_id: link for link in world.cb_links()}
    detected: list[int] = []
    qualities: dict[int, float] = {}
    for eid in sorted(world.entities):
        if eid == cb:
            continue
        ent = world.entities[eid]
        link = channels.get(eid)
        if (
            ent.visibility is VisibilityClass.KNOWN
            and link is not None
            and world.in_scope(eid)
            and can_interact(link)
        ):
            detected.append(eid)
            qualities[eid] = effective_quality(link)

    readings: dict[tuple[int, str], float] = {}
    for eid in detected:
        ent = world.entities[eid]
        degrade = 1.0 - qualities[eid]
        for name in sorted(ent.attributes):
            u = rng.uniform(-1.0, 1.0)
            scale = ent.attribute_scales.get(name, 1.0)
            readings[(eid, name)] = ent.attributes[name] + u * degrade * scale

    dim = world.impact_dim
    outcome = np.array(world.cb.true_impact, dtype=float)
    for eid in detected:
        outcome = outcome + world.entities[eid].true_impact
    felt = np.zeros(dim)
    for eid in sorted(world.entities):
        felt = felt + world.entities[eid].true_impact

    obs = Observation(
        tick=world.tick,
        detected=frozenset(detected),
        readings=readings,
        outcome=tuple(outcome.tolist()),
        felt_effect=tuple(felt.tolist()),
        qualities=qualities,
    )
    return world, obs


# -- serialization -------------------------------------------------------------

def _link_to_dict(link: InteractionLink) -> dict:
    return {
        "from_id": link.from_id,
        "to_id": link.to_id,
        "switch_from": link.switch_from,
        "switch_to": link.switch_to,
        "quality": link.quality,
        "blockages": [{"kind": b.kind.value, "strength": b.strength} for b in link.blockages],
    }


def world_to_dict(world: World) -> dict:
    return {
        "tick": world.tick,
        "cb_id": world.cb_id,
        "scope_radius": world.scope_radius if math.isfinite(world.scope_radius) else None,
        "rng_seed": world.rng_seed,
        "entities": [
            {
                "id": e.id,
                "env": e.env.value,
                "visibility": e.visibility.value,
                "attributes": dict(sorted(e.attributes.items())),
                "true_impact": list(e.true_impact),
                "switch_default": e.switch_default,
                "attribute_scales": dict(sorted(e.attribute_scales.items())),
            }
            for e in (world.entities[k] for k in sorted(world.entities))
        ],
        "links": [_link_to_dict(link) for link in world.links],
        "groups": [
            {"group_id": g.group_id, "member_ids": sorted(g.member_ids)} for g in world.groups
        ],
        "truth": world.truth,
    }


def world_from_dict(data: Mapping[str, Any]) -> World:
    entities = {}
    for e in data["entities"]:
        ent = Entity(
            id=int(e["id"]),
            env=e["env"],
            visibility=e["visibility"],
            attributes=e.get("attributes", {}),
            true_impact=e["true_impact"],
            switch_default=bool(e.get("switch_default", True)),
            attribute_scales=e.get("attribute_scales", {}),
        )
        entities[ent.id] = ent
    links = [
        InteractionLink(
            from_id=int(l["from_id"]),
            to_id=int(l["to_id"]),
            switch_from=bool(l["switch_from"]),
            switch_to=bool(l["switch_to"]),
            quality=float(l["quality"]),
            blockages=tuple(BlockageAgent(b["kind"], float(b["strength"])) for b in l["blockages"]),
        )
        for l in data.get("links", [])
    ]
    groups = [EntityGroup(int(g["group_id"]), frozenset(g["member_ids"])) for g in data.get("groups", [])]
    radius = data.get("scope_radius")
    return World(
        entities=entities,
        links=tuple(links),
        groups=tuple(groups),
        cb_id=int(data["cb_id"]),
        scope_radius=math.inf if radius is None else float(radius),
        tick=int(data["tick"]),
        rng_seed=int(data.get("rng_seed", 0)),
        truth=data.get("truth", {}),
    )


def dump_world(world: World, path) -> None:
    with open(path, "w") as fh:
        json.dump(world_to_dict(world), fh, indent=1, sort_keys=False)


def load_world(path) -> World:
    with open(path) as fh:
        return world_from_dict(json.load(fh))


def make_world(
    entities: Iterable[Entity],
    links: Iterable[InteractionLink] = (),
    groups: Iterable[EntityGroup] = (),
    **kwargs,
) -> World:
    """Convenience constructor from plain iterables."""
    return World(entities={e.id: e for e in entities}, links=tuple(links), groups=tuple(groups), **kwargs)
