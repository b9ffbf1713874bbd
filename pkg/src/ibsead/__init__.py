"""Simulation and benchmarking of a learner that infers invisible and unknown entities."""

from .learner import IbseadAgent, LearnerParams
from .world import Entity, InteractionLink, Observation, World, can_interact, effective_quality, step_world

__all__ = [
    "Entity", "InteractionLink", "Observation", "World",
    "can_interact", "effective_quality", "step_world",
    "IbseadAgent", "LearnerParams",
]
