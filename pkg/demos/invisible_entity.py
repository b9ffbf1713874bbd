"""An agent watches two visible suppliers while a hidden one also moves its outcome.

Run:  python3 demos/invisible_entity.py
"""

from ibsead import IbseadAgent, LearnerParams
from ibsead.learner import predict_interval
from ibsead.world import Entity, Env, InteractionLink, VisibilityClass, make_world

world = make_world(
    [
        Entity(0, Env.INTERNAL, VisibilityClass.KNOWN, {}, (0.0,)),
        Entity(1, attributes={"value": 1.0}, true_impact=(0.4,)),
        Entity(2, attributes={"value": 2.0}, true_impact=(0.2,)),
        Entity(3, visibility=VisibilityClass.INVISIBLE, true_impact=(0.6,)),
    ],
    [InteractionLink(0, 1), InteractionLink(0, 2, quality=0.7)],
    rng_seed=1,
)


def wobble(w, rng):
    return w.update_entities({i: {"attributes": {"value": float(rng.normal())}} for i in (1, 2)})


agent = IbseadAgent(LearnerParams(alpha=0.5, tau=0.1, window=5))
world, observations = agent.run(world, 40, wobble)

print("focus per tick:", [e for _, e in agent.interactions[:12]], "...")
for gid, impact in sorted(agent.model.group_impacts.items()):
    print(f"group {gid}: members {sorted(agent.model.group_map[gid])}, impact estimate {impact[0]:+.3f}")
for b in agent.model.invisible_beliefs():
    print(f"inferred invisible entity {b.id}: impact {b.impact_estimate[0]:+.3f}, confidence {b.confidence:.2f}")
centre, half = predict_interval(agent.model, observations[-1])
print(f"predicted net effect {centre[0]:+.3f} +/- {half:.3f}; felt {observations[-1].felt_effect[0]:+.3f}")
