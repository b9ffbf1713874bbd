import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ibsead.errors import GateClosed
from ibsead.learner import (
    BeliefEntity,
    BeliefModel,
    IbseadAgent,
    LearnerParams,
    belief_model_from_json,
    belief_model_to_json,
    classify_beliefs,
    correlation_groups,
    estimate_impacts,
    infer_invisible,
    interact_and_learn,
    map_groups,
    pearson,
    predict,
    predict_interval,
    scan_physical_scope,
    select_focus,
)
from ibsead.world import (
    BlockageAgent,
    BlockageKind,
    Entity,
    Env,
    InteractionLink,
    Observation,
    VisibilityClass,
    make_world,
    step_world,
)

K, INV, UNK = VisibilityClass.KNOWN, VisibilityClass.INVISIBLE, VisibilityClass.UNKNOWN


def obs(tick=1, detected=(), outcome=0.0, felt=None, qualities=None, readings=None):
    detected = frozenset(detected)
    return Observation(
        tick=tick,
        detected=detected,
        readings=readings or {},
        outcome=(float(outcome),),
        felt_effect=(float(outcome if felt is None else felt),),
        qualities=qualities if qualities is not None else {i: 1.0 for i in detected},
    )


def model(**params):
    return BeliefModel(params=LearnerParams(**params))


class TestParams:
    @pytest.mark.parametrize("kw", [{"alpha": 1.5}, {"tau": 0.0}, {"window": 0}, {"rho": 2.0}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            LearnerParams(**kw)

    def test_defaults(self):
        p = LearnerParams()
        assert (p.alpha, p.tau, p.window, p.rho) == (0.3, 0.1, 5, 0.9)


class TestScan:
    def test_pass_through(self):
        assert scan_physical_scope(obs(detected={3, 7})) == {3, 7}

    def test_empty(self):
        assert scan_physical_scope(obs()) == frozenset()

    def test_no_inference_here(self):
        assert scan_physical_scope(obs(detected={3}, outcome=0.1, felt=5.0)) == {3}


class TestClassify:
    def test_known_stays_known(self):
        m = classify_beliefs(model(), obs(1, {4}))
        m = classify_beliefs(m, obs(2, {4}))
        assert m.beliefs[4].believed_class is K

    def test_fresh_model_empty_observation(self):
        m0 = model()
        m = classify_beliefs(m0, obs())
        assert not m.beliefs and m.unknown_reserve == m0.unknown_reserve

    def test_absent_becomes_invisible_after_k_plus_one(self):
        k = 5
        m = classify_beliefs(model(window=k), obs(1, {2}))
        b = m.beliefs[2]
        m = BeliefModel(m.params, {2: BeliefEntity(2, K, (0.5,), 0.0, b.last_seen_tick)}, m.group_map, m.group_impacts)
        transition = None
        for t in range(2, 12):
            m = classify_beliefs(m, obs(t))
            if transition is None and m.beliefs[2].believed_class is INV:
                transition = t
        # last seen at tick 1, so tick 1 + k + 1 is the first with more than k missed ticks
        assert transition == 1 + k + 1

    def test_absent_without_effect_becomes_unknown(self):
        m = classify_beliefs(model(window=2), obs(1, {2}))
        for t in range(2, 6):
            m = classify_beliefs(m, obs(t))
        assert m.beliefs[2].believed_class is UNK

    def test_input_unchanged(self):
        m0 = model()
        classify_beliefs(m0, obs(1, {1, 2}))
        assert not m0.beliefs


def direct_pearson(x, y):
    n = len(x)
    mx, my = sum(x) / n, sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


class TestGrouping:
    def test_identical_sequences_share_group(self):
        seq = [0.1, 0.5, -0.3, 0.9, 0.2]
        assert direct_pearson(seq, seq) == pytest.approx(1.0)
        m = classify_beliefs(model(), obs(1, {1, 2}))
        m = map_groups(m, {1: seq, 2: list(seq)})
        assert m.group_map == {1: frozenset({1, 2})}

    def test_single_entity(self):
        m = map_groups(classify_beliefs(model(), obs(1, {5})), {5: [1.0, 2.0, 3.0]})
        assert m.group_map == {5: frozenset({5})}

    def test_constant_series_stay_apart(self):
        assert pearson([1, 1, 1], [1, 1, 1]) is None
        m = map_groups(classify_beliefs(model(), obs(1, {1, 2})), {1: [2.0] * 4, 2: [2.0] * 4})
        assert m.group_map == {1: frozenset({1}), 2: frozenset({2})}

    @given(st.lists(st.floats(-10, 10), min_size=3, max_size=12), st.lists(st.floats(-10, 10), min_size=3, max_size=12))
    def test_pearson_matches_direct_formula(self, x, y):
        n = min(len(x), len(y))
        x, y = x[:n], y[:n]
        r = pearson(x, y)
        if r is None:
            return
        sxx = sum((a - sum(x) / n) ** 2 for a in x)
        syy = sum((b - sum(y) / n) ** 2 for b in y)
        if sxx < 1e-9 or syy < 1e-9:
            return
        assert r == pytest.approx(direct_pearson(x, y), abs=1e-9)

    @given(st.dictionaries(st.integers(0, 9), st.lists(st.floats(-5, 5), min_size=4, max_size=4), max_size=8),
           st.floats(-1, 1))
    def test_partition(self, series, rho):
        ids = sorted(series)
        groups = correlation_groups(series, ids, rho)
        flat = sorted(i for g in groups for i in g)
        assert flat == ids

    def test_regroup_preserves_total(self):
        m = classify_beliefs(model(alpha=1.0), obs(1, {1, 2, 3}))
        m = estimate_impacts(m, obs(1, {1, 2, 3}, outcome=0.9))
        before = sum(v[0] for v in m.group_impacts.values())
        m = map_groups(m, {1: [1, 2, 3], 2: [2, 4, 6], 3: [3, 1, 2]})
        assert m.group_map[1] == {1, 2}
        assert sum(v[0] for v in m.group_impacts.values()) == pytest.approx(before)


class TestEstimate:
    def test_full_replacement(self):
        m = classify_beliefs(model(alpha=1.0), obs(1, {1}))
        m = estimate_impacts(m, obs(1, {1}, outcome=0.6))
        assert m.group_impacts[1] == (0.6,)

    def test_no_learning_limit(self):
        m = classify_beliefs(model(alpha=0.0), obs(1, {1}))
        m2 = estimate_impacts(m, obs(1, {1}, outcome=0.6))
        assert m2.group_impacts == m.group_impacts

    def test_ewma_recurrence(self):
        m = classify_beliefs(model(alpha=0.5), obs(1, {1}))
        seen = []
        for t in (1, 2):
            m = estimate_impacts(m, obs(t, {1}, outcome=0.8))
            seen.append(m.group_impacts[1][0])
        assert seen == pytest.approx([0.4, 0.6], abs=1e-15)

    def test_quality_weighted_attribution(self):
        m = classify_beliefs(model(alpha=1.0), obs(1, {1, 2}))
        m = estimate_impacts(m, obs(1, {1, 2}, outcome=1.0, qualities={1: 0.25, 2: 0.75}))
        assert m.group_impacts[1][0] == pytest.approx(0.25)
        assert m.group_impacts[2][0] == pytest.approx(0.75)

    def test_closed_groups_untouched(self):
        m = classify_beliefs(model(alpha=1.0), obs(1, {1, 2}))
        m = estimate_impacts(m, obs(2, {1}, outcome=1.0))
        assert m.group_impacts[2] == (0.0,)


def link(to, quality=1.0, on=True):
    return InteractionLink(0, to, True, on, quality)


class TestFocus:
    def _model(self, impacts):
        m = classify_beliefs(model(alpha=1.0), obs(1, set(impacts)))
        return BeliefModel(m.params, m.beliefs, m.group_map, {k: (v,) for k, v in impacts.items()})

    def test_nothing_gated(self):
        assert select_focus([link(1, on=False), link(2, quality=0.0)], self._model({1: 0.5, 2: 0.1})) is None

    def test_single_candidate(self):
        lk = link(2)
        assert select_focus([lk, link(1, on=False)], self._model({1: 0.5, 2: 0.1})) == lk

    def test_argmax_norm(self):
        m = self._model({1: 0.2, 2: -0.9})
        cands = [link(1), link(2)]
        brute = max(cands, key=lambda l: (abs(m.group_impacts[l.to_id][0]), -l.to_id))
        assert select_focus(cands, m) == brute == cands[1]

    def test_tie_lowest_id(self):
        m = self._model({3: 0.5, 2: 0.5})
        assert select_focus([link(3), link(2)], m).to_id == 2


class TestInteract:
    def test_updates_like_estimate(self):
        o = obs(1, {1}, outcome=0.6)
        m = interact_and_learn(model(alpha=1.0), link(1), o)
        assert m.group_impacts[1] == (0.6,)

    def test_closed_switch(self):
        with pytest.raises(GateClosed):
            interact_and_learn(model(), link(1, on=False), obs(1, {1}))

    def test_fully_blocked(self):
        blocked = InteractionLink(0, 1, quality=1.0, blockages=(BlockageAgent(BlockageKind.NOISE, 1.0),))
        with pytest.raises(GateClosed):
            interact_and_learn(model(), blocked, obs(1, {1}))

    def test_confidence_grows_with_quality(self):
        confs = []
        for q in (0.2, 0.5, 0.9):
            m = interact_and_learn(model(), link(1, quality=q), obs(1, {1}, qualities={1: q}))
            confs.append(m.beliefs[1].confidence)
        assert confs == sorted(confs) and confs[0] > 0


class TestInferInvisible:
    def _stream(self, residuals, **params):
        m = model(**params)
        created = []
        for t, r in enumerate(residuals, start=1):
            before = len(m.invisible_beliefs())
            m = infer_invisible(m, obs(t, outcome=0.0, felt=r))
            if len(m.invisible_beliefs()) > before:
                created.append(t)
        return m, created

    def test_zero_residuals(self):
        m, created = self._stream([0.0] * 20)
        assert not created and m.unknown_reserve == 0.0

    def test_constant_residual(self):
        m, created = self._stream([0.5] * 20, tau=0.1, window=5)
        assert created == [5]
        (b,) = m.invisible_beliefs()
        assert abs(b.impact_estimate[0] - 0.5) <= 1e-9
        assert b.id < 0 and b.believed_class is INV

    def test_alternating_residual(self):
        m, created = self._stream([0.4, -0.4] * 10, tau=0.1, window=5)
        assert not created
        assert m.unknown_reserve > 0

    @settings(max_examples=60)
    @given(st.lists(st.floats(-1, 1), min_size=1, max_size=40), st.floats(0.05, 2.0), st.integers(1, 8))
    def test_no_false_positive_below_threshold(self, raw, tau, k):
        residuals = [0.999 * tau * v for v in raw]
        m, created = self._stream(residuals, tau=tau, window=k)
        assert not created

    def test_window_bounded(self):
        m, _ = self._stream([0.01] * 12, window=4)
        assert len(m.residual_window) <= 4


class TestPredict:
    def test_empty_model(self):
        assert predict(model(), obs()).tolist() == [0.0]

    def test_single_group(self):
        m = classify_beliefs(model(alpha=1.0), obs(1, {1}))
        m = estimate_impacts(m, obs(1, {1}, outcome=0.6))
        assert predict(m, obs(2, {1}))[0] == pytest.approx(0.6)

    def test_plus_invisible(self):
        m = classify_beliefs(model(alpha=1.0), obs(1, {1}))
        m = estimate_impacts(m, obs(1, {1}, outcome=0.6))
        beliefs = dict(m.beliefs)
        beliefs[-1] = BeliefEntity(-1, INV, (0.3,), 0.5, 1)
        m = BeliefModel(m.params, beliefs, m.group_map, m.group_impacts)
        direct = 0.6 * 1.0 + 0.3
        assert predict(m, obs(2, {1}))[0] == pytest.approx(direct, abs=1e-12)

    def test_interval_widens_with_reserve(self):
        m = BeliefModel(unknown_reserve=0.25)
        centre, half = predict_interval(m, obs())
        assert half == pytest.approx(1.0)


class TestAgent:
    def _world(self, seed=0):
        ents = [Entity(0, Env.INTERNAL, K, {}, (0.0,))]
        for i in range(1, 5):
            ents.append(Entity(i, attributes={"value": 0.0}, true_impact=(0.1 * i,)))
        ents.append(Entity(5, visibility=INV, true_impact=(0.5,)))
        lk = [InteractionLink(0, 1), InteractionLink(0, 2, quality=0.5), InteractionLink(0, 3, switch_to=False),
              InteractionLink(0, 4)]
        return make_world(ents, lk, rng_seed=seed)

    @staticmethod
    def _jitter(world, rng):
        return world.update_entities({i: {"attributes": {"value": float(rng.normal())}} for i in range(1, 5)})

    def test_one_interaction_per_tick(self):
        agent = IbseadAgent(history_len=5)
        agent.run(self._world(), 30, self._jitter)
        ticks = [t for t, _ in agent.interactions]
        assert len(ticks) == len(set(ticks)) == 30

    def test_no_learning_through_closed_gate(self):
        agent = IbseadAgent(history_len=5)
        agent.run(self._world(), 30, self._jitter)
        assert 3 not in agent.model.beliefs
        assert all(e != 3 for _, e in agent.interactions)

    def test_infers_the_invisible_entity(self):
        agent = IbseadAgent()
        agent.run(self._world(), 20, self._jitter)
        inv = agent.model.invisible_beliefs()
        # entity 3 (closed) and 5 (invisible) are never explained by the outcome
        assert len(inv) == 1
        assert inv[0].impact_estimate[0] == pytest.approx(0.3 + 0.5)

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(0, 1)), min_size=1, max_size=30))
    def test_finite_under_fuzz(self, stream):
        agent_model = model()
        for t, (out, felt, q) in enumerate(stream, start=1):
            o = obs(t, {1, 2}, outcome=out, felt=felt, qualities={1: q, 2: 1.0 - q})
            agent_model = classify_beliefs(agent_model, o)
            agent_model = infer_invisible(agent_model, o)
            if q > 0:
                agent_model = interact_and_learn(agent_model, link(1, quality=q), o, {1: [1, 2, 3], 2: [3, 1, 2]})
        vals = [agent_model.unknown_reserve]
        vals += [v for g in agent_model.group_impacts.values() for v in g]
        vals += [v for b in agent_model.beliefs.values() for v in b.impact_estimate + (b.confidence,)]
        assert all(math.isfinite(v) for v in vals)
        assert all(0.0 <= b.confidence <= 1.0 for b in agent_model.beliefs.values())


class TestSerialization:
    def test_round_trip(self):
        agent = IbseadAgent(history_len=5)
        agent.run(TestAgent()._world(), 15, TestAgent._jitter)
        text = belief_model_to_json(agent.model)
        assert belief_model_from_json(text) == agent.model
