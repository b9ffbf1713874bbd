import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ibsead.bench import (
    CSV_HEADER,
    ExperimentConfig,
    LearnerSpec,
    Report,
    ReportRow,
    accuracy,
    config_from_dict,
    config_to_dict,
    emit_report,
    load_report,
    report_from_csv,
    report_from_json,
    run_experiment,
    summarize,
)
from ibsead.errors import EmptyReport, InvalidConfig, UnknownLearner, UnknownScenario
from ibsead.scenarios import ScenarioConfig

SMALL_VISUAL = {"name": "visual", "params": {"train_per_class": 6, "test_per_class": 3}}


def row(scenario="s", learner="l", trial=0, acc=0.5, hidden=float("nan")):
    return ReportRow(scenario, learner, trial, trial, acc, hidden, 0.0)


class TestAccuracy:
    def test_hand_fixture(self):
        pred = [0, 1, 1, 0, 2, 2, 1, 0, 0, 1]
        gold = [0, 1, 0, 0, 2, 1, 1, 0, 1, 1]
        correct = 0
        for p, g in zip(pred, gold):
            correct += p == g
        assert accuracy(pred, gold) == correct / 10 == 0.7

    def test_empty_is_nan(self):
        assert math.isnan(accuracy([], []))


class TestConfig:
    def test_unknown_learner(self):
        with pytest.raises(UnknownLearner) as err:
            config_from_dict({"scenarios": ["loans"], "learners": ["svm"]})
        assert err.value.key == "svm"

    def test_unknown_scenario(self):
        with pytest.raises(UnknownScenario) as err:
            config_from_dict({"scenarios": ["go"], "learners": ["dtree"]})
        assert err.value.key == "go"

    @pytest.mark.parametrize("data,key", [
        ({"scenarios": [], "learners": ["dtree"]}, "scenarios"),
        ({"scenarios": ["loans"], "learners": []}, "learners"),
        ({"scenarios": ["loans"], "learners": ["dtree"], "trials": 0}, "trials"),
        ({"scenarios": ["loans"], "learners": ["dtree"], "base_seed": -1}, "base_seed"),
        ({"scenarios": ["loans"], "learners": ["dtree"], "format": "xml"}, "format"),
        ({"scenarios": ["loans"], "learners": [{"name": "ibsead", "alpha": 3}]}, "alpha"),
        ({"scenarios": ["loans"], "learners": [{"name": "ibsead", "window": 0}]}, "window"),
        ({"scenarios": ["loans"], "learners": [{"name": "mlp", "lr": -1}]}, "lr"),
        ({"scenarios": ["loans"], "learners": [{"name": "dtree", "depth": 2}]}, "depth"),
        ({"scenarios": [{"name": "loans", "params": {"n_rows": -3}}], "learners": ["dtree"]}, "n_rows"),
        ({"scenarios": ["loans"], "learners": ["dtree"], "colour": 1}, "colour"),
    ])
    def test_invalid_names_key(self, data, key):
        with pytest.raises(InvalidConfig) as err:
            config_from_dict(data)
        assert err.value.key == key

    def test_dict_round_trip(self):
        cfg = config_from_dict({
            "scenarios": [SMALL_VISUAL, {"name": "loans", "hidden_strength": 0.3}],
            "learners": [{"name": "ibsead", "tau": 0.2}, "dtree"],
            "trials": 2, "base_seed": 7,
        })
        assert config_from_dict(json.loads(json.dumps(config_to_dict(cfg)))) == cfg


class TestRun:
    def test_row_count_and_seeds(self):
        cfg = config_from_dict({"scenarios": [SMALL_VISUAL], "learners": ["dtree", "nbayes"], "trials": 3, "base_seed": 10})
        rep = run_experiment(cfg)
        assert len(rep) == 6
        assert [(r.learner, r.trial, r.seed) for r in rep.rows] == [
            (l, t, 10 + t) for l in ("dtree", "nbayes") for t in range(3)
        ]
        assert all(0.0 <= r.accuracy <= 1.0 for r in rep.rows)

    def test_deterministic(self):
        cfg = config_from_dict({"scenarios": [SMALL_VISUAL], "learners": ["ibsead", "mlp"], "trials": 2})
        assert run_experiment(cfg) == run_experiment(cfg)

    def test_parallel_equals_serial(self):
        base = {"scenarios": [SMALL_VISUAL, {"name": "loans", "params": {"n_rows": 80}}],
                "learners": ["ibsead", "hmm"], "trials": 3}
        serial = run_experiment(config_from_dict(base))
        parallel = run_experiment(config_from_dict({**base, "workers": 3}))
        assert emit_report(serial, "csv") == emit_report(parallel, "csv")

    def test_timing_recorded_on_request(self):
        cfg = config_from_dict({"scenarios": [SMALL_VISUAL], "learners": ["dtree"], "record_timing": True})
        assert run_experiment(cfg).rows[0].wall_time_ms > 0.0

    def test_hidden_subset_empty_gives_nan(self):
        cfg = config_from_dict({"scenarios": [{**SMALL_VISUAL, "params": {**SMALL_VISUAL["params"], "noise_fraction": 0.0}}],
                                "learners": ["dtree"]})
        assert math.isnan(run_experiment(cfg).rows[0].accuracy_hidden)


class TestEmit:
    def test_empty_csv_is_header(self):
        assert emit_report(Report(), "csv") == "scenario,learner,trial,seed,accuracy,accuracy_hidden,wall_time_ms\n"

    def test_column_order(self):
        text = emit_report(Report((ReportRow("loans", "ibsead", 0, 5, 0.9, 0.75, 0.0),)), "csv")
        assert text.splitlines() == [",".join(CSV_HEADER), "loans,ibsead,0,5,0.9,0.75,0.0"]

    def test_precision(self):
        value = 0.123456789012
        text = emit_report(Report((row(acc=value),)), "csv")
        assert report_from_csv(text).rows[0].accuracy == value

    @settings(max_examples=30)
    @given(st.lists(st.tuples(st.floats(0, 1), st.one_of(st.just(float("nan")), st.floats(0, 1))), max_size=6))
    def test_round_trips(self, vals):
        rep = Report(tuple(row(trial=i, acc=a, hidden=h) for i, (a, h) in enumerate(vals)))
        assert report_from_json(emit_report(rep, "json")) == rep
        assert report_from_csv(emit_report(rep, "csv")) == rep

    def test_json_rows(self, tmp_path):
        rep = Report((row(),))
        emit_report(rep, "json", tmp_path / "r.json")
        data = json.loads((tmp_path / "r.json").read_text())
        assert list(data[0]) == list(CSV_HEADER) and data[0]["accuracy_hidden"] is None
        assert load_report(tmp_path / "r.json") == rep

    def test_io_error(self, tmp_path):
        with pytest.raises(OSError):
            emit_report(Report(), "csv", tmp_path / "missing" / "r.csv")


def sort_median(values):
    s = sorted(values)
    n = len(s)
    return s[n // 2] if n % 2 else (s[n // 2 - 1] + s[n // 2]) / 2


class TestSummarize:
    def test_single_trial(self):
        (s,) = summarize(Report((row(acc=0.42),)))
        assert s.median == 0.42 and s.iqr == 0.0

    def test_three_trials(self):
        (s,) = summarize(Report(tuple(row(trial=i, acc=a) for i, a in enumerate([0.9, 0.5, 0.7]))))
        assert s.median == pytest.approx(0.7)

    def test_empty(self):
        with pytest.raises(EmptyReport):
            summarize(Report())

    def test_medians_match_sort_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            rows = []
            for sc in ("a", "b"):
                for le in ("x", "y", "z"):
                    for t in range(int(rng.integers(1, 12))):
                        rows.append(row(sc, le, t, float(rng.random())))
            rep = Report(tuple(rows))
            for s in summarize(rep):
                accs = [r.accuracy for r in rows if (r.scenario, r.learner) == (s.scenario, s.learner)]
                assert s.median == pytest.approx(sort_median(accs), abs=1e-15)
                assert s.n_trials == len(accs)
