"""Experiment runner: learner x scenario matrices over seeded trials."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .baselines import (
    dt_predict,
    dt_train,
    hmm_classifier_predict,
    hmm_classifier_train,
    mlp_predict,
    mlp_train,
    nb_predict,
    nb_train,
)
from .classifier import ibsead_fit, ibsead_predict_many
from .errors import EmptyReport, InvalidConfig, UnknownLearner, UnknownScenario
from .learner import LearnerParams
from .scenarios import DEFAULTS, SCENARIOS, ScenarioConfig, ScenarioData, generate

CSV_HEADER = ("scenario", "learner", "trial", "seed", "accuracy", "accuracy_hidden", "wall_time_ms")
FORMATS = ("csv", "json")
MAX_SEED = 2**64 - 1

LEARNER_PARAMS: dict[str, dict[str, Any]] = {
    "ibsead": {"alpha": 0.3, "tau": 0.1, "window": 5, "rho": 0.9},
    "dtree": {"max_depth": None},
    "hmm": {"states": 2, "symbols": 3, "iters": 20},
    "mlp": {"hidden": 16, "epochs": 500, "lr": 0.5},
    "nbayes": {},
}


@dataclass(frozen=True)
class LearnerSpec:
    name: str
    params: Mapping[str, Any] = field(default_factory=dict)
    label: str | None = None

    def __post_init__(self):
        if self.name not in LEARNER_PARAMS:
            raise UnknownLearner(self.name)
        for key in self.params:
            if key not in LEARNER_PARAMS[self.name]:
                raise InvalidConfig(key, f"learner {self.name!r} has no parameter {key!r}")

    def resolved(self) -> dict[str, Any]:
        return {**LEARNER_PARAMS[self.name], **self.params}

    @property
    def display(self) -> str:
        return self.label or self.name


@dataclass(frozen=True)
class ExperimentConfig:
    scenarios: tuple[ScenarioConfig, ...]
    learners: tuple[LearnerSpec, ...]
    trials: int = 1
    base_seed: int = 0
    out: str | None = None
    format: str = "csv"
    workers: int = 1
    # off by default so that report files are byte-identical across runs
    record_timing: bool = False

    def __post_init__(self):
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        object.__setattr__(self, "learners", tuple(self.learners))
        if not self.scenarios:
            raise InvalidConfig("scenarios", "at least one scenario is required")
        if not self.learners:
            raise InvalidConfig("learners", "at least one learner is required")
        if not isinstance(self.trials, int) or self.trials < 1:
            raise InvalidConfig("trials", "trials must be an integer >= 1")
        if not isinstance(self.base_seed, int) or not 0 <= self.base_seed <= MAX_SEED - self.trials + 1:
            raise InvalidConfig("base_seed", "base_seed must be an unsigned 64-bit integer")
        if self.format not in FORMATS:
            raise InvalidConfig("format", f"format must be one of {FORMATS}")
        if not isinstance(self.workers, int) or self.workers < 1:
            raise InvalidConfig("workers", "workers must be an integer >= 1")
        labels = [s.display for s in self.scenarios]
        if len(set(labels)) != len(labels):
            raise InvalidConfig("scenarios", "scenario labels must be unique")
        labels = [l.display for l in self.learners]
        if len(set(labels)) != len(labels):
            raise InvalidConfig("learners", "learner labels must be unique")


def _same(a, b) -> bool:
    if isinstance(a, float) and isinstance(b, float) and math.isnan(a) and math.isnan(b):
        return True
    return a == b


@dataclass(frozen=True, eq=False)
class ReportRow:
    scenario: str
    learner: str
    trial: int
    seed: int
    accuracy: float
    accuracy_hidden: float  # NaN when the test split has no hidden rows
    wall_time_ms: float = 0.0

    def __eq__(self, other):
        if not isinstance(other, ReportRow):
            return NotImplemented
        return all(_same(getattr(self, f.name), getattr(other, f.name)) for f in fields(self))

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in CSV_HEADER}


@dataclass(frozen=True)
class Report:
    rows: tuple[ReportRow, ...] = ()

    def __len__(self):
        return len(self.rows)


# -- learners -------------------------------------------------------------------------

def accuracy(predictions, labels) -> float:
    """Fraction of correct predictions; NaN for an empty set."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if len(labels) == 0:
        return float("nan")
    return float(np.count_nonzero(predictions == labels)) / len(labels)


def fit_predict(spec: LearnerSpec, data: ScenarioData, seed: int) -> np.ndarray:
    """Train one learner on the train split and label the test split."""
    p = spec.resolved()
    train, test = data.train, data.test
    if spec.name == "ibsead":
        model = ibsead_fit(
            data.train_obs, train.labels, train.n_classes, data.feature_keys, data.attribute_scales,
            LearnerParams(alpha=p["alpha"], tau=p["tau"], window=p["window"], rho=p["rho"]),
        )
        return ibsead_predict_many(model, data.test_obs)
    if spec.name == "dtree":
        tree = dt_train(train, max_depth=p["max_depth"])
        return np.array([dt_predict(tree, x) for x in test.features])
    if spec.name == "hmm":
        clf = hmm_classifier_train(train, n_states=p["states"], n_symbols=p["symbols"], iters=p["iters"], seed=seed)
        return np.array([hmm_classifier_predict(clf, x) for x in test.features])
    if spec.name == "mlp":
        net = mlp_train(train, hidden=p["hidden"], epochs=p["epochs"], lr=p["lr"], seed=seed)
        return np.argmax(mlp_predict(net, test.features), axis=1) if len(test) else np.zeros(0, dtype=int)
    nb = nb_train(train)
    return np.array([nb_predict(nb, x) for x in test.features])


def run_trial(scenario: ScenarioConfig, learners: Sequence[LearnerSpec], trial: int, seed: int,
              record_timing: bool = False) -> list[ReportRow]:
    data = generate(replace(scenario, seed=seed))
    rows = []
    for spec in learners:
        start = time.perf_counter()
        pred = fit_predict(spec, data, seed)
        elapsed = (time.perf_counter() - start) * 1000.0 if record_timing else 0.0
        y = data.test.labels
        rows.append(ReportRow(
            scenario.display, spec.display, trial, seed,
            accuracy(pred, y), accuracy(pred[data.test_hidden], y[data.test_hidden]), elapsed,
        ))
    return rows


def _run_task(args):
    return run_trial(*args)


def run_experiment(cfg: ExperimentConfig) -> Report:
    tasks = [
        (scenario, cfg.learners, trial, cfg.base_seed + trial, cfg.record_timing)
        for scenario in cfg.scenarios
        for trial in range(cfg.trials)
    ]
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_task, tasks))
    else:
        results = [_run_task(t) for t in tasks]
    s_order = {s.display: i for i, s in enumerate(cfg.scenarios)}
    l_order = {l.display: i for i, l in enumerate(cfg.learners)}
    rows = sorted(
        (r for batch in results for r in batch),
        key=lambda r: (s_order[r.scenario], l_order[r.learner], r.trial),
    )
    return Report(tuple(rows))


# -- report files -------------------------------------------------------------------

def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def report_to_csv(report: Report) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in report.rows:
        writer.writerow([_fmt(getattr(row, k)) for k in CSV_HEADER])
    return buf.getvalue()


def report_to_json(report: Report) -> str:
    # NaN is written as null to keep the file standard JSON
    rows = [
        {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in row.as_dict().items()}
        for row in report.rows
    ]
    return json.dumps(rows, indent=1) + "\n"


def _row_from(values: Mapping[str, Any]) -> ReportRow:
    def real(v):
        return float("nan") if v is None or v == "" else float(v)

    return ReportRow(
        str(values["scenario"]), str(values["learner"]), int(values["trial"]), int(values["seed"]),
        real(values["accuracy"]), real(values["accuracy_hidden"]), real(values["wall_time_ms"]),
    )


def report_from_csv(text: str) -> Report:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_HEADER:
        raise ValueError(f"unexpected header {reader.fieldnames}")
    return Report(tuple(_row_from(r) for r in reader))


def report_from_json(text: str) -> Report:
    return Report(tuple(_row_from(r) for r in json.loads(text)))


def emit_report(report: Report, fmt: str, path=None) -> str:
    """Render a report and, when ``path`` is given, write it there."""
    if fmt not in FORMATS:
        raise InvalidConfig("format", f"format must be one of {FORMATS}")
    text = report_to_csv(report) if fmt == "csv" else report_to_json(report)
    if path is not None:
        Path(path).write_text(text)
    return text


def load_report(path) -> Report:
    text = Path(path).read_text()
    return report_from_json(text) if text.lstrip().startswith("[") else report_from_csv(text)


# -- summaries --------------------------------------------------------------------

@dataclass(frozen=True)
class SummaryRow:
    scenario: str
    learner: str
    n_trials: int
    median: float
    q1: float
    q3: float
    median_hidden: float

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1


def summarize(report: Report) -> list[SummaryRow]:
    """Median and interquartile range of accuracy per (scenario, learner), in report order."""
    if not report.rows:
        raise EmptyReport("cannot summarize an empty report")
    cells: dict[tuple[str, str], list[ReportRow]] = {}
    for row in report.rows:
        cells.setdefault((row.scenario, row.learner), []).append(row)
    out = []
    for (scenario, learner), rows in cells.items():
        acc = np.array([r.accuracy for r in rows])
        hid = np.array([r.accuracy_hidden for r in rows])
        hid = hid[~np.isnan(hid)]
        q1, med, q3 = np.percentile(acc, [25, 50, 75])
        out.append(SummaryRow(
            scenario, learner, len(rows), float(med), float(q1), float(q3),
            float(np.median(hid)) if len(hid) else float("nan"),
        ))
    return out


def format_summary(summary: Sequence[SummaryRow]) -> str:
    lines = [f"{'scenario':<14}{'learner':<10}{'n':>4}{'median':>9}{'iqr':>8}{'hidden':>9}"]
    for s in summary:
        lines.append(f"{s.scenario:<14}{s.learner:<10}{s.n_trials:>4}{s.median:>9.3f}{s.iqr:>8.3f}{s.median_hidden:>9.3f}")
    return "\n".join(lines)


# -- config parsing ---------------------------------------------------------------

def _scenario_from(obj, index: int) -> ScenarioConfig:
    where = f"scenarios[{index}]"
    if isinstance(obj, str):
        obj = {"name": obj}
    if not isinstance(obj, Mapping) or "name" not in obj:
        raise InvalidConfig(where, f"{where} needs a 'name'")
    extra = set(obj) - {"name", "seed", "hidden_strength", "params", "label"}
    if extra:
        key = sorted(extra)[0]
        raise InvalidConfig(key, f"{where} has unknown field {key!r}")
    if obj["name"] not in SCENARIOS:
        raise UnknownScenario(obj["name"], f"unknown scenario {obj['name']!r}")
    hs = obj.get("hidden_strength")
    if hs is not None and not (isinstance(hs, (int, float)) and 0.0 <= hs <= 1.0):
        raise InvalidConfig("hidden_strength", "hidden_strength must lie in [0, 1]")
    params = dict(obj.get("params", {}))
    for key, value in params.items():
        if key not in DEFAULTS[obj["name"]]:
            raise InvalidConfig(key, f"scenario {obj['name']!r} has no parameter {key!r}")
        default = DEFAULTS[obj["name"]][key]
        if isinstance(default, (int, float)) and not isinstance(default, bool):
            if not isinstance(value, (int, float)) or value < 0:
                raise InvalidConfig(key, f"{key} must be a non-negative number")
    return ScenarioConfig(obj["name"], int(obj.get("seed", 0)), hs, params, obj.get("label"))


def _learner_from(obj, index: int) -> LearnerSpec:
    if isinstance(obj, str):
        obj = {"name": obj}
    if not isinstance(obj, Mapping) or "name" not in obj:
        raise InvalidConfig(f"learners[{index}]", f"learners[{index}] needs a 'name'")
    name = obj["name"]
    if name not in LEARNER_PARAMS:
        raise UnknownLearner(name, f"unknown learner {name!r}")
    params = {k: v for k, v in obj.items() if k not in ("name", "label")}
    params.update(obj.get("params", {}) if isinstance(obj.get("params"), Mapping) else {})
    params.pop("params", None)
    spec = LearnerSpec(name, params, obj.get("label"))
    _check_learner_values(spec)
    return spec


def _check_learner_values(spec: LearnerSpec) -> None:
    p = spec.resolved()
    if spec.name == "ibsead":
        for key in ("alpha", "tau", "window", "rho"):
            if not isinstance(p[key], (int, float)) or isinstance(p[key], bool):
                raise InvalidConfig(key, f"{key} must be a number")
        if not isinstance(p["window"], int):
            raise InvalidConfig("window", "window must be an integer")
        try:
            LearnerParams(alpha=p["alpha"], tau=p["tau"], window=p["window"], rho=p["rho"])
        except (TypeError, ValueError) as exc:
            bad = next((k for k in ("alpha", "tau", "window", "rho") if k in str(exc)), "ibsead")
            raise InvalidConfig(bad, str(exc)) from None
    positive_ints = {"dtree": ("max_depth",), "hmm": ("states", "symbols"), "mlp": ("hidden", "epochs")}
    for key in positive_ints.get(spec.name, ()):
        v = p[key]
        if v is not None and (not isinstance(v, int) or isinstance(v, bool) or v < (0 if key == "max_depth" else 1)):
            raise InvalidConfig(key, f"{key} must be a positive integer")
    if spec.name == "hmm" and (not isinstance(p["iters"], int) or p["iters"] < 0):
        raise InvalidConfig("iters", "iters must be a non-negative integer")
    if spec.name == "mlp" and not (isinstance(p["lr"], (int, float)) and p["lr"] > 0):
        raise InvalidConfig("lr", "lr must be positive")


def config_from_dict(data: Mapping[str, Any]) -> ExperimentConfig:
    if not isinstance(data, Mapping):
        raise InvalidConfig("config", "config must be a JSON object")
    allowed = {f.name for f in fields(ExperimentConfig)}
    extra = set(data) - allowed
    if extra:
        key = sorted(extra)[0]
        raise InvalidConfig(key, f"unknown config key {key!r}")
    for key in ("scenarios", "learners"):
        if key not in data or not isinstance(data[key], list):
            raise InvalidConfig(key, f"{key} must be a list")
    return ExperimentConfig(
        scenarios=tuple(_scenario_from(s, i) for i, s in enumerate(data["scenarios"])),
        learners=tuple(_learner_from(l, i) for i, l in enumerate(data["learners"])),
        trials=data.get("trials", 1),
        base_seed=data.get("base_seed", 0),
        out=data.get("out"),
        format=data.get("format", "csv"),
        workers=data.get("workers", 1),
        record_timing=bool(data.get("record_timing", False)),
    )


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return {
        "scenarios": [
            {"name": s.name, "seed": s.seed, "hidden_strength": s.hidden_strength, "params": dict(s.params),
             **({"label": s.label} if s.label else {})}
            for s in cfg.scenarios
        ],
        "learners": [
            {"name": l.name, **dict(l.params), **({"label": l.label} if l.label else {})} for l in cfg.learners
        ],
        "trials": cfg.trials,
        "base_seed": cfg.base_seed,
        "out": cfg.out,
        "format": cfg.format,
        "workers": cfg.workers,
        "record_timing": cfg.record_timing,
    }


def load_config(path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidConfig("config", f"config is not valid JSON: {exc}") from None
    return config_from_dict(data)
