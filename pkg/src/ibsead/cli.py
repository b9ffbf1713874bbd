"""Command-line entry point.

    ibsead-bench run --config experiment.json
    ibsead-bench run --scenario loans --learner ibsead --learner dtree --trials 10 --seed 0 \\
        --out report.csv --format csv
    ibsead-bench summarize report.csv
    ibsead-bench generate --scenario visual --seed 3 --out-dir data/
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .baselines.dataset import write_jsonl
from .bench import (
    FORMATS,
    config_from_dict,
    config_to_dict,
    emit_report,
    format_summary,
    load_config,
    load_report,
    run_experiment,
    summarize,
)
from .errors import ConfigError, IbseadError
from .scenarios import SCENARIOS, ScenarioConfig, generate
from .world import dump_world

# CLI flag -> (learner, parameter)
HYPER_FLAGS = {
    "alpha": ("ibsead", "alpha", float),
    "tau": ("ibsead", "tau", float),
    "window": ("ibsead", "window", int),
    "rho": ("ibsead", "rho", float),
    "max_depth": ("dtree", "max_depth", int),
    "hidden": ("mlp", "hidden", int),
    "epochs": ("mlp", "epochs", int),
    "lr": ("mlp", "lr", float),
    "states": ("hmm", "states", int),
    "symbols": ("hmm", "symbols", int),
    "iters": ("hmm", "iters", int),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(f"error: {message}")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ibsead-bench", description="Run IBSEAD and baseline learners on synthetic scenarios.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run an experiment and write a report")
    run.add_argument("--config", help="JSON experiment config")
    run.add_argument("--scenario", action="append", help="scenario name (repeatable)")
    run.add_argument("--learner", action="append", help="learner name (repeatable)")
    run.add_argument("--trials", type=int)
    run.add_argument("--seed", type=int, help="base seed; trial i uses seed + i")
    run.add_argument("--out", help="report path (stdout when omitted)")
    run.add_argument("--format", choices=FORMATS)
    run.add_argument("--workers", type=int, help="parallel trial processes")
    run.add_argument("--hidden-strength", type=float, dest="hidden_strength")
    run.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                     help="scenario size parameter, e.g. volatile_fraction=0")
    run.add_argument("--timing", action="store_true", help="record wall time (reports stop being reproducible)")
    run.add_argument("--summary", action="store_true", help="print a median/IQR table to stderr")
    for flag, (_, _, kind) in HYPER_FLAGS.items():
        run.add_argument("--" + flag.replace("_", "-"), dest=flag, type=kind)

    summ = sub.add_parser("summarize", help="print median and IQR per scenario and learner")
    summ.add_argument("report")

    gen = sub.add_parser("generate", help="write a scenario's datasets and world as files")
    gen.add_argument("--scenario", required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--hidden-strength", type=float, dest="hidden_strength")
    gen.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    gen.add_argument("--out-dir", required=True)
    return parser


def _params(pairs) -> dict:
    out = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise ConfigError("param", f"--param expects KEY=VALUE, got {pair!r}")
        out[key] = _parse_value(value)
    return out


def _config_from_args(args):
    if args.config:
        cfg = load_config(args.config)
        overrides = {k: getattr(args, k) for k in ("trials", "out", "format", "workers") if getattr(args, k) is not None}
        if args.seed is not None:
            overrides["base_seed"] = args.seed
        if overrides or args.timing:
            data = {**config_to_dict(cfg), **overrides}
            if args.timing:
                data["record_timing"] = True
            cfg = config_from_dict(data)
        return cfg
    if not args.scenario:
        raise ConfigError("scenario", "give --config or at least one --scenario")
    if not args.learner:
        raise ConfigError("learner", "give at least one --learner")
    params = _params(args.param)
    learners = []
    for name in args.learner:
        spec = {"name": name}
        for flag, (owner, key, _) in HYPER_FLAGS.items():
            value = getattr(args, flag)
            if value is not None and owner == name:
                spec[key] = value
        learners.append(spec)
    for flag, (owner, _, _) in HYPER_FLAGS.items():
        if getattr(args, flag) is not None and owner not in args.learner:
            raise ConfigError(flag, f"--{flag.replace('_', '-')} applies to learner {owner!r}, which is not selected")
    return config_from_dict({
        "scenarios": [
            {"name": s, "hidden_strength": args.hidden_strength, "params": params} for s in args.scenario
        ],
        "learners": learners,
        "trials": 1 if args.trials is None else args.trials,
        "base_seed": 0 if args.seed is None else args.seed,
        "out": args.out,
        "format": args.format or "csv",
        "workers": args.workers or 1,
        "record_timing": args.timing,
    })


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    report = run_experiment(cfg)
    text = emit_report(report, cfg.format, cfg.out)
    if cfg.out is None:
        sys.stdout.write(text)
    if args.summary:
        print(format_summary(summarize(report)), file=sys.stderr)
    return 0


def cmd_summarize(args) -> int:
    print(format_summary(summarize(load_report(args.report))))
    return 0


def cmd_generate(args) -> int:
    if args.scenario not in SCENARIOS:
        raise ConfigError("scenario", f"unknown scenario {args.scenario!r}")
    data = generate(ScenarioConfig(args.scenario, args.seed, args.hidden_strength, _params(args.param)))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_jsonl(data.train, out / "train.jsonl", data.train_truth, out / "train_truth.jsonl")
    write_jsonl(data.test, out / "test.jsonl", data.test_truth, out / "test_truth.jsonl")
    dump_world(data.world, out / "world.json")
    print(f"wrote {len(data.train)} train and {len(data.test)} test rows to {out}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"run": cmd_run, "summarize": cmd_summarize, "generate": cmd_generate}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc.key}: {exc}", file=sys.stderr)
        return 2
    except (IbseadError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
