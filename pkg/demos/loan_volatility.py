"""IBSEAD against the baselines on loans with and without volatile cases.

Run:  python3 demos/loan_volatility.py
"""

from ibsead.bench import config_from_dict, format_summary, run_experiment, summarize

for fraction in (0.0, 0.2):
    cfg = config_from_dict({
        "scenarios": [{"name": "loans", "params": {"volatile_fraction": fraction}}],
        "learners": ["ibsead", "dtree", "mlp", "nbayes", "hmm"],
        "trials": 5,
    })
    print(f"volatile fraction {fraction}")
    print(format_summary(summarize(run_experiment(cfg))))
    print()
