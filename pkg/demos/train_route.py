"""Rain rusts the route out of sight; delays follow with a lag.

Run:  python3 demos/train_route.py
"""

from ibsead.scenarios import ScenarioConfig, gen_train_route

data = gen_train_route(ScenarioConfig("train_route", seed=3, params={"n_episodes": 20}))
print(" ep  rain  delay  late  hidden rust")
for entry, truth in zip(data.log, data.train_truth + data.test_truth):
    print(f"{entry['episode']:3d}  {entry['rain']:4.2f}  {entry['delay']:5.1f}  {entry['delayed']:4d}  {truth['rust']:5.2f}")
