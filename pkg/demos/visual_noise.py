"""Noise blocks half the sensor channels on some test images.

Run:  python3 demos/visual_noise.py
"""

import numpy as np

from ibsead.baselines import mlp_predict, mlp_train
from ibsead.classifier import ibsead_fit, ibsead_predict_many
from ibsead.scenarios import ScenarioConfig, gen_visual

data = gen_visual(ScenarioConfig("visual", seed=0))
model = ibsead_fit(data.train_obs, data.train.labels, 3, data.feature_keys, data.attribute_scales)
ours = ibsead_predict_many(model, data.test_obs)
net = mlp_train(data.train, seed=0)
theirs = np.argmax(mlp_predict(net, data.test.features), axis=1)

y, bad = data.test.labels, data.test_hidden
print(f"corrupted test rows: {int(bad.sum())} of {len(y)}")
print(f"ibsead  overall {np.mean(ours == y):.3f}  corrupted {np.mean(ours[bad] == y[bad]):.3f}")
print(f"mlp     overall {np.mean(theirs == y):.3f}  corrupted {np.mean(theirs[bad] == y[bad]):.3f}")
