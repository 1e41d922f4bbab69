"""Train the score model on 1-D Gaussian data and compare samples with the target."""
import numpy as np

from genmv.diffusion import GeneratorConfig, sample_path, train_generator
from genmv.validation import weighted_score_mse

mean, var = 0.5, 0.04
rng = np.random.default_rng(0)
data = mean + np.sqrt(var) * rng.standard_normal((20000, 1, 1))
model, losses = train_generator(data, GeneratorConfig(epochs=30, ema_decay=0.99, hidden_dim=8,
                                                      width=64))
print(f"dsm loss {losses[0]:.4f} -> {losses[-1]:.4f}")
print(f"density-weighted score mse {weighted_score_mse(model, mean, var):.4f}")
x = sample_path(model, None, 1, 5000, seed=1)[:, 0, 0]
print(f"samples: mean {x.mean():.4f} (target {mean}), var {x.var():.5f} (target {var})")
