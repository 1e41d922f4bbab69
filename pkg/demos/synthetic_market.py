"""TD3 against equal weight and static Markowitz on a three-asset synthetic market.

Small budget so it runs in well under a minute; the full ten-asset run is
``synthetic_experiment(SyntheticConfig())``.
"""
from genmv.experiments import SyntheticConfig, synthetic_experiment
from genmv.rl import AgentConfig

cfg = SyntheticConfig(d=3, n_pool=2000, agent=AgentConfig(episodes=800))
res = synthetic_experiment(cfg)
print(f"c* = {res['c_star']:.3f}, gamma = {res['gamma']}")
for name, row in res["rows"].items():
    print(f"{name:17s} return {row['return_mean']:+.4f}  vol {row['vol_mean']:.4f}  "
          f"sharpe {row['sharpe_mean']:.3f}  mv {row['mv']:+.4f}")
