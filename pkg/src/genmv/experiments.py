"""End-to-end experiment drivers used by the command line and the demos."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import data as D
from .diffusion import GeneratorConfig, sample_path, train_generator
from .market import (ConstraintSet, ScenarioTree, markowitz_simplex, mv_value, perf_metrics,
                     solve_hedge_dpp)
from .transport import AdaptedMeasure, Node, adapted_empirical, aw2
from .rl import AgentConfig, ScenarioPool, default_c_grid, select_multiplier, train_agent

log = logging.getLogger(__name__)


# synthetic market -------------------------------------------------------

@dataclass
class SyntheticConfig:
    d: int = 10
    T: int = 12
    gamma: float = 1.5
    n_pool: int = 10000
    n_test: int = 100
    n_periods: int = 10
    seed: int = 0
    agent: AgentConfig = field(default_factory=lambda: AgentConfig(episodes=6000))


def period_prices(rets, s0):
    """Prices for one evaluation period, rebased to the first period's start ``s0``.

    Long test paths would otherwise drift out of the training price range; on
    the first period this is the identity.
    """
    return D.returns_to_prices(rets, s0)


def run_policy(agent, pool, c_star, rets, s0):
    """Per-step rebalanced wealth over one period for a batch ``rets (n, T, d)``."""
    n, T, _ = rets.shape
    P = period_prices(rets, s0)
    w = np.full(n, agent.cfg.w0)
    acts = []
    for t in range(T):
        a = agent.act(t, w, pool.price_features(P[:, t]), c_star)
        acts.append(a)
        w = w * (1.0 + np.sum(a * rets[:, t], axis=1))
    return w, np.stack(acts, axis=1)


def synthetic_experiment(cfg: SyntheticConfig | None = None) -> dict:
    cfg = cfg or SyntheticConfig()
    t0 = time.time()
    spec = D.published_spec(cfg.d, T=cfg.T, seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    train_r = D.gen_synthetic(spec, cfg.n_pool, rng)
    s0 = D.uniform_start_prices(rng, cfg.n_pool, cfg.d)
    pool = ScenarioPool.from_prices(D.returns_to_prices(train_r, s0[:, None, :]))
    acfg = AgentConfig(**{**asdict(cfg.agent), "gamma": cfg.gamma, "wealth_mode": "proportions",
                          "w0": 1.0})
    agent, _, logbook = train_agent(pool, acfg)
    h1 = pool.price_features(s0.mean(axis=0))
    c_star = select_multiplier(agent, h1, cfg.gamma, default_c_grid(acfg))

    test_rng = np.random.default_rng(cfg.seed + 1000)
    test_spec = D.SyntheticSpec(spec.mu, spec.sigma, spec.periods, cfg.T * cfg.n_periods)
    test_r = D.gen_synthetic(test_spec, cfg.n_test, test_rng)
    test_s0 = D.uniform_start_prices(test_rng, cfg.n_test, cfg.d)[:, None, :]
    a_mk = markowitz_simplex(spec.mu, spec.sigma, cfg.gamma)
    R = {"Equal Weight": [], "Static Markowitz": [], "TD3": []}
    for k in range(cfg.n_periods):
        r = test_r[:, k * cfg.T:(k + 1) * cfg.T]
        R["Equal Weight"].append(np.prod(1.0 + r.mean(axis=2), axis=1) - 1.0)
        R["Static Markowitz"].append(np.prod(1.0 + r, axis=1) @ a_mk - 1.0)
        w, _ = run_policy(agent, pool, c_star, r, test_s0)
        R["TD3"].append(w - 1.0)
    rows = {}
    for name, per in R.items():
        per = np.stack(per, axis=1)
        mean = per.mean(axis=1)
        vol = per.std(axis=1, ddof=1)
        sharpe = mean / vol
        mv = float(np.mean([mv_value(per[:, k], cfg.gamma) for k in range(cfg.n_periods)]))
        rows[name] = {
            "return_mean": float(mean.mean()), "return_std": float(mean.std(ddof=1)),
            "vol_mean": float(vol.mean()), "vol_std": float(vol.std(ddof=1)),
            "sharpe_mean": float(sharpe.mean()), "sharpe_std": float(sharpe.std(ddof=1)),
            "mv": mv,
        }
    return {
        "gamma": cfg.gamma,
        "d": cfg.d,
        "c_star": c_star,
        "law_ew_mean": float(spec.mu.mean()),
        "markowitz_weights": a_mk.tolist(),
        "rows": rows,
        "train_log": logbook.rows,
        "seconds": time.time() - t0,
    }


# real-data pipeline -------------------------------------------------------

STRATEGIES = ("Benchmark", "EW", "HistMarkowitz", "GenMarkowitz", "GenTD3")


@dataclass
class BacktestConfig:
    gamma: float = 3.0
    T: int = 12
    hist_window: int = 60
    gen_samples: int = 500
    pool_size: int = 500
    n_pre: int = 1000
    n_cor: int = 1
    snr: float = 0.16
    retrain: bool = True
    threads: int = 1
    seed: int = 0
    strategies: tuple = STRATEGIES
    agent: AgentConfig = field(default_factory=lambda: AgentConfig(gamma=3.0, episodes=1000))


def generator_windows(returns, context: int, T: int) -> np.ndarray:
    """Training windows of length ``context + T`` so the encoder sees a full context."""
    return D.windows(returns, context + T)


def hist_markowitz_weights(history, gamma: float, window: int) -> np.ndarray:
    h = np.asarray(history)[-window:]
    mean = 12.0 * h.mean(axis=0)
    cov = 12.0 * np.atleast_2d(np.cov(h, rowvar=False))
    return markowitz_simplex(mean, cov, gamma)


def gen_markowitz_weights(model, context, gamma, n, seed, **sampler) -> np.ndarray:
    x = sample_path(model, context, 1, n, seed=seed, **sampler)[:, 0]
    return markowitz_simplex(12.0 * x.mean(axis=0), 12.0 * np.atleast_2d(np.cov(x, rowvar=False)),
                             gamma)


def train_gen_td3(model, context, cfg: BacktestConfig, seed: int, agent=None):
    sampler = dict(n_pre=cfg.n_pre, n_cor=cfg.n_cor, snr=cfg.snr)
    pool = ScenarioPool.from_generator(model, context, cfg.T, cfg.pool_size, seed=seed,
                                       threads=cfg.threads, **sampler)
    acfg = AgentConfig(**{**asdict(cfg.agent), "gamma": cfg.gamma, "wealth_mode": "proportions",
                          "w0": 1.0, "seed": seed})
    agent, _, logbook = train_agent(pool, acfg, agent=agent)
    h1 = model.context_state(context)
    c_star = select_multiplier(agent, h1, cfg.gamma, default_c_grid(acfg))
    return agent, c_star, logbook


def backtest(panel: D.MonthlyPanel, split: D.DataSplit, model, cfg: BacktestConfig,
             agent=None, c_star=None) -> dict:
    """Runs the configured strategies over the test months after the context window.

    Returns per-strategy monthly returns, weights, wealth and metrics. A
    pretrained ``agent`` with its ``c_star`` replaces the initial GenTD3 training.
    """
    t0 = time.time()
    R = panel.returns
    start = split.context_range.stop
    months = range(start, split.test.stop)
    if len(months) == 0:
        raise ValueError("test window leaves no months after the context")
    d = R.shape[1]
    out_r = {s: [] for s in cfg.strategies}
    out_w = {s: [] for s in cfg.strategies}
    sampler = dict(n_pre=cfg.n_pre, n_cor=cfg.n_cor, snr=cfg.snr, threads=cfg.threads)

    if len(set(cfg.strategies)) != len(cfg.strategies):
        raise ValueError("duplicate strategy names")
    needs_model = {"GenMarkowitz", "GenTD3"} & set(cfg.strategies)
    if needs_model and model is None:
        raise ValueError(f"{', '.join(sorted(needs_model))} need a generator checkpoint")
    td3_logs = []
    retrain_at = start + (len(months) // 2 // cfg.T) * cfg.T if cfg.retrain else None
    if "GenTD3" in cfg.strategies and agent is None:
        agent, c_star, lg = train_gen_td3(model, R[split.context_range.start:start], cfg, cfg.seed)
        td3_logs.append(lg.rows)
    elif "GenTD3" in cfg.strategies and c_star is None:
        h1 = model.context_state(R[split.context_range.start:start])
        c_star = select_multiplier(agent, h1, cfg.gamma, default_c_grid(agent.cfg))
    # encoder states along the realized series from the first context month
    base = split.context_range.start
    H = model.encoder.encode(model.normalize(R[base:split.test.stop])) if model is not None else None
    block_w = 1.0
    for m in months:
        r = R[m]
        if cfg.retrain and "GenTD3" in cfg.strategies and m == retrain_at and m > start:
            agent, c_star, lg = train_gen_td3(model, R[m - cfg.T:m], cfg, cfg.seed + 1, agent)
            td3_logs.append(lg.rows)
        for s in cfg.strategies:
            if s == "Benchmark":
                if panel.benchmark is None:
                    raise ValueError("panel has no benchmark series")
                out_r[s].append(float(panel.benchmark[m]))
                continue
            if s == "EW":
                a = np.full(d, 1.0 / d)
            elif s == "HistMarkowitz":
                a = hist_markowitz_weights(R[:m], cfg.gamma, cfg.hist_window)
            elif s == "GenMarkowitz":
                a = gen_markowitz_weights(model, R[m - cfg.T:m], cfg.gamma, cfg.gen_samples,
                                          cfg.seed + m, **sampler)
            elif s == "GenTD3":
                t = (m - start) % cfg.T
                if t == 0:
                    block_w = 1.0
                h = H[m - 1 - base]  # state after the months before m
                a = agent.act(t, block_w, h, c_star)[0]
            else:
                raise ValueError(f"unknown strategy {s!r}")
            ret = float(a @ r)
            if s == "GenTD3":
                block_w *= 1.0 + ret
            out_r[s].append(ret)
            out_w[s].append(a)
    metrics = {s: perf_metrics(out_r[s], gamma=cfg.gamma).to_dict(s) for s in cfg.strategies}
    return {
        "months": [int(panel.dates[m]) for m in months],
        "returns": {s: list(map(float, v)) for s, v in out_r.items()},
        "weights": {s: [list(map(float, a)) for a in v] for s, v in out_w.items()},
        "wealth": {s: np.cumprod(1.0 + np.asarray(v)).tolist() for s, v in out_r.items()},
        "metrics": metrics,
        "c_star": c_star,
        "td3_logs": td3_logs,
        "seconds": time.time() - t0,
    }


# training budget vs adapted distance ------------------------------------

def ar1_paths(rng, n: int, rho: float = 0.6, T: int = 2) -> np.ndarray:
    """Stationary unit-variance Gaussian AR(1) paths ``(n, T)``."""
    x = np.empty((n, T))
    x[:, 0] = rng.standard_normal(n)
    for t in range(1, T):
        x[:, t] = rho * x[:, t - 1] + math.sqrt(1.0 - rho * rho) * rng.standard_normal(n)
    return x


def aw2_budget_experiment(budgets=(2, 8, 32), n_train: int = 5000, n_eval: int = 2000,
                          delta: float = 0.25, rho: float = 0.6, seed: int = 0,
                          gen: GeneratorConfig | None = None) -> dict:
    """Adapted W2 between true and generated AR(1) laws after each training budget."""
    rng = np.random.default_rng(seed)
    data = ar1_paths(rng, n_train, rho)[:, :, None]
    ref = adapted_empirical(ar1_paths(np.random.default_rng(seed + 1), n_eval, rho), delta)
    gen = gen or GeneratorConfig(ema_decay=0.99, hidden_dim=8, width=64, seed=seed)
    rows = []
    for epochs in budgets:
        model, losses = train_generator(data, replace(gen, epochs=int(epochs)))
        paths = sample_path(model, None, 2, n_eval, seed=seed + 2)[:, :, 0]
        rows.append({"epochs": int(epochs), "aw2": aw2(ref, adapted_empirical(paths, delta)),
                     "final_loss": losses[-1]})
    return {"delta": delta, "rho": rho, "n_eval": n_eval, "rows": rows}


# TD3 against the exact hedging value ------------------------------------

def crosscheck_tree() -> ScenarioTree:
    """Two-step, two-branch, two-asset tree used as the only training scenario."""
    leaf = lambda v, p: Node(np.array(v, dtype=float), p)
    up = Node(np.array([11.0, 10.5]), 0.5, [leaf([12.0, 10.0], 0.5), leaf([10.5, 11.5], 0.5)])
    down = Node(np.array([9.5, 10.2]), 0.5, [leaf([10.0, 10.6], 0.4), leaf([9.0, 9.8], 0.6)])
    root = Node(np.zeros(0), 1.0, [Node(np.array([10.0, 10.0]), 1.0, [up, down])])
    return ScenarioTree(AdaptedMeasure(root, 3, 2))


def td3_dpp_crosscheck(cs=(0.8, 1.0, 1.3), seed: int = 0, n_actions: int = 41,
                       agent: AgentConfig | None = None) -> dict:
    tree = crosscheck_tree()
    K = ConstraintSet("simplex")
    pool = ScenarioPool.from_tree(tree)
    cfg = agent or AgentConfig(wealth_mode="shares", w0=0.0, episodes=4000, warmup_episodes=200,
                               c_mean=0.3, seed=seed)
    trained, _, _ = train_agent(pool, cfg)
    rows = []
    for c in cs:
        exact = solve_hedge_dpp(tree, c, K, n_actions=n_actions).root_value(0.0)
        critic = float(trained.value(0, 0.0, pool.features[0, 0], c)[0])
        rows.append({"c": float(c), "dpp": float(exact), "critic": critic,
                     "error": abs(critic - float(exact))})
    return {"rows": rows}
