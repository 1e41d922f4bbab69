"""End-to-end acceptance criteria; each test logs one pass/fail line via ``record``."""
import csv
import json
import time

import numpy as np

from genmv.cli import main
from genmv.diffusion import ScoreModel, TrainBatch, dsm_loss, esm_loss, sample_path, train_generator
from genmv.diffusion import GeneratorConfig
from genmv.experiments import (SyntheticConfig, ar1_paths, aw2_budget_experiment,
                               synthetic_experiment, td3_dpp_crosscheck)
from genmv.nn import DenseNet, GRUEncoder
from genmv.rl import Agent, AgentConfig, critic_loss_grad
from genmv import validation
from conftest import snapshot
from helpers import max_rel_error, record
from test_diffusion import toy


# 1: finite differences over every network type ---------------------------

def _fd_case(seed: int) -> float:
    rng = np.random.default_rng(seed)
    kind = seed % 5
    if kind in (0, 1):
        acts = ["tanh", "tanh", "identity"] if kind == 0 else ["relu", "identity"]
        net = DenseNet([3] + [5] * (len(acts) - 1) + [2], acts, rng=rng)
        x, up = rng.standard_normal((4, 3)), rng.standard_normal((4, 2))
        grads, _ = net.backward(net.forward_cache(x)[1], up)
        return max_rel_error(lambda: float(np.sum(up * net.forward(x))), net.params, grads)
    if kind == 2:
        enc = GRUEncoder(2, 3, rng=rng)
        path, up = rng.standard_normal((3, 4, 2)), rng.standard_normal((3, 4, 3))
        grads, _, _ = enc.backward(enc.encode_cache(path)[1], up)
        return max_rel_error(lambda: float(np.sum(up * enc.encode(path))), enc.params, grads)
    if kind == 3:
        param = ("residual", "noise", "dissipative")[(seed // 5) % 3]
        m = ScoreModel(1 + seed % 2, hidden_dim=2, width=5, depth=1, time_width=4,
                       parameterization=param, bound=3.0, seed=seed)
        d = m.d
        batch = TrainBatch(rng.standard_normal((3, 2, d)), rng.uniform(0.05, 1.0, (3, 2)),
                           rng.standard_normal((3, 2, d)))
        _, grads = dsm_loss(m, batch)
        return max_rel_error(lambda: dsm_loss(m, batch)[0], m.params, grads)
    agent = Agent(2, 2, 3, AgentConfig(width=6, depth=2, activation="tanh", seed=seed))
    sa = rng.normal(size=(3, 2 + 2 + 2 + 1))
    y = rng.normal(size=3)
    _, grads = critic_loss_grad(agent.q1, sa, y)
    err = max_rel_error(lambda: critic_loss_grad(agent.q1, sa, y)[0], agent.q1.params, grads)
    pol, st = agent.policy, rng.normal(size=(3, 2 + 2 + 1))
    up = rng.standard_normal((3, 2))
    grads, _ = pol.backward(pol.forward_cache(st)[1], up)
    return max(err, max_rel_error(lambda: float(np.sum(up * pol.forward(st))), pol.params, grads))


def test_c01_gradients_match_finite_differences():
    t0 = time.time()
    errs = [_fd_case(seed) for seed in range(100)]
    secs = time.time() - t0
    ok = max(errs) < 1e-4 and secs < 30
    record(1, ok, f"max rel err {max(errs):.2e} over 100 configs in {secs:.1f}s")
    assert ok


# 2: Gaussian score oracle ------------------------------------------------

def test_c02_gaussian_score_oracle(gaussian_runs):
    out = gaussian_runs["out"]
    model = ScoreModel.load(out / "generator.ckpt")
    rep = json.loads((out / "gen_train.json").read_text())
    mse = validation.weighted_score_mse(model, 0.5, 0.04)
    mean, var = rep["sample_mean"], rep["sample_var"]
    ok = mse < 0.05 and abs(mean - 0.5) < 0.01 and abs(var - 0.04) < 0.2 * 0.04
    record(2, ok, f"score mse {mse:.4f}, mean {mean:.4f}, var {var:.5f}")
    assert ok


# 3: denoising and explicit score matching share gradients ----------------

def test_c03_dsm_esm_gradients_agree():
    worst = 0.0
    for seed, param in enumerate(["residual", "noise", "dissipative"]):
        m = toy(param, seed=seed)
        rng = np.random.default_rng(seed)
        data = 0.5 + 0.2 * rng.standard_normal((100000, 1, 1))
        _, g_dsm = dsm_loss(m, TrainBatch.draw(data, m.schedule, rng))
        _, g_esm = esm_loss(m, 0.5, 0.04)
        a = np.concatenate([g_dsm[k].ravel() for k in g_esm])
        e = np.concatenate([g_esm[k].ravel() for k in g_esm])
        assert len(e) == 4
        worst = max(worst, np.linalg.norm(a - e) / np.linalg.norm(e))
    record(3, worst < 0.05, f"max relative gradient gap {worst:.4f} at 1e5 samples")
    assert worst < 0.05


# 4: conditional generation on AR(1) --------------------------------------

def test_c04_ar1_conditional_generation():
    rho = 0.6
    data = ar1_paths(np.random.default_rng(0), 20000, rho)[:, :, None]
    m, _ = train_generator(data, GeneratorConfig(epochs=30, ema_decay=0.99, hidden_dim=8,
                                                 width=64, seed=0))
    p = sample_path(m, None, 2, 5000, seed=3)[:, :, 0]
    slope = np.polyfit(p[:, 0], p[:, 1], 1)[0]
    gaps = [abs(sample_path(m, np.array([[x1]]), 1, 2000, seed=4).mean() - rho * x1)
            for x1 in (-1.0, -0.3, 0.5, 1.2)]
    ok = 0.45 <= slope <= 0.75 and max(gaps) < 0.1
    record(4, ok, f"slope {slope:.3f}, max conditional-mean gap {max(gaps):.3f}")
    assert ok


# 5-9: oracle suites --------------------------------------------------------

def _suite(k, name, **kw):
    checks = validation.SUITES[name](**kw)
    ok = all(c.ok for c in checks)
    record(k, ok, "; ".join(f"{c.name}: {c.detail}" for c in checks))
    return ok


def test_c05_aw2_oracle_equivalence():
    assert _suite(5, "transport-oracles")


def test_c06_aw2_shrinks_with_training():
    res = aw2_budget_experiment()
    vals = [r["aw2"] for r in res["rows"]]
    ok = all(a > b for a, b in zip(vals, vals[1:]))
    record(6, ok, "aw2 by budget " + ", ".join(f"{r['epochs']}: {r['aw2']:.3f}"
                                              for r in res["rows"]))
    assert ok


def test_c07_dpp_exactness():
    assert _suite(7, "dpp")


def test_c08_duality():
    assert _suite(8, "duality")


def test_c09_stability():
    assert _suite(9, "stability")


# 10-11: reinforcement learning -------------------------------------------

def test_c10_td3_matches_dpp():
    rows = td3_dpp_crosscheck()["rows"]
    worst = max(r["error"] for r in rows)
    record(10, worst < 0.05, "errors " + ", ".join(f"c={r['c']}: {r['error']:.4f}" for r in rows))
    assert worst < 0.05


def test_c11_synthetic_td3_beats_equal_weight():
    res = synthetic_experiment(SyntheticConfig())
    td3, ew = res["rows"]["TD3"]["mv"], res["rows"]["Equal Weight"]["mv"]
    record(11, td3 >= ew, f"d={res['d']}: TD3 mv {td3:.4f} vs EW mv {ew:.4f}")
    assert td3 >= ew


# 12-13: command line -------------------------------------------------------

def test_c12_pipeline_completion(pipeline):
    out = pipeline["out"]
    rep = json.loads((out / "backtest_report.json").read_text())
    six = {"ann_return", "ann_vol", "sharpe", "sortino", "max_dd", "calmar"}
    roster = {"Benchmark", "EW", "HistMarkowitz", "GenMarkowitz", "GenTD3"}
    metrics_ok = set(rep["metrics"]) == roster and all(
        six <= set(m) and all(np.isfinite(m[k]) for k in six) for m in rep["metrics"].values())
    with open(out / "backtest_weights.csv") as fh:
        rows = list(csv.reader(fh))[1:]
    W = np.array([[float(v) for v in r[2:]] for r in rows])
    weighted = {r[1] for r in rows} == roster - {"Benchmark"}
    simplex = bool(np.all(W >= -1e-12) and np.allclose(W.sum(axis=1), 1.0, atol=1e-9))
    codes_ok = all(c == 0 for c in pipeline["codes"].values())
    ok = codes_ok and metrics_ok and simplex and weighted
    record(12, ok, f"exit codes {list(pipeline['codes'].values())}, {len(W)} weight vectors")
    assert ok


def test_c13_determinism(gaussian_runs, tmp_path):
    same = {"gaussian": gaussian_runs["first"] == gaussian_runs["second"]}
    for suite in ("dpp", "duality"):
        outs = []
        for i in range(2):
            d = tmp_path / f"{suite}{i}"
            assert main(["validate", suite, "--out-dir", str(d), "--threads", "1"]) == 0
            outs.append(snapshot(d))
        same[suite] = outs[0] == outs[1]
    ok = all(same.values())
    record(13, ok, ", ".join(f"{k} {'identical' if v else 'DIFFERS'}" for k, v in same.items()))
    assert ok
