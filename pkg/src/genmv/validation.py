"""Oracle suites behind ``genmv validate``: each returns a list of checks."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .diffusion import GeneratorConfig, analytic_gaussian_score, sample_path, train_generator
from .market import (dual_mv, enumerate_hedge, enumerate_mv, random_tree, solve_hedge_dpp,
                     stability_base_tree, stability_scatter)
from .transport import AdaptedMeasure, Node, aw2, bicausal_lp, w2


@dataclass
class Check:
    name: str
    ok: bool
    detail: str = ""
    values: list = field(default_factory=list)  # per-instance numbers, for the JSON report


def random_measure(rng, T: int = 2, branches: int = 3, d: int = 1) -> AdaptedMeasure:
    def grow(depth):
        if depth == T:
            return []
        k = int(rng.integers(1, branches + 1))
        return [Node(rng.normal(size=d), float(p), grow(depth + 1))
                for p in rng.dirichlet(np.ones(k))]

    return AdaptedMeasure(Node(np.zeros(0), 1.0, grow(0)), T, d)


def transport_oracles(seed: int = 0, n_lp: int = 20, n_axioms: int = 50, **_) -> list:
    rng = np.random.default_rng(seed)
    worst, below = 0.0, 0
    for _ in range(n_lp):
        mu, nu = random_measure(rng), random_measure(rng)
        a = aw2(mu, nu)
        lp, _ = bicausal_lp(mu, nu)
        worst = max(worst, abs(a * a - lp))
        below += a < w2(mu.flatten(), nu.flatten()) - 1e-9
    out = [Check("aw2 == bicausal LP", worst < 1e-8, f"max |diff| {worst:.3g} on {n_lp} pairs"),
           Check("aw2 >= w2", below == 0, f"{below} violations")]
    sym = tri = ident = 0.0
    for _ in range(n_axioms):
        x, y, z = (random_measure(rng) for _ in range(3))
        xy, yx = aw2(x, y), aw2(y, x)
        sym = max(sym, abs(xy - yx))
        tri = max(tri, xy - aw2(x, z) - aw2(z, y))
        ident = max(ident, aw2(x, x))
    out += [Check("symmetry", sym < 1e-10, f"max {sym:.3g}"),
            Check("triangle inequality", tri < 1e-9, f"max excess {tri:.3g}"),
            Check("identity", ident < 1e-10, f"max aw2(x, x) {ident:.3g}")]
    return out


def dpp(seed: int = 1, n: int = 20, **_) -> list:
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(n):
        tree = random_tree(rng, T=int(rng.integers(2, 4)), max_branches=3)
        c = float(rng.uniform(-2.0, 3.0))
        rows.append([c, solve_hedge_dpp(tree, c).root_value(), enumerate_hedge(tree, c)])
    worst = max(abs(a - b) for _, a, b in rows)
    return [Check("DPP == enumeration", worst < 1e-10, f"max |diff| {worst:.3g} on {n} trees",
                  rows)]


def duality(seed: int = 2, n: int = 10, gamma: float = 1.5, **_) -> list:
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(n):
        tree = random_tree(rng, T=3, max_branches=2)
        res = dual_mv(tree, gamma, refine=2)
        rows.append([res.a, res.value, enumerate_mv(tree, gamma)])
    worst = max(abs(a - b) for _, a, b in rows)
    return [Check("dual == direct MV", worst <= 1e-3, f"max |diff| {worst:.3g} on {n} trees",
                  rows)]


def stability(seed: int = 3, out_dir=None, **_) -> list:
    sc = stability_scatter(stability_base_tree(seed), n=30, seed=seed)
    if out_dir is not None:
        path = Path(out_dir) / "stability.csv"
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["aw2", "abs_dv", "envelope"])  # envelope = 1.05 C aw2 + tol
            for a, v in zip(sc.aw2, sc.dv):
                wr.writerow([f"{a:.12g}", f"{v:.12g}", f"{1.05 * sc.C * a + sc.tol:.12g}"])
    return [Check("spearman > 0.8", sc.spearman > 0.8, f"rho {sc.spearman:.3f}"),
            Check("under envelope", sc.within, f"C {sc.C:.4g}")]


def gaussian_score(seed: int = 0, mean: float = 0.5, var: float = 0.04, **_) -> list:
    rng = np.random.default_rng(seed)
    data = mean + np.sqrt(var) * rng.standard_normal((20000, 1, 1))
    cfg = GeneratorConfig(epochs=30, ema_decay=0.99, hidden_dim=8, width=64, seed=seed)
    model, _ = train_generator(data, cfg)
    mse = weighted_score_mse(model, mean, var, seed=seed + 1)
    x = sample_path(model, None, 1, 5000, seed=seed + 2)[:, 0, 0]
    return [Check("density-weighted score MSE < 0.05", mse < 0.05, f"{mse:.4g}"),
            Check("|mean - target| < 0.01", abs(x.mean() - mean) < 0.01, f"{x.mean():.4f}"),
            Check("variance within 20%", abs(x.var() - var) < 0.2 * var, f"{x.var():.5f}")]


def weighted_score_mse(model, mean, var, n_tau: int = 64, n_x: int = 2000, seed: int = 0):
    """Mean over uniform tau of E_{x ~ p_tau} |s - grad log p_tau|^2, standardized units."""
    sched = model.schedule
    m = (mean - model.mean[0]) / model.std[0]
    v = var / model.std[0] ** 2
    rng = np.random.default_rng(seed)
    taus = np.linspace(sched.tau0, sched.horizon, n_tau)
    acc = 0.0
    for tau in taus:
        h1, h2 = sched.h1(tau), sched.h2(tau)
        x = m * h1 + np.sqrt(v * h1 * h1 + h2) * rng.standard_normal((n_x, 1))
        err = model.score(tau, np.zeros((n_x, model.hidden_dim)), x) \
            - analytic_gaussian_score(tau, x, m, v, sched)
        acc += float(np.mean(err * err))
    return acc / n_tau


SUITES = {
    "transport-oracles": transport_oracles,
    "dpp": dpp,
    "duality": duality,
    "stability": stability,
    "gaussian-score": gaussian_score,
}


def run_suite(name: str, **kw) -> list:
    if name == "all":
        return [c for fn in SUITES.values() for c in fn(**kw)]
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)} or all")
    return SUITES[name](**kw)
