"""Command line: ``genmv <command> [--config FILE] [--seed N] [--threads N] [--out-dir DIR]``.

Configuration is a flat TOML file of ``key = value`` lines; one file can serve
every command, each reading only its own keys. Any key can be overridden by an environment variable ``GENMV_<KEY>`` and the common keys also
by flags. Exit codes: 0 success, 1 numerical failure, 2 configuration or I/O
failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

try:
    import tomllib as tomli
except ModuleNotFoundError:  # Python < 3.11
    import tomli

from . import data as D
from .diffusion import GeneratorConfig, ScoreModel, sample_path, train_generator
from .experiments import (STRATEGIES, BacktestConfig, SyntheticConfig, backtest,
                          generator_windows, synthetic_experiment, train_gen_td3)
from .market import ConstraintSet, ScenarioTree, dual_mv, solve_hedge_dpp
from .rl import Agent, AgentConfig
from .transport import adapted_empirical, aw2, w2
from .validation import SUITES, run_suite

log = logging.getLogger("genmv")


class ConfigError(Exception):
    """Bad configuration or unreadable input (exit code 2)."""


# configuration ----------------------------------------------------------

COMMON = {"seed": 0, "threads": 1, "out_dir": "."}

DATA_KEYS = {"data": "", "benchmark": "", "assets": ",".join(D.INDUSTRIES),
             "test_months": 192, "val_months": 500, "context": 12}

GEN_KEYS = {"hidden_dim": 16, "width": 64, "depth": 2, "time_width": 16,
            "parameterization": "residual", "epochs": 50, "batch_size": 256, "lr": 1e-3,
            "ema_decay": 0.999}

SAMPLER_KEYS = {"n_pre": 1000, "n_cor": 1, "snr": 0.16}

AGENT_KEYS = {"gamma": 3.0, "episodes": 1000, "warmup_episodes": 100, "agent_width": 64,
              "agent_depth": 2, "lr_actor": 1e-3, "lr_critic": 1e-3, "agent_batch": 128,
              "c_mean": 0.1, "pool_size": 500, "T": 12}

DEFAULTS = {
    "gen-train": {**DATA_KEYS, **GEN_KEYS, "data_kind": "french", "T": 12, "mean": 0.5,
                  "var": 0.04, "n_train": 20000, "n_eval": 5000, **SAMPLER_KEYS},
    "gen-sample": {"checkpoint": "", "context_data": "", "assets": ",".join(D.INDUSTRIES),
                   "context": 12, "n_paths": 100,
                   "T_out": 12, **SAMPLER_KEYS},
    "agent-train": {**DATA_KEYS, **AGENT_KEYS, **SAMPLER_KEYS, "checkpoint": ""},
    "backtest": {**DATA_KEYS, **AGENT_KEYS, **SAMPLER_KEYS, "checkpoint": "",
                 "agent_checkpoint": "", "c_star": "", "hist_window": 60, "gen_samples": 500,
                 "retrain": True, "strategies": ",".join(STRATEGIES)},
    "synthetic-exp": {"d": 10, "T": 12, "gamma": 1.5, "n_pool": 10000, "n_test": 100,
                      "n_periods": 10, "episodes": 6000},
    "validate": {},
    "aw2": {"delta": 0.25},
    "dpp-solve": {"c": "", "gamma": "", "constraint": "simplex", "lower": -1.0, "upper": 1.0,
                  "n_actions": 21, "mode": "reachable", "w0": 0.0},
}

ALL_KEYS = set(COMMON).union(*DEFAULTS.values())


def _coerce(key, value, default):
    try:
        if isinstance(default, bool):
            if isinstance(value, bool):
                return value
            s = str(value).strip().lower()
            if s in ("1", "true", "yes", "on"):
                return True
            if s in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if isinstance(default, int):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if isinstance(default, float):
            return float(value)
        if isinstance(value, (list, tuple)):
            return ",".join(str(v) for v in value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"config key {key!r}: cannot read {value!r} as "
                          f"{type(default).__name__}") from None


def load_config(command: str, path=None, flags=None, environ=None) -> dict:
    """Defaults < config file < ``GENMV_*`` environment < command-line flags."""
    defaults = {**COMMON, **DEFAULTS[command]}
    cfg = dict(defaults)
    if path:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        try:
            raw = tomli.loads(p.read_text())
        except tomli.TOMLDecodeError as e:
            raise ConfigError(f"{p}: {e}") from None
        for k, v in raw.items():
            if isinstance(v, dict):
                raise ConfigError(f"{p}: tables are not supported (key {k!r}); use flat keys")
            if k not in defaults:
                # one file may drive the whole pipeline; keys of other commands are skipped
                if k in ALL_KEYS:
                    continue
                raise ConfigError(f"{p}: unknown key {k!r}")
            cfg[k] = _coerce(k, v, defaults[k])
    env = os.environ if environ is None else environ
    for k in defaults:
        name = "GENMV_" + k.upper()
        if name in env:
            cfg[k] = _coerce(k, env[name], defaults[k])
    for k, v in (flags or {}).items():
        if v is not None:
            cfg[k] = _coerce(k, v, defaults[k])
    if cfg["threads"] < 1:
        raise ConfigError("threads must be >= 1")
    return cfg


# helpers ----------------------------------------------------------------

def file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def run_id(cfg: dict, hashes: dict) -> str:
    # where the outputs go does not change the experiment
    echo = {k: v for k, v in cfg.items() if k != "out_dir"}
    blob = json.dumps({"config": echo, "data": hashes}, sort_keys=True).encode()
    return hashlib.sha1(blob).hexdigest()[:12]


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not serializable: {type(o).__name__}")


def write_timing(out: Path, name: str, seconds: float) -> None:
    # wall clock lives beside the report so reports stay byte-identical across runs
    write_json(out / f"{name}.timing.json", {"seconds": round(seconds, 3)})


def _out_dir(cfg) -> Path:
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _need_file(cfg, key) -> Path:
    if not cfg[key]:
        raise ConfigError(f"config key {key!r} is required")
    p = Path(cfg[key])
    if not p.exists():
        raise ConfigError(f"{key} not found: {p}")
    return p


def _assets(cfg):
    names = tuple(a.strip() for a in cfg["assets"].split(",") if a.strip())
    if not names:
        raise ConfigError("assets must list at least one column")
    return names


def _load_panel(cfg):
    path = _need_file(cfg, "data")
    try:
        panel = D.load_french_csv(path, _assets(cfg), cfg["benchmark"] or None)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    return path, panel


def _split(cfg, n):
    try:
        return D.make_splits(n, cfg["test_months"], cfg["val_months"], cfg["context"])
    except ValueError as e:
        raise ConfigError(str(e)) from None


def _load_model(cfg, key="checkpoint") -> ScoreModel:
    if not cfg[key]:
        p = Path(cfg["out_dir"]) / "generator.ckpt"
        if not p.exists():
            raise ConfigError(f"{key} not set and {p} does not exist")
        cfg[key] = str(p)
    path = _need_file(cfg, key)
    try:
        return ScoreModel.load(path)
    except (ValueError, KeyError) as e:
        raise ConfigError(f"{path}: {e}") from None


def _agent_config(cfg) -> AgentConfig:
    return AgentConfig(gamma=cfg["gamma"], episodes=cfg["episodes"],
                       warmup_episodes=cfg["warmup_episodes"], width=cfg["agent_width"],
                       depth=cfg["agent_depth"], lr_actor=cfg["lr_actor"],
                       lr_critic=cfg["lr_critic"], batch_size=cfg["agent_batch"],
                       c_mean=cfg["c_mean"], seed=cfg["seed"])


def _backtest_config(cfg) -> BacktestConfig:
    strategies = tuple(s.strip() for s in cfg["strategies"].split(",") if s.strip())
    unknown = [s for s in strategies if s not in STRATEGIES]
    if unknown:
        raise ConfigError(f"unknown strategies {unknown}; choose from {', '.join(STRATEGIES)}")
    return BacktestConfig(gamma=cfg["gamma"], T=cfg["T"], hist_window=cfg["hist_window"],
                          gen_samples=cfg["gen_samples"], pool_size=cfg["pool_size"],
                          n_pre=cfg["n_pre"], n_cor=cfg["n_cor"], snr=cfg["snr"],
                          retrain=cfg["retrain"], threads=cfg["threads"], seed=cfg["seed"],
                          strategies=strategies, agent=_agent_config(cfg))


def _fmt(v) -> str:
    return f"{float(v):.17g}"


# commands ---------------------------------------------------------------

def cmd_gen_train(cfg) -> int:
    t0 = time.time()
    out = _out_dir(cfg)
    gcfg = GeneratorConfig(**{k: cfg[k] for k in GEN_KEYS}, seed=cfg["seed"])
    report = {"command": "gen-train", "config": cfg}
    if cfg["data_kind"] == "gaussian-1d":
        if cfg["var"] < 0:
            raise ConfigError("var must be nonnegative")
        rng = np.random.default_rng(cfg["seed"])
        data = cfg["mean"] + np.sqrt(cfg["var"]) * rng.standard_normal((cfg["n_train"], 1, 1))
        hashes = {"generated": hashlib.sha256(data.tobytes()).hexdigest()}
    elif cfg["data_kind"] == "french":
        path, panel = _load_panel(cfg)
        sp = _split(cfg, len(panel))
        data = generator_windows(panel.returns[sp.train.start:sp.train.stop], cfg["context"],
                                 cfg["T"])
        hashes = {str(path): file_hash(path)}
        report["split"] = {"train": [sp.train.start, sp.train.stop],
                           "val": [sp.val.start, sp.val.stop],
                           "test": [sp.test.start, sp.test.stop]}
    else:
        raise ConfigError(f"data_kind must be french or gaussian-1d, not {cfg['data_kind']!r}")
    model, losses = train_generator(data, gcfg)
    model.save(out / "generator.ckpt")
    with open(out / "gen_loss.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["epoch", "dsm_loss"])
        for i, v in enumerate(losses):
            wr.writerow([i + 1, _fmt(v)])
    if cfg["data_kind"] == "gaussian-1d":
        x = sample_path(model, None, 1, cfg["n_eval"], seed=cfg["seed"] + 1, n_pre=cfg["n_pre"],
                        n_cor=cfg["n_cor"], snr=cfg["snr"], threads=cfg["threads"])[:, 0, 0]
        from scipy.stats import norm
        q = norm.ppf((np.arange(len(x)) + 0.5) / len(x), cfg["mean"], np.sqrt(cfg["var"]))
        report["w2_to_target"] = float(np.sqrt(np.mean((np.sort(x) - q) ** 2)))
        report["sample_mean"] = float(x.mean())
        report["sample_var"] = float(x.var())
    report.update(data_hashes=hashes, run_id=run_id(cfg, hashes), epochs=len(losses),
                  final_loss=losses[-1] if losses else None)
    write_json(out / "gen_train.json", report)
    write_timing(out, "gen_train", time.time() - t0)
    print(f"generator saved to {out / 'generator.ckpt'}")
    return 0


def cmd_gen_sample(cfg) -> int:
    out = _out_dir(cfg)
    model = _load_model(cfg)
    context = None
    if cfg["context_data"]:
        p = _need_file(cfg, "context_data")
        try:
            panel = D.load_french_csv(p, _assets(cfg))
        except ValueError as e:
            raise ConfigError(str(e)) from None
        if panel.returns.shape[1] != model.d:
            raise ConfigError(f"context has {panel.returns.shape[1]} assets, model d={model.d}")
        context = panel.returns[-cfg["context"]:]
    paths = sample_path(model, context, cfg["T_out"], cfg["n_paths"], seed=cfg["seed"],
                        n_pre=cfg["n_pre"], n_cor=cfg["n_cor"], snr=cfg["snr"],
                        threads=cfg["threads"])
    write_paths_csv(out / "paths.csv", paths)
    print(f"{len(paths)} paths written to {out / 'paths.csv'}")
    return 0


def write_paths_csv(path, paths) -> None:
    paths = np.asarray(paths)
    n, T, d = paths.shape
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow([f"t{t + 1}_a{j + 1}" for t in range(T) for j in range(d)])
        for p in paths:
            wr.writerow([_fmt(v) for v in p.reshape(-1)])


def read_paths_csv(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"path file not found: {path}")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path}: empty file")
    try:
        idx = [tuple(int(x) for x in h.strip()[1:].split("_a")) for h in rows[0]]
    except ValueError:
        raise ConfigError(f"{path}: header must read t<i>_a<j>") from None
    T, d = max(i for i, _ in idx), max(j for _, j in idx)
    if len(idx) != T * d:
        raise ConfigError(f"{path}: header does not cover a full T x d grid")
    try:
        vals = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    except ValueError:
        raise ConfigError(f"{path}: malformed number") from None
    if vals.size == 0:
        raise ConfigError(f"{path}: no paths")
    out = np.empty((len(vals), T, d))
    for k, (i, j) in enumerate(idx):
        out[:, i - 1, j - 1] = vals[:, k]
    return out


def cmd_agent_train(cfg) -> int:
    t0 = time.time()
    out = _out_dir(cfg)
    model = _load_model(cfg)
    path, panel = _load_panel(cfg)
    sp = _split(cfg, len(panel))
    context = panel.returns[sp.context_range.start:sp.context_range.stop]
    bcfg = BacktestConfig(gamma=cfg["gamma"], T=cfg["T"], pool_size=cfg["pool_size"],
                          n_pre=cfg["n_pre"], n_cor=cfg["n_cor"], snr=cfg["snr"],
                          threads=cfg["threads"], seed=cfg["seed"], agent=_agent_config(cfg))
    agent, c_star, lg = train_gen_td3(model, context, bcfg, cfg["seed"])
    agent.save(out / "agent.ckpt")
    lg.write_csv(out / "agent_log.csv")
    hashes = {str(path): file_hash(path), cfg["checkpoint"]: file_hash(cfg["checkpoint"])}
    write_json(out / "agent_train.json", {"command": "agent-train", "config": cfg,
                                          "c_star": c_star, "data_hashes": hashes,
                                          "run_id": run_id(cfg, hashes)})
    write_timing(out, "agent_train", time.time() - t0)
    print(f"agent saved to {out / 'agent.ckpt'} (c* = {c_star:.6g})")
    return 0


def cmd_backtest(cfg) -> int:
    t0 = time.time()
    out = _out_dir(cfg)
    bcfg = _backtest_config(cfg)
    path, panel = _load_panel(cfg)
    sp = _split(cfg, len(panel))
    hashes = {str(path): file_hash(path)}
    model = None
    if {"GenMarkowitz", "GenTD3"} & set(bcfg.strategies):
        model = _load_model(cfg)
        hashes[cfg["checkpoint"]] = file_hash(cfg["checkpoint"])
        if model.d != panel.returns.shape[1]:
            raise ConfigError(f"checkpoint has d={model.d}, data has "
                              f"{panel.returns.shape[1]} assets")
    agent = c_star = None
    default_agent = Path(cfg["out_dir"]) / "agent.ckpt"
    if not cfg["agent_checkpoint"] and default_agent.exists():
        # pick up the agent-train output in the same directory
        cfg["agent_checkpoint"] = str(default_agent)
        info = default_agent.with_name("agent_train.json")
        if not cfg["c_star"] and info.exists():
            cfg["c_star"] = str(json.loads(info.read_text())["c_star"])
    if cfg["agent_checkpoint"] and "GenTD3" in bcfg.strategies:
        p = _need_file(cfg, "agent_checkpoint")
        try:
            agent = Agent.load(p)
        except (ValueError, KeyError) as e:
            raise ConfigError(f"{p}: {e}") from None
        if agent.k != model.hidden_dim or agent.d != model.d:
            raise ConfigError(f"{p}: agent does not match the generator checkpoint")
        hashes[str(p)] = file_hash(p)
        c_star = float(cfg["c_star"]) if cfg["c_star"] else None
    if "Benchmark" in bcfg.strategies and panel.benchmark is None:
        raise ConfigError("Benchmark strategy needs the benchmark column (config key benchmark)")
    res = backtest(panel, sp, model, bcfg, agent=agent, c_star=c_star)
    report = {"command": "backtest", "config": cfg, "data_hashes": hashes,
              "run_id": run_id(cfg, hashes), "metrics": res["metrics"],
              "c_star": res["c_star"], "months": res["months"], "wealth": res["wealth"]}
    write_json(out / "backtest_report.json", report)
    names = list(bcfg.strategies)
    with open(out / "backtest_wealth.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["month"] + names)
        for k, m in enumerate(res["months"]):
            wr.writerow([m] + [_fmt(res["wealth"][s][k]) for s in names])
    with open(out / "backtest_weights.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["month", "strategy"] + list(panel.names))
        for s in names:
            for k, a in enumerate(res["weights"][s]):
                wr.writerow([res["months"][k], s] + [_fmt(v) for v in a])
    write_timing(out, "backtest", time.time() - t0)
    for s in names:
        m = res["metrics"][s]
        print(f"{s:14s} return {m['ann_return']:.4f} vol {m['ann_vol']:.4f} "
              f"sharpe {_num(m['sharpe'])} mv {m['mv_value']:.4f}")
    return 0


def _num(v):
    return "n/a" if v is None else f"{v:.3f}"


def cmd_synthetic_exp(cfg) -> int:
    t0 = time.time()
    out = _out_dir(cfg)
    scfg = SyntheticConfig(d=cfg["d"], T=cfg["T"], gamma=cfg["gamma"], n_pool=cfg["n_pool"],
                           n_test=cfg["n_test"], n_periods=cfg["n_periods"], seed=cfg["seed"],
                           agent=AgentConfig(episodes=cfg["episodes"], seed=cfg["seed"]))
    if not 1 <= scfg.d <= 10:
        raise ConfigError("d must be between 1 and 10")
    res = synthetic_experiment(scfg)
    res.pop("seconds")
    res["config"] = cfg
    write_json(out / "synthetic_report.json", res)
    write_timing(out, "synthetic_report", time.time() - t0)
    for name, row in res["rows"].items():
        print(f"{name:17s} return {row['return_mean']:.4f} ({row['return_std']:.4f}) "
              f"vol {row['vol_mean']:.4f} sharpe {row['sharpe_mean']:.3f} mv {row['mv']:.4f}")
    return 0


def cmd_validate(cfg, suite: str) -> int:
    out = _out_dir(cfg)
    if suite != "all" and suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)} or all")
    checks = run_suite(suite, out_dir=out)
    for c in checks:
        print(f"{'PASS' if c.ok else 'FAIL'}  {c.name}  {c.detail}")
    write_json(out / f"validate_{suite}.json",
               {"suite": suite, "checks": [asdict(c) for c in checks]})
    return 0 if all(c.ok for c in checks) else 1


def cmd_aw2(cfg, first: str, second: str) -> int:
    x, y = read_paths_csv(first), read_paths_csv(second)
    if x.shape[1:] != y.shape[1:]:
        raise ConfigError(f"path shapes differ: {x.shape[1:]} vs {y.shape[1:]}")
    if not cfg["delta"] > 0:
        raise ConfigError("delta must be positive")
    mx, my = adapted_empirical(x, cfg["delta"]), adapted_empirical(y, cfg["delta"])
    res = {"aw2": aw2(mx, my), "w2": w2(mx.flatten(), my.flatten()), "delta": cfg["delta"],
           "n": [len(x), len(y)]}
    print(json.dumps(res, sort_keys=True))
    return 0


def cmd_dpp_solve(cfg, tree_path: str) -> int:
    p = Path(tree_path)
    if not p.exists():
        raise ConfigError(f"tree file not found: {p}")
    try:
        tree = ScenarioTree.from_dict(json.loads(p.read_text()))
        K = ConstraintSet(cfg["constraint"], cfg["lower"], cfg["upper"])
    except (ValueError, KeyError, TypeError) as e:
        raise ConfigError(f"{p}: {e}") from None
    if (cfg["c"] == "") == (cfg["gamma"] == ""):
        raise ConfigError("set exactly one of c (quadratic hedge) or gamma (mean-variance)")
    if cfg["gamma"] != "":
        res = dual_mv(tree, float(cfg["gamma"]), K, n_actions=cfg["n_actions"],
                      mode=cfg["mode"], w0=cfg["w0"])
        hedge = res.hedge
        out = {"mv_value": res.value, "a": res.a, "c": hedge.c}
    else:
        hedge = solve_hedge_dpp(tree, float(cfg["c"]), K, n_actions=cfg["n_actions"],
                                mode=cfg["mode"], w0=cfg["w0"])
        out = {"hedge_value": hedge.root_value(cfg["w0"]), "c": hedge.c}
    out["strategy"] = strategy_table(tree, hedge, cfg["w0"])
    text = json.dumps(out, indent=2, sort_keys=True, default=_jsonable)
    (_out_dir(cfg) / "dpp.json").write_text(text + "\n")
    print(text)
    return 0


def strategy_table(tree, hedge, w0: float) -> list:
    """Optimal holdings along every node reached from ``w0``; ``path`` lists child indices."""
    rows, stack = [], [(tree.first, (), w0)]
    while stack:
        node, path, w = stack.pop()
        if not node.children:
            continue
        th = hedge.action(node, w)
        rows.append({"path": list(path), "wealth": float(w), "holding": th.tolist()})
        for i, c in reversed(list(enumerate(node.children))):
            stack.append((c, path + (i,), w + float(th @ (c.value - node.value))))
    return rows


# entry point ------------------------------------------------------------

COMMANDS = ("gen-train", "gen-sample", "agent-train", "backtest", "synthetic-exp", "validate",
            "aw2", "dpp-solve")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="genmv", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int)
        sp.add_argument("--out-dir", dest="out_dir")
        if name == "validate":
            sp.add_argument("suite", help=f"one of {', '.join(SUITES)}, all")
        elif name == "aw2":
            sp.add_argument("first")
            sp.add_argument("second")
            sp.add_argument("--delta", type=float)
        elif name == "dpp-solve":
            sp.add_argument("tree")
            sp.add_argument("--c")
            sp.add_argument("--gamma")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    flags = {"seed": args.seed, "threads": args.threads, "out_dir": args.out_dir}
    for extra in ("delta", "c", "gamma"):
        if getattr(args, extra, None) is not None:
            flags[extra] = getattr(args, extra)
    try:
        cfg = load_config(args.command, args.config, flags)
        if args.command == "validate":
            return cmd_validate(cfg, args.suite)
        if args.command == "aw2":
            return cmd_aw2(cfg, args.first, args.second)
        if args.command == "dpp-solve":
            return cmd_dpp_solve(cfg, args.tree)
        handler = {"gen-train": cmd_gen_train, "gen-sample": cmd_gen_sample,
                   "agent-train": cmd_agent_train, "backtest": cmd_backtest,
                   "synthetic-exp": cmd_synthetic_exp}[args.command]
        return handler(cfg)
    except (ConfigError, OSError) as e:
        print(f"genmv: error: {e}", file=sys.stderr)
        return 2
    except (FloatingPointError, ArithmeticError, RuntimeError, ValueError,
            np.linalg.LinAlgError) as e:
        print(f"genmv: numerical failure: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
