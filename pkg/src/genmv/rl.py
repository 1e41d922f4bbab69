"""TD3 agent for the quadratic-hedging dual of mean-variance selection.

The critic approximates the hedging cost ``E|W_T - c|^2`` given
``(t, w, h, a, c)``, so the actor *descends* on it. Scenario paths (prices and
features) live in a pool; the replay buffer only keeps ``(w, a, c)``, and each
update pairs buffer rows with freshly drawn pool paths at the rollout's
current step, recomputing the next wealth on that path.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from .market import project_simplex
from .nn import DenseNet, Optimizer, load_checkpoint, polyak_update, save_checkpoint

log = logging.getLogger(__name__)

__all__ = ["project_simplex", "ScenarioPool", "ReplayBuffer", "AgentConfig", "Agent",
           "rollout_and_store", "td3_update", "train_agent", "select_multiplier"]


def project_rows(v) -> np.ndarray:
    """Row-wise Euclidean projection onto the simplex (sort-based, vectorized)."""
    v = np.atleast_2d(np.asarray(v, dtype=float))
    u = -np.sort(-v, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    k = np.arange(1, v.shape[1] + 1)
    rho = np.sum(u - css / k > 0, axis=1)
    theta = css[np.arange(len(v)), rho - 1] / rho
    return np.maximum(v - theta[:, None], 0.0)


# scenario pool and buffer -------------------------------------------------

class ScenarioPool:
    """Price paths ``(L, T, d)`` with feature paths ``(L, T, k)`` and optional path weights."""

    def __init__(self, prices, features, probs=None, capacity: int | None = None):
        prices = np.asarray(prices, dtype=float)
        features = np.asarray(features, dtype=float)
        if prices.ndim != 3 or features.ndim != 3 or prices.shape[:2] != features.shape[:2]:
            raise ValueError("prices (L, T, d) and features (L, T, k) must align")
        if capacity is not None and len(prices) > capacity:
            raise ValueError(f"pool holds {len(prices)} paths, capacity {capacity}")
        if np.any(prices <= 0):
            raise ValueError("prices must be positive")
        self.prices, self.features = prices, features
        self.feature_shift, self.feature_scale = None, None
        if probs is None:
            probs = np.full(len(prices), 1.0 / len(prices))
        self.probs = np.asarray(probs, dtype=float) / np.sum(probs)

    def __len__(self):
        return len(self.prices)

    @property
    def T(self) -> int:
        return self.prices.shape[1]

    @property
    def d(self) -> int:
        return self.prices.shape[2]

    @property
    def k(self) -> int:
        return self.features.shape[2]

    def draw(self, rng, n: int) -> np.ndarray:
        return rng.choice(len(self), size=n, p=self.probs)

    @classmethod
    def from_prices(cls, prices, probs=None, shift=None, scale=None) -> "ScenarioPool":
        """Price-feature mode: ``h^t = (s^t - shift) / scale`` per asset.

        Defaults standardize with the pool's (weighted) price mean and std, so
        that nearby tree nodes stay distinguishable to the networks.
        """
        prices = np.asarray(prices, dtype=float)
        L = len(prices)
        p = np.full(L, 1.0 / L) if probs is None else np.asarray(probs, float) / np.sum(probs)
        flat_w = np.repeat(p, prices.shape[1]) / prices.shape[1]
        flat = prices.reshape(-1, prices.shape[2])
        if shift is None:
            shift = flat_w @ flat
        if scale is None:
            scale = np.sqrt(flat_w @ (flat - shift) ** 2)
            scale = np.where(scale > 1e-12, scale, 1.0)
        pool = cls(prices, (prices - shift) / scale, p)
        pool.feature_shift, pool.feature_scale = np.asarray(shift, float), np.asarray(scale, float)
        return pool

    def price_features(self, prices) -> np.ndarray:
        """Features of new prices under this pool's price-feature normalization."""
        return (np.asarray(prices, dtype=float) - self.feature_shift) / self.feature_scale

    @classmethod
    def from_tree(cls, tree) -> "ScenarioPool":
        vals, probs = tree.measure.paths()
        return cls.from_prices(vals, probs)

    @classmethod
    def from_generator(cls, model, context, T: int, L: int, seed: int = 0, threads: int = 1,
                       **sampler) -> "ScenarioPool":
        """Samples ``L`` return paths of length ``T``; prices ``(L, T + 1, d)`` start at 1.

        The feature at time ``t`` is the encoder state after the context and
        ``r^{1:t}``, so time 0 carries the context state. Features are re-encoded
        here and must match the sampler's.
        """
        rets, feats = sample_returns(model, context, T, L, seed, threads, **sampler)
        check = np.stack([model.feature_path(r, context) for r in rets])
        if not np.allclose(check, feats, rtol=0, atol=1e-8):
            raise RuntimeError("pool features do not match the encoder")
        h0 = np.broadcast_to(model.context_state(context), (L, 1, feats.shape[-1]))
        ones = np.ones((L, 1, rets.shape[-1]))
        return cls(np.concatenate([ones, np.cumprod(1.0 + rets, axis=1)], axis=1),
                   np.concatenate([h0, feats], axis=1))


def sample_returns(model, context, T, L, seed, threads=1, **sampler):
    from .diffusion import sample_path

    return sample_path(model, context, T, L, seed=seed, threads=threads, return_features=True,
                       **sampler)


class ReplayBuffer:
    """FIFO store of ``(w, a, c)`` rows."""

    def __init__(self, capacity: int, d: int):
        self.capacity = int(capacity)
        self.w = np.zeros(self.capacity)
        self.a = np.zeros((self.capacity, d))
        self.c = np.zeros(self.capacity)
        self.size = 0
        self.ptr = 0

    def __len__(self):
        return self.size

    def add(self, w, a, c):
        self.w[self.ptr], self.a[self.ptr], self.c[self.ptr] = w, a, c
        self.ptr = (self.ptr + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, rng, n: int):
        idx = rng.integers(0, self.size, size=n)
        return self.w[idx], self.a[idx], self.c[idx]


# agent ------------------------------------------------------------------

@dataclass
class AgentConfig:
    gamma: float = 1.5
    width: int = 64
    depth: int = 2
    activation: str = "relu"
    lr_actor: float = 1e-3
    lr_critic: float = 1e-3
    batch_size: int = 128
    buffer_size: int = 100_000
    warmup_episodes: int = 100
    episodes: int = 2000
    delay: int = 2
    rho: float = 0.995
    explore_noise: float = 0.1
    target_noise: float = 0.2
    target_clip: float = 0.5
    twin: str = "min"
    wealth_mode: str = "proportions"
    w0: float = 1.0
    c_shift: float | None = None
    c_mean: float = 0.1
    c_max: float | None = None
    pull: float = 1.0
    lr_decay: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.delay < 1:
            raise ValueError("policy delay must be >= 1")
        if self.twin not in ("min", "max"):
            raise ValueError("twin must be 'min' or 'max'")
        if self.wealth_mode not in ("proportions", "shares"):
            raise ValueError(f"unknown wealth mode {self.wealth_mode!r}")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")

    @property
    def shift(self) -> float:
        """Lower end of the multiplier range: ``w0 + 1/gamma`` unless overridden."""
        return self.w0 + 1.0 / self.gamma if self.c_shift is None else self.c_shift


class Agent:
    """Policy emitting a pre-projection action ``a = P_K(pi(state))``, twin critics, targets."""

    def __init__(self, d: int, k: int, T: int, config: AgentConfig | None = None):
        self.cfg = cfg = config or AgentConfig()
        self.d, self.k, self.T = int(d), int(k), int(T)
        rng = np.random.default_rng(cfg.seed)
        hid = [cfg.width] * cfg.depth
        acts = [cfg.activation] * cfg.depth + ["identity"]
        self.policy = DenseNet([2 + k + 1] + hid + [d], acts, rng=rng, prefix="pi.")
        self.q1 = DenseNet([2 + k + d + 1] + hid + [1], acts, rng=rng, prefix="q1.")
        self.q2 = DenseNet([2 + k + d + 1] + hid + [1], acts, rng=rng, prefix="q2.")
        self.policy.params["pi.b%d" % cfg.depth][:] = 1.0 / d
        self.policy_targ = self.policy.copy()
        self.q1_targ = self.q1.copy()
        self.q2_targ = self.q2.copy()
        self.opt_pi = Optimizer("adam", cfg.lr_actor)
        self.opt_q1 = Optimizer("adam", cfg.lr_critic)
        self.opt_q2 = Optimizer("adam", cfg.lr_critic)
        self.updates = 0

    # inputs -------------------------------------------------------------
    def _tnorm(self, t, n):
        return np.broadcast_to(np.asarray(t, dtype=float) / max(self.T - 1, 1), (n,))[:, None]

    def _state(self, t, w, h, c):
        w = np.atleast_1d(np.asarray(w, dtype=float))
        n = len(w)
        h = np.broadcast_to(np.atleast_2d(np.asarray(h, dtype=float)), (n, self.k))
        c = np.broadcast_to(np.asarray(c, dtype=float), (n,))
        return np.concatenate([self._tnorm(t, n), w[:, None], h, c[:, None]], axis=1)

    def _sa(self, state, a):
        return np.concatenate([state[:, :-1], a, state[:, -1:]], axis=1)

    # evaluation ---------------------------------------------------------
    def raw(self, t, w, h, c, net: DenseNet | None = None) -> np.ndarray:
        return (net or self.policy).forward(self._state(t, w, h, c))

    def act(self, t, w, h, c, net: DenseNet | None = None) -> np.ndarray:
        """Deterministic action ``P_K(pi(t, w, h, c))``, shape ``(n, d)``."""
        return project_rows(self.raw(t, w, h, c, net))

    def q(self, t, w, h, a, c, which: int = 1) -> np.ndarray:
        net = self.q1 if which == 1 else self.q2
        return net.forward(self._sa(self._state(t, w, h, c), np.atleast_2d(a)))[:, 0]

    def value(self, t, w, h, c) -> np.ndarray:
        """``Q1(t, w, h, pi(t, w, h, c), c)``."""
        return self.q(t, w, h, self.act(t, w, h, c), c)

    def explore(self, t, w, h, c, rng) -> np.ndarray:
        r = self.raw(t, w, h, c)
        return project_rows(r + self.cfg.explore_noise * rng.standard_normal(r.shape))

    # persistence --------------------------------------------------------
    def nets(self) -> dict:
        return {"pi": self.policy, "q1": self.q1, "q2": self.q2, "pi_targ": self.policy_targ,
                "q1_targ": self.q1_targ, "q2_targ": self.q2_targ}

    def save(self, path) -> None:
        arrays = {}
        for name, net in self.nets().items():
            arrays.update({f"{name}/{k}": v for k, v in net.params.items()})
        meta = {"kind": "td3-agent", "d": self.d, "k": self.k, "T": self.T,
                "config": asdict(self.cfg), "updates": self.updates}
        save_checkpoint(path, arrays, meta)

    @classmethod
    def load(cls, path) -> "Agent":
        arrays, meta = load_checkpoint(path)
        if meta.get("kind") != "td3-agent":
            raise ValueError(f"{path}: not an agent checkpoint")
        agent = cls(meta["d"], meta["k"], meta["T"], AgentConfig(**meta["config"]))
        for name, net in agent.nets().items():
            for k in net.params:
                net.params[k][...] = arrays[f"{name}/{k}"]
        agent.updates = int(meta.get("updates", 0))
        return agent


def next_wealth(w, a, s_now, s_next, mode: str):
    if mode == "shares":
        return w + np.sum(a * (s_next - s_now), axis=-1)
    return w * (1.0 + np.sum(a * (s_next / s_now - 1.0), axis=-1))


def draw_multiplier(cfg: AgentConfig, rng, n=None):
    c = cfg.shift + rng.exponential(cfg.c_mean, size=n)
    return np.minimum(c, cfg.c_max) if cfg.c_max is not None else c


# rollouts and updates -----------------------------------------------------

def rollout_and_store(agent: Agent, pool: ScenarioPool, buffer: ReplayBuffer, warmup: bool,
                      rng, update=None) -> int:
    """One episode ``t = 1..T-1`` (0-based ``0..T-2``); returns the number of stored rows.

    ``update(t)`` is called after each stored transition when not warming up.
    """
    if len(pool) == 0:
        raise ValueError("scenario pool is empty")
    cfg = agent.cfg
    j = int(pool.draw(rng, 1)[0])
    S, H = pool.prices[j], pool.features[j]
    c = float(draw_multiplier(cfg, rng))
    w = cfg.w0
    stored = 0
    for t in range(pool.T - 1):
        if warmup:
            a = rng.dirichlet(np.ones(pool.d))
        else:
            a = agent.explore(t, w, H[t], c, rng)[0]
        buffer.add(w, a, c)
        stored += 1
        w = float(next_wealth(w, a, S[t], S[t + 1], cfg.wealth_mode))
        if not math.isfinite(w):
            raise FloatingPointError("non-finite wealth in rollout")
        if not warmup and update is not None:
            update(t)
    return stored


@dataclass
class UpdateStats:
    critic_loss: float
    actor_objective: float | None


def critic_targets(agent: Agent, t, w_next, h_next, c, terminal: bool, rng):
    if terminal:
        return (w_next - c) ** 2
    cfg = agent.cfg
    r2 = agent.raw(t + 1, w_next, h_next, c, net=agent.policy_targ)
    eps = np.clip(cfg.target_noise * rng.standard_normal(r2.shape), -cfg.target_clip, cfg.target_clip)
    a2 = project_rows(r2 + eps)
    sa = agent._sa(agent._state(t + 1, w_next, h_next, c), a2)
    y1 = agent.q1_targ.forward(sa)[:, 0]
    y2 = agent.q2_targ.forward(sa)[:, 0]
    return np.minimum(y1, y2) if cfg.twin == "min" else np.maximum(y1, y2)


def critic_loss_grad(net: DenseNet, sa, y):
    q, cache = net.forward_cache(sa)
    r = q[:, 0] - y
    loss = float(np.mean(r * r))
    grads, _ = net.backward(cache, (2.0 / len(y)) * r[:, None])
    return loss, grads


def actor_grad(agent: Agent, state):
    """Descent direction for the policy: ``mean Q1(s, P_K(pi(s)))`` plus a pull term.

    The projection's Jacobian vanishes on inactive coordinates, which would pin
    the policy to a face of the simplex; the gradient is instead passed straight
    through in the simplex tangent space, and ``pull * |pi - P_K(pi)|^2`` keeps
    the raw output near the simplex. Returns ``(mean Q1, grads)``.
    """
    raw, pcache = agent.policy.forward_cache(state)
    a = project_rows(raw)
    q, qcache = agent.q1.forward_cache(agent._sa(state, a))
    n = len(state)
    _, dsa = agent.q1.backward(qcache, np.full((n, 1), 1.0 / n))
    ga = dsa[:, state.shape[1] - 1:state.shape[1] - 1 + agent.d]
    draw = ga - ga.mean(axis=1, keepdims=True) + (2.0 * agent.cfg.pull / n) * (raw - a)
    grads, _ = agent.policy.backward(pcache, draw)
    return float(q.mean()), grads


def td3_update(agent: Agent, t: int, prices, features, w, a, c, rng,
               lr_scale: float = 1.0) -> UpdateStats:
    """One critic step at step ``t`` (0-based); actor and targets every ``delay`` steps."""
    cfg = agent.cfg
    if len(w) == 0:
        raise ValueError("empty batch")
    T = prices.shape[1]
    terminal = t >= T - 2
    w_next = next_wealth(w, a, prices[:, t], prices[:, t + 1], cfg.wealth_mode)
    y = critic_targets(agent, t, w_next, features[:, t + 1], c, terminal, rng)
    state = agent._state(t, w, features[:, t], c)
    sa = agent._sa(state, a)
    l1, g1 = critic_loss_grad(agent.q1, sa, y)
    l2, g2 = critic_loss_grad(agent.q2, sa, y)
    if not (math.isfinite(l1) and math.isfinite(l2)):
        raise FloatingPointError("non-finite critic loss")
    agent.opt_q1.step(agent.q1.params, g1, lr=cfg.lr_critic * lr_scale)
    agent.opt_q2.step(agent.q2.params, g2, lr=cfg.lr_critic * lr_scale)
    agent.updates += 1
    obj = None
    if agent.updates % cfg.delay == 0:
        # the actor needs no next state, so its batch spans every decision time;
        # tying it to the rollout step would starve steps that never align with the delay
        ts = rng.integers(0, T - 1, size=len(w))
        obj, gp = actor_grad(agent, agent._state(ts, w, features[np.arange(len(w)), ts], c))
        agent.opt_pi.step(agent.policy.params, gp, lr=cfg.lr_actor * lr_scale)
        polyak_update(agent.policy_targ.params, agent.policy.params, cfg.rho)
        polyak_update(agent.q1_targ.params, agent.q1.params, cfg.rho)
        polyak_update(agent.q2_targ.params, agent.q2.params, cfg.rho)
    return UpdateStats(0.5 * (l1 + l2), obj)


@dataclass
class TrainLog:
    rows: list

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["step", "critic_loss", "actor_objective", "eval_mv"])
            for r in self.rows:
                wr.writerow(["" if v is None else (f"{v:.10g}" if isinstance(v, float) else v)
                             for v in r])


def train_agent(pool: ScenarioPool, config: AgentConfig | None = None, agent: Agent | None = None,
                evaluate=None, eval_every: int = 0):
    """Warm-up then TD3 training on the pool; returns ``(agent, buffer, log)``.

    ``evaluate(agent) -> float`` is logged every ``eval_every`` episodes.
    """
    cfg = config or AgentConfig()
    agent = agent or Agent(pool.d, pool.k, pool.T, cfg)
    rng = np.random.default_rng(cfg.seed + 7)
    buffer = ReplayBuffer(cfg.buffer_size, pool.d)
    for _ in range(cfg.warmup_episodes):
        rollout_and_store(agent, pool, buffer, True, rng)
    rows = []
    acc = {"loss": 0.0, "obj": 0.0, "n": 0, "m": 0}

    def update(t):
        idx = pool.draw(rng, cfg.batch_size)
        w, a, c = buffer.sample(rng, cfg.batch_size)
        st = td3_update(agent, t, pool.prices[idx], pool.features[idx], w, a, c, rng,
                        acc["scale"])
        acc["loss"] += st.critic_loss
        acc["n"] += 1
        if st.actor_objective is not None:
            acc["obj"] += st.actor_objective
            acc["m"] += 1

    for ep in range(cfg.episodes):
        # cosine decay to 5% of the base rates
        acc["scale"] = 0.05 + 0.95 * 0.5 * (1.0 + math.cos(math.pi * ep / cfg.episodes)) \
            if cfg.lr_decay else 1.0
        rollout_and_store(agent, pool, buffer, False, rng, update)
        last = ep == cfg.episodes - 1
        if (eval_every and (ep + 1) % eval_every == 0) or last:
            ev = float(evaluate(agent)) if evaluate is not None and \
                (eval_every and (ep + 1) % eval_every == 0) else None
            rows.append([ep + 1, acc["loss"] / max(acc["n"], 1),
                         acc["obj"] / acc["m"] if acc["m"] else None, ev])
            acc = {"loss": 0.0, "obj": 0.0, "n": 0, "m": 0}
    return agent, buffer, TrainLog(rows)


def select_multiplier(agent: Agent, h1, gamma: float, c_grid, w0: float | None = None,
                      q_fn=None) -> float:
    """``argmax_c -(gamma/2) Q(1, w0, h1, pi(...), c) + c`` over ``c_grid``; ties to smallest c.

    ``q_fn(c_array) -> Q values`` overrides the critic (used by stubs).
    """
    grid = np.asarray(c_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty multiplier grid")
    order = np.argsort(grid, kind="stable")
    grid = grid[order]
    if q_fn is None:
        w = agent.cfg.w0 if w0 is None else w0
        n = len(grid)
        q = agent.q(0, np.full(n, w), np.broadcast_to(h1, (n, agent.k)),
                    agent.act(0, np.full(n, w), np.broadcast_to(h1, (n, agent.k)), grid), grid)
    else:
        q = np.asarray(q_fn(grid), dtype=float)
    obj = -0.5 * gamma * q + grid
    return float(grid[int(np.argmax(obj))])


def default_c_grid(cfg: AgentConfig, n: int = 101) -> np.ndarray:
    """Grid over the bulk of the training multiplier law (shift + 5 means)."""
    return cfg.shift + np.linspace(0.0, 5.0 * cfg.c_mean, n)
