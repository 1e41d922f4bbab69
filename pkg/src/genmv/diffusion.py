"""Conditional score-based generator for return paths.

The forward noising is a variance-preserving SDE
``dX = -beta(tau)/2 X dtau + sqrt(beta(tau)) dB`` whose marginal given ``x0`` is
``h1(tau) x0 + sqrt(h2(tau)) z``. A GRU encoder summarises the realised prefix;
the score head sees ``(time features, h^{t-1}, x)``.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .nn import (
    DenseNet,
    EmaTracker,
    GRUEncoder,
    Optimizer,
    clip_grad_norm,
    load_checkpoint,
    save_checkpoint,
    time_features,
)

log = logging.getLogger(__name__)

SCHEDULE_KINDS = ("constant", "linear-vp")
PARAMETERIZATIONS = ("residual", "noise", "dissipative")


@dataclass(frozen=True)
class NoiseSchedule:
    """Noise schedule on diffusive time ``[0, horizon]``.

    ``constant``: beta(tau) = beta_min for all tau (beta_min = 2 is the plain OU
    process). ``linear-vp``: beta(tau) = beta_min + (beta_max - beta_min) tau / horizon.
    """

    kind: str = "linear-vp"
    beta_min: float = 0.01
    beta_max: float = 10.0
    horizon: float = 1.0
    n_steps: int = 1000
    tau0: float = 1e-3

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not 0.0 < self.tau0 < self.horizon:
            raise ValueError("need 0 < tau0 < horizon")
        if self.beta_min <= 0 or (self.kind == "linear-vp" and self.beta_max < self.beta_min):
            raise ValueError("invalid beta range")

    @classmethod
    def ou(cls, horizon: float = 10.0, n_steps: int = 1000, tau0: float = 1e-3) -> "NoiseSchedule":
        """Constant beta = 2, i.e. h1 = exp(-tau), h2 = 1 - exp(-2 tau)."""
        return cls("constant", 2.0, 2.0, horizon, n_steps, tau0)

    def beta(self, tau):
        tau = np.asarray(tau, dtype=float)
        if self.kind == "constant":
            return np.full_like(tau, self.beta_min)
        return self.beta_min + (self.beta_max - self.beta_min) * tau / self.horizon

    def integral(self, tau):
        """int_0^tau beta(u) du."""
        tau = np.asarray(tau, dtype=float)
        if self.kind == "constant":
            return self.beta_min * tau
        return self.beta_min * tau + 0.5 * (self.beta_max - self.beta_min) * tau * tau / self.horizon

    def h1(self, tau):
        return np.exp(-0.5 * self.integral(tau))

    def h2(self, tau):
        return -np.expm1(-self.integral(tau))

    def grid(self, n_steps: int | None = None) -> np.ndarray:
        """Reverse-time grid from ``horizon`` down to ``tau0``."""
        n = self.n_steps if n_steps is None else n_steps
        return np.linspace(self.horizon, self.tau0, n + 1)


def perturb(x0, tau, z, sched: NoiseSchedule):
    tau_arr = np.asarray(tau, dtype=float)
    if np.any(tau_arr < 0.0) or np.any(tau_arr > sched.horizon * (1 + 1e-12)):
        raise ValueError(f"tau must lie in [0, {sched.horizon}]")
    h1 = sched.h1(tau_arr)
    h2 = sched.h2(tau_arr)
    x0 = np.asarray(x0, dtype=float)
    z = np.asarray(z, dtype=float)
    if h1.ndim and x0.ndim > h1.ndim:
        h1 = h1[..., None]
        h2 = h2[..., None]
    return h1 * x0 + np.sqrt(h2) * z


def analytic_gaussian_score(tau, x, mean, var, sched: NoiseSchedule):
    """Exact score of the noised law when the data are ``N(mean, var I)``."""
    if np.any(np.asarray(var) < 0):
        raise ValueError("variance must be nonnegative")
    h1 = sched.h1(tau)
    h2 = sched.h2(tau)
    denom = np.asarray(var) * h1 * h1 + h2
    if np.any(denom <= 0):
        raise ValueError("degenerate score: tau = 0 with zero variance")
    x = np.asarray(x, dtype=float)
    h1 = np.asarray(h1)
    denom = np.asarray(denom)
    if h1.ndim and x.ndim > h1.ndim:
        h1, denom = h1[..., None], denom[..., None]
    return -(x - np.asarray(mean) * h1) / denom


class AnalyticGaussianScore:
    """Score-model stand-in with the closed-form Gaussian score (test oracle)."""

    def __init__(self, schedule: NoiseSchedule, mean=0.0, var=1.0, d: int = 1):
        self.schedule = schedule
        self.mean = mean
        self.var = var
        self.d = d
        self.hidden_dim = 1

    def score(self, tau, h, x):
        return analytic_gaussian_score(tau, x, self.mean, self.var, self.schedule)


@dataclass
class GeneratorConfig:
    hidden_dim: int = 16
    width: int = 64
    depth: int = 2
    time_width: int = 16
    parameterization: str = "residual"
    bound: float = 50.0
    schedule: NoiseSchedule = field(default_factory=NoiseSchedule)
    epochs: int = 100
    batch_size: int = 256
    lr: float = 1e-3
    betas: tuple = (0.9, 0.999)
    weight_decay: float = 1e-2
    ema_decay: float = 0.999
    grad_clip: float = 1.0
    warmup_epochs: int = 5
    cosine: bool = True
    standardize: bool = True
    seed: int = 0


class ScoreModel:
    """GRU encoder plus score head, evaluated in standardized coordinates.

    parameterization ``residual`` (default): s = -x - F, exact for standard
    normal data at F = 0 and free of the 1/sqrt(h2) blow-up near tau0.
    parameterization ``noise``: s = -F / sqrt(h2(tau)).
    parameterization ``dissipative``: s = -x / h2(tau) + bound * tanh(F), so the
    non-linear part is bounded by ``bound`` in sup norm.
    """

    def __init__(self, d: int, schedule: NoiseSchedule | None = None, hidden_dim: int = 16,
                 width: int = 64, depth: int = 2, time_width: int = 16,
                 parameterization: str = "residual", bound: float = 50.0, seed: int = 0):
        if parameterization not in PARAMETERIZATIONS:
            raise ValueError(f"unknown parameterization {parameterization!r}")
        if bound <= 0:
            raise ValueError("bound must be positive")
        self.d = int(d)
        self.schedule = schedule or NoiseSchedule()
        self.hidden_dim = int(hidden_dim)
        self.time_width = int(time_width)
        self.parameterization = parameterization
        self.bound = float(bound)
        self.width = int(width)
        self.depth = int(depth)
        rng = np.random.default_rng(seed)
        self.encoder = GRUEncoder(self.d, self.hidden_dim, rng=rng, prefix="enc.")
        sizes = [self.time_width + self.hidden_dim + self.d] + [self.width] * self.depth + [self.d]
        self.head = DenseNet(sizes, rng=rng, prefix="head.")
        self.mean = np.zeros(self.d)
        self.std = np.ones(self.d)

    @property
    def params(self) -> dict:
        return {**self.encoder.params, **self.head.params}

    def set_params(self, values: dict) -> None:
        for k, p in self.params.items():
            p[...] = values[k]

    # standardization ----------------------------------------------------
    def normalize(self, r):
        return (np.asarray(r, dtype=float) - self.mean) / self.std

    def denormalize(self, x):
        return np.asarray(x, dtype=float) * self.std + self.mean

    # evaluation ---------------------------------------------------------
    def _features(self, tau, h, x):
        tau = np.broadcast_to(np.asarray(tau, dtype=float), (x.shape[0],))
        emb = time_features(tau, self.time_width, self.schedule.horizon)
        return np.concatenate([emb, h, x], axis=1)

    def _finish(self, tau, x, out):
        h2 = np.broadcast_to(self.schedule.h2(np.asarray(tau, dtype=float)), (x.shape[0],))[:, None]
        if self.parameterization == "residual":
            return -x - out
        if self.parameterization == "noise":
            return -out / np.sqrt(h2)
        return -x / h2 + self.bound * np.tanh(out)

    def score(self, tau, h, x):
        """Score in standardized coordinates; ``x: (n, d)``, ``h: (n, d')``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        h = np.broadcast_to(np.atleast_2d(np.asarray(h, dtype=float)), (x.shape[0], self.hidden_dim))
        out = self.head.forward(self._features(tau, h, x))
        return self._finish(tau, x, out)

    def encode(self, norm_path, h0=None):
        return self.encoder.encode(norm_path, h0)

    def context_state(self, context):
        """Encoder state after reading a raw-return context window (zeros if none)."""
        if context is None or len(context) == 0:
            return np.zeros(self.hidden_dim)
        return self.encoder.encode(self.normalize(np.asarray(context, dtype=float)))[-1]

    def feature_path(self, raw_path, context=None):
        """``(h^1, ..., h^T)`` for a raw path, starting from the context state."""
        h0 = self.context_state(context)
        return self.encoder.encode(self.normalize(raw_path), h0)

    def copy(self) -> "ScoreModel":
        import copy
        return copy.deepcopy(self)

    def descriptor(self) -> dict:
        return {
            "d": self.d,
            "hidden_dim": self.hidden_dim,
            "width": self.width,
            "depth": self.depth,
            "time_width": self.time_width,
            "parameterization": self.parameterization,
            "bound": self.bound,
            "schedule": asdict(self.schedule),
        }

    def save(self, path) -> None:
        arrays = dict(self.params)
        arrays["std.mean"] = self.mean
        arrays["std.std"] = self.std
        save_checkpoint(path, arrays, {"kind": "score-model", **self.descriptor()})

    @classmethod
    def load(cls, path) -> "ScoreModel":
        arrays, meta = load_checkpoint(path)
        if meta.get("kind") != "score-model":
            raise ValueError(f"{path}: not a score-model checkpoint")
        sched = NoiseSchedule(**meta["schedule"])
        model = cls(meta["d"], sched, meta["hidden_dim"], meta["width"], meta["depth"],
                    meta["time_width"], meta["parameterization"], meta["bound"])
        model.set_params(arrays)
        model.mean = arrays["std.mean"]
        model.std = arrays["std.std"]
        return model


def dissipativity_constants(model: ScoreModel):
    """``(R0, delta, C)`` with ``2 x.s <= -(1 + delta)|x|^2 + C`` for ``|x| > R0``.

    Uses ``|G|_2 <= bound sqrt(d)`` and ``h2 < 1``: with delta = 1/2 the bound
    holds for C = 2 (bound sqrt(d))^2 and every x.
    """
    if model.parameterization != "dissipative":
        raise ValueError("model is not dissipative")
    b = model.bound * math.sqrt(model.d)
    return 2.0 * model.bound + 1.0, 0.5, 2.0 * b * b


@dataclass
class TrainBatch:
    """Standardized paths ``(M, T, d)``, diffusive times ``(M, T)``, noise ``(M, T, d)``."""

    paths: np.ndarray
    tau: np.ndarray
    z: np.ndarray

    @classmethod
    def draw(cls, paths, sched: NoiseSchedule, rng) -> "TrainBatch":
        paths = np.asarray(paths, dtype=float)
        M, T, d = paths.shape
        tau = rng.uniform(sched.tau0, sched.horizon, size=(M, T))
        z = rng.standard_normal((M, T, d))
        return cls(paths, tau, z)


def dsm_loss(model: ScoreModel, batch: TrainBatch):
    """Denoising score-matching loss and its gradient w.r.t. head and encoder.

    loss = 1/(T M) sum_{t, m} | sqrt(h2) s(tau, h^{t-1}, x_tau) + z |^2,
    with ``x_tau = h1 s^t + sqrt(h2) z`` and ``h^{t-1}`` the encoding of the
    prefix ``s^{1:t-1}`` (``h^0 = 0``).
    """
    paths, tau, z = batch.paths, batch.tau, batch.z
    M, T, d = paths.shape
    if M == 0 or T == 0:
        raise ValueError("empty batch")
    if np.any(tau < model.schedule.tau0 - 1e-15):
        raise ValueError("diffusive times must be >= tau0")
    sched = model.schedule
    h_prev = np.zeros((M, T, model.hidden_dim))
    enc_cache = None
    if T > 1:
        H, enc_cache = model.encoder.encode_cache(paths[:, :-1])
        h_prev[:, 1:] = H
    h1 = sched.h1(tau)[..., None]
    h2 = sched.h2(tau)[..., None]
    sq = np.sqrt(h2)
    x_tau = h1 * paths + sq * z
    n = M * T
    flat_tau = tau.reshape(n)
    feats = model._features(flat_tau, h_prev.reshape(n, -1), x_tau.reshape(n, d))
    out, cache = model.head.forward_cache(feats)
    out = out.reshape(M, T, d)
    if model.parameterization == "residual":
        resid = z - sq * (x_tau + out)
        dres_dout = -np.broadcast_to(sq, out.shape)
    elif model.parameterization == "noise":
        resid = z - out
        dres_dout = -np.ones_like(out)
    else:
        th = np.tanh(out)
        resid = sq * (-x_tau / h2 + model.bound * th) + z
        dres_dout = sq * model.bound * (1.0 - th * th)
    loss = float(np.sum(resid * resid) / n)
    if not np.isfinite(loss):
        raise FloatingPointError(f"non-finite DSM loss ({loss}); training diverged")
    d_out = (2.0 / n) * resid * dres_dout
    grads, d_feat = model.head.backward(cache, d_out.reshape(n, d))
    tw, hd = model.time_width, model.hidden_dim
    d_h = d_feat[:, tw:tw + hd].reshape(M, T, hd)
    if enc_cache is not None:
        enc_grads, _, _ = model.encoder.backward(enc_cache, d_h[:, 1:])
    else:
        enc_grads = {k: np.zeros_like(v) for k, v in model.encoder.params.items()}
    grads.update(enc_grads)
    return loss, grads


def esm_loss(model: ScoreModel, mean: float, var: float, n_tau: int = 64, n_x: int = 48):
    """Explicit score-matching objective for one-step 1-D Gaussian data ``N(mean, var)``.

    E_tau E_{x ~ p_tau} h2 |s(tau, 0, x) - grad log p_tau(x)|^2 with tau uniform on
    ``[tau0, horizon]``, evaluated by Gauss-Legendre (tau) times Gauss-Hermite (x)
    quadrature. The marginal ``p_tau`` is ``N(mean h1, var h1^2 + h2)``. Returns
    ``(loss, head gradients)``; differs from ``dsm_loss`` by a parameter-free constant.
    """
    if model.d != 1:
        raise ValueError("esm_loss is defined for d = 1")
    sched = model.schedule
    u, wu = np.polynomial.legendre.leggauss(n_tau)
    half = 0.5 * (sched.horizon - sched.tau0)
    tau = sched.tau0 + half * (u + 1.0)
    wt = 0.5 * wu
    y, wy = np.polynomial.hermite_e.hermegauss(n_x)
    wy = wy / math.sqrt(2.0 * math.pi)
    h1, h2 = sched.h1(tau), sched.h2(tau)
    sd = np.sqrt(var * h1 * h1 + h2)
    x = (mean * h1)[:, None] + sd[:, None] * y[None, :]
    w = (wt * h2)[:, None] * wy[None, :]
    flat_tau = np.repeat(tau, n_x)
    xf = x.reshape(-1, 1)
    feats = model._features(flat_tau, np.zeros((xf.shape[0], model.hidden_dim)), xf)
    out, cache = model.head.forward_cache(feats)
    s = model._finish(flat_tau, xf, out)
    target = analytic_gaussian_score(flat_tau, xf[:, 0], mean, var, sched)[:, None]
    diff = s - target
    wf = w.reshape(-1, 1)
    loss = float(np.sum(wf * diff * diff))
    h2f = sched.h2(flat_tau)[:, None]
    if model.parameterization == "residual":
        ds = -np.ones_like(out)
    elif model.parameterization == "noise":
        ds = -1.0 / np.sqrt(h2f) * np.ones_like(out)
    else:
        ds = model.bound * (1.0 - np.tanh(out) ** 2)
    grads, _ = model.head.backward(cache, 2.0 * wf * diff * ds)
    return loss, grads


def _lr_at(cfg: GeneratorConfig, step: int, total: int, per_epoch: int) -> float:
    warm = cfg.warmup_epochs * per_epoch
    if warm and step < warm:
        return cfg.lr * (step + 1) / warm
    if not cfg.cosine or total <= warm:
        return cfg.lr
    frac = (step - warm) / max(1, total - warm)
    return cfg.lr * 0.5 * (1.0 + math.cos(math.pi * min(1.0, frac)))


def train_generator(data, config: GeneratorConfig | None = None, model: ScoreModel | None = None):
    """Train encoder and score head jointly; returns ``(model with EMA weights, epoch losses)``."""
    cfg = config or GeneratorConfig()
    data = np.asarray(data, dtype=float)
    if data.ndim == 2:
        data = data[:, :, None]
    if data.ndim != 3 or data.shape[0] == 0:
        raise ValueError("data must be a nonempty (n, T, d) array")
    n, T, d = data.shape
    if model is None:
        model = ScoreModel(d, cfg.schedule, cfg.hidden_dim, cfg.width, cfg.depth,
                           cfg.time_width, cfg.parameterization, cfg.bound, seed=cfg.seed)
        if cfg.standardize:
            flat = data.reshape(-1, d)
            model.mean = flat.mean(axis=0)
            sd = flat.std(axis=0)
            model.std = np.where(sd > 0, sd, 1.0)
    if cfg.epochs <= 0:
        return model, []
    norm = model.normalize(data)
    rng = np.random.default_rng(cfg.seed + 1)
    opt = Optimizer("adamw", cfg.lr, cfg.betas[0], cfg.betas[1], cfg.weight_decay)
    params = model.params
    ema = EmaTracker(params, cfg.ema_decay)
    bs = min(cfg.batch_size, n)
    per_epoch = int(math.ceil(n / bs))
    total = per_epoch * cfg.epochs
    step = 0
    losses = []
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        acc = 0.0
        for i in range(per_epoch):
            idx = perm[i * bs:(i + 1) * bs]
            batch = TrainBatch.draw(norm[idx], model.schedule, rng)
            loss, grads = dsm_loss(model, batch)
            clip_grad_norm(grads, cfg.grad_clip)
            opt.step(params, grads, lr=_lr_at(cfg, step, total, per_epoch))
            ema.update(params)
            acc += loss * len(idx)
            step += 1
        losses.append(acc / n)
        log.debug("epoch %d dsm loss %.6f", epoch, losses[-1])
    model.set_params(ema.shadow)
    return model, losses


# sampling ---------------------------------------------------------------

def _snr_step(score, xi, snr):
    # norms averaged over the batch; per-sample ratios are heavy-tailed for small d
    s_norm = np.linalg.norm(score, axis=1).mean()
    n_norm = np.linalg.norm(xi, axis=1).mean()
    e = 2.0 * (snr * n_norm / max(s_norm, 1e-12)) ** 2
    return float(np.clip(e, 1e-6, 1e-1))


def sample_next(model, h, rng, n_pre: int | None = None, n_cor: int = 1, snr: float = 0.16):
    """One coordinate block by predictor-corrector reverse diffusion.

    ``h`` is ``(n, d')`` (or a single state). Returns standardized draws
    ``(n, d)``. RNG draw order: initial noise, then for each predictor step one
    normal block followed by ``n_cor`` corrector blocks.
    """
    sched = model.schedule
    h = np.atleast_2d(np.asarray(h, dtype=float))
    n = h.shape[0]
    d = model.d
    taus = sched.grid(n_pre)
    x = rng.standard_normal((n, d))
    for k in range(len(taus) - 1):
        tk, tn = taus[k], taus[k + 1]
        dt = tk - tn
        b = float(sched.beta(tk))
        s = model.score(tk, h, x)
        x = x + (0.5 * b * x + b * s) * dt + math.sqrt(b * dt) * rng.standard_normal((n, d))
        for _ in range(n_cor):
            s = model.score(tn, h, x)
            xi = rng.standard_normal((n, d))
            e = _snr_step(s, xi, snr)
            x = x + e * s + math.sqrt(2.0 * e) * xi
        if not np.all(np.isfinite(x)):
            raise FloatingPointError(f"non-finite sampler iterate at predictor step {k}")
    return x


class AdaptiveSampler:
    """Generates a batch of paths one coordinate block at a time.

    Stopping after ``t`` blocks and calling :meth:`step` again continues the
    same RNG stream, so prefixes never depend on the requested length.
    """

    def __init__(self, model: ScoreModel, h0, n: int, rng, n_pre=None, n_cor=1, snr=0.16):
        self.model = model
        self.h = np.broadcast_to(np.asarray(h0, dtype=float), (n, model.hidden_dim)).copy()
        self.rng = rng
        self.kw = dict(n_pre=n_pre, n_cor=n_cor, snr=snr)
        self.norm_blocks = []
        self.features = []

    def step(self) -> np.ndarray:
        x = sample_next(self.model, self.h, self.rng, **self.kw)
        self.h = self.model.encoder.step(x, self.h)
        self.norm_blocks.append(x)
        self.features.append(self.h.copy())
        return self.model.denormalize(x)

    def paths(self) -> np.ndarray:
        return self.model.denormalize(np.stack(self.norm_blocks, axis=1))


CHUNK = 256


def sample_path(model: ScoreModel, context=None, T_out: int = 1, n_paths: int = 1, seed: int = 0,
                n_pre: int | None = None, n_cor: int = 1, snr: float = 0.16, threads: int = 1,
                return_features: bool = False):
    """Adaptive sampling of ``n_paths`` raw-return paths of length ``T_out``.

    Paths are generated in fixed chunks of 256, each with its own spawned RNG
    stream, so output is identical for any ``threads`` value.
    """
    if T_out < 1 or n_paths < 1:
        raise ValueError("T_out and n_paths must be positive")
    h0 = model.context_state(context)
    n_chunks = int(math.ceil(n_paths / CHUNK))
    seqs = np.random.SeedSequence(seed).spawn(n_chunks)

    def run(i):
        n = min(CHUNK, n_paths - i * CHUNK)
        smp = AdaptiveSampler(model, h0, n, np.random.default_rng(seqs[i]), n_pre, n_cor, snr)
        for _ in range(T_out):
            smp.step()
        return smp.paths(), np.stack(smp.features, axis=1)

    if threads > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(run, range(n_chunks)))
    else:
        parts = [run(i) for i in range(n_chunks)]
    paths = np.concatenate([p for p, _ in parts], axis=0)
    if return_features:
        return paths, np.concatenate([f for _, f in parts], axis=0)
    return paths
