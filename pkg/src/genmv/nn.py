"""Small dense networks with hand-written reverse-mode gradients.

Everything here works on plain ``dict[str, np.ndarray]`` parameter sets so that
optimizers, EMA tracking, Polyak averaging and checkpointing can treat every
network (score head, GRU encoder, critics, policy) the same way.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CKPT_MAGIC = "GENMV-CKPT-1"

_ACTIVATIONS = ("tanh", "relu", "identity")


def _act(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == "tanh":
        return np.tanh(z)
    if kind == "relu":
        return np.maximum(z, 0.0)
    return z


def _act_grad(kind: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if kind == "tanh":
        return 1.0 - a * a
    if kind == "relu":
        return (z > 0.0).astype(z.dtype)
    return np.ones_like(z)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class DenseNet:
    """Multi-layer perceptron ``y = f_L(... f_1(x W_1 + b_1) ...)``.

    Weights are stored as ``(fan_in, fan_out)`` so batched inputs of shape
    ``(n, fan_in)`` multiply on the right.
    """

    def __init__(self, sizes, activations=None, rng=None, prefix=""):
        sizes = [int(s) for s in sizes]
        if len(sizes) < 2 or any(s <= 0 for s in sizes):
            raise ValueError(f"invalid layer sizes {sizes}")
        n_layers = len(sizes) - 1
        if activations is None:
            activations = ["tanh"] * (n_layers - 1) + ["identity"]
        if isinstance(activations, str):
            activations = [activations] * n_layers
        activations = list(activations)
        if len(activations) != n_layers:
            raise ValueError("need one activation per layer")
        for kind in activations:
            if kind not in _ACTIVATIONS:
                raise ValueError(f"unknown activation {kind!r}")
        self.sizes = sizes
        self.activations = activations
        self.prefix = prefix
        rng = np.random.default_rng(0) if rng is None else rng
        self.params: dict[str, np.ndarray] = {}
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            bound = 1.0 / np.sqrt(fan_in)
            self.params[f"{prefix}W{i}"] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            self.params[f"{prefix}b{i}"] = np.zeros(fan_out)

    @property
    def n_in(self) -> int:
        return self.sizes[0]

    @property
    def n_out(self) -> int:
        return self.sizes[-1]

    def W(self, i):
        return self.params[f"{self.prefix}W{i}"]

    def b(self, i):
        return self.params[f"{self.prefix}b{i}"]

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n_in:
            raise ValueError(f"expected input dim {self.n_in}, got {x.shape[-1]}")
        return x

    def forward(self, x) -> np.ndarray:
        x = self._check(x)
        a = x
        for i, kind in enumerate(self.activations):
            a = _act(kind, a @ self.W(i) + self.b(i))
        return a

    __call__ = forward

    def forward_cache(self, x):
        """Forward pass that also returns what :meth:`backward` needs."""
        x = self._check(x)
        squeeze = x.ndim == 1
        a = x[None, :] if squeeze else x
        acts, pre = [a], []
        for i, kind in enumerate(self.activations):
            z = a @ self.W(i) + self.b(i)
            a = _act(kind, z)
            pre.append(z)
            acts.append(a)
        out = a[0] if squeeze else a
        return out, (squeeze, acts, pre)

    def backward(self, cache, upstream):
        """Vector-Jacobian product. Returns ``(param_grads, input_grad)``.

        Gradients are summed over the batch dimension.
        """
        squeeze, acts, pre = cache
        g = np.asarray(upstream, dtype=float)
        if g.shape[-1] != self.n_out:
            raise ValueError(f"upstream must have dim {self.n_out}")
        if squeeze:
            g = g[None, :]
        grads = {}
        for i in reversed(range(len(self.activations))):
            g = g * _act_grad(self.activations[i], pre[i], acts[i + 1])
            grads[f"{self.prefix}W{i}"] = acts[i].T @ g
            grads[f"{self.prefix}b{i}"] = g.sum(axis=0)
            g = g @ self.W(i).T
        return grads, (g[0] if squeeze else g)

    def copy(self) -> "DenseNet":
        return copy.deepcopy(self)


class GRUEncoder:
    """Gated recurrent cell ``h_t = R(s_t, h_{t-1})`` unrolled over a path.

    z = sigmoid(s Wz + h Uz + bz)
    r = sigmoid(s Wr + h Ur + br)
    n = tanh(s Wn + bn + r * (h Un))
    h' = (1 - z) * n + z * h
    """

    def __init__(self, d_in: int, d_hidden: int, rng=None, prefix="enc."):
        self.d_in = int(d_in)
        self.d_hidden = int(d_hidden)
        self.prefix = prefix
        rng = np.random.default_rng(0) if rng is None else rng
        bound = 1.0 / np.sqrt(self.d_hidden)
        p = {}
        for gate in "zrn":
            p[f"{prefix}W{gate}"] = rng.uniform(-bound, bound, size=(self.d_in, self.d_hidden))
            p[f"{prefix}U{gate}"] = rng.uniform(-bound, bound, size=(self.d_hidden, self.d_hidden))
            p[f"{prefix}b{gate}"] = np.zeros(self.d_hidden)
        self.params: dict[str, np.ndarray] = p

    def _p(self, name):
        return self.params[self.prefix + name]

    def step(self, s, h):
        """One recurrence step for a batch ``s: (n, d)``, ``h: (n, d')``."""
        return self._step(s, h)[0]

    def _step(self, s, h):
        z = _sigmoid(s @ self._p("Wz") + h @ self._p("Uz") + self._p("bz"))
        r = _sigmoid(s @ self._p("Wr") + h @ self._p("Ur") + self._p("br"))
        hu = h @ self._p("Un")
        n = np.tanh(s @ self._p("Wn") + self._p("bn") + r * hu)
        h_new = (1.0 - z) * n + z * h
        return h_new, (s, h, z, r, n, hu)

    def encode(self, path, h0=None) -> np.ndarray:
        """Hidden states ``(h_1, ..., h_T)`` for ``path`` of shape ``(T, d)`` or ``(n, T, d)``."""
        return self.encode_cache(path, h0)[0]

    def encode_cache(self, path, h0=None):
        path = np.asarray(path, dtype=float)
        single = path.ndim == 2
        if single:
            path = path[None]
        if path.ndim != 3 or (path.shape[1] > 0 and path.shape[2] != self.d_in):
            raise ValueError(f"path must have trailing dim {self.d_in}")
        n, T = path.shape[0], path.shape[1]
        if h0 is None:
            h = np.zeros((n, self.d_hidden))
        else:
            h = np.broadcast_to(np.asarray(h0, dtype=float), (n, self.d_hidden)).copy()
        out = np.empty((n, T, self.d_hidden))
        steps = []
        for t in range(T):
            h, c = self._step(path[:, t], h)
            out[:, t] = h
            steps.append(c)
        res = out[0] if single else out
        return res, (single, steps)

    def backward(self, cache, d_hidden_seq):
        """Backprop through time. ``d_hidden_seq`` matches the encode output.

        Returns ``(param_grads, d_path, d_h0)``.
        """
        single, steps = cache
        dH = np.asarray(d_hidden_seq, dtype=float)
        if single:
            dH = dH[None]
        grads = {k: np.zeros_like(v) for k, v in self.params.items()}
        T = len(steps)
        n = dH.shape[0]
        d_path = np.zeros((n, T, self.d_in))
        dh_next = np.zeros((n, self.d_hidden))
        Uz, Ur, Un = self._p("Uz"), self._p("Ur"), self._p("Un")
        Wz, Wr, Wn = self._p("Wz"), self._p("Wr"), self._p("Wn")
        pf = self.prefix
        for t in reversed(range(T)):
            s, h, z, r, nn_, hu = steps[t]
            dh = dH[:, t] + dh_next
            dz = dh * (h - nn_)
            dn = dh * (1.0 - z)
            dh_prev = dh * z
            dan = dn * (1.0 - nn_ * nn_)
            dr = dan * hu
            dhu = dan * r
            daz = dz * z * (1.0 - z)
            dar = dr * r * (1.0 - r)
            grads[pf + "Wz"] += s.T @ daz
            grads[pf + "Uz"] += h.T @ daz
            grads[pf + "bz"] += daz.sum(0)
            grads[pf + "Wr"] += s.T @ dar
            grads[pf + "Ur"] += h.T @ dar
            grads[pf + "br"] += dar.sum(0)
            grads[pf + "Wn"] += s.T @ dan
            grads[pf + "bn"] += dan.sum(0)
            grads[pf + "Un"] += h.T @ dhu
            dh_prev = dh_prev + daz @ Uz.T + dar @ Ur.T + dhu @ Un.T
            d_path[:, t] = daz @ Wz.T + dar @ Wr.T + dan @ Wn.T
            dh_next = dh_prev
        if single:
            return grads, d_path[0], dh_next[0]
        return grads, d_path, dh_next

    def copy(self) -> "GRUEncoder":
        return copy.deepcopy(self)


def time_features(tau, width: int, horizon: float = 1.0) -> np.ndarray:
    """Sinusoidal features of diffusive time; ``width`` must be even.

    ``width == 0`` returns an empty feature block; ``width == 1`` returns the
    raw scaled time.
    """
    tau = np.atleast_1d(np.asarray(tau, dtype=float)) / horizon
    if width == 0:
        return np.zeros((tau.shape[0], 0))
    if width == 1:
        return tau[:, None].copy()
    if width % 2:
        raise ValueError("time feature width must be even")
    freqs = np.exp(np.linspace(0.0, np.log(50.0), width // 2))
    ang = tau[:, None] * freqs[None, :]
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=1)


@dataclass
class Optimizer:
    """Adam / AdamW with bias-corrected moments, updating parameters in place."""

    kind: str = "adam"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 0.0
    eps: float = 1e-8
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0

    def __post_init__(self):
        if self.kind not in ("adam", "adamw"):
            raise ValueError(f"unknown optimizer kind {self.kind!r}")

    def step(self, params: dict, grads: dict, lr: float | None = None) -> dict:
        lr = self.lr if lr is None else lr
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for k, p in params.items():
            g = grads.get(k)
            if g is None:
                continue
            if g.shape != p.shape:
                raise ValueError(f"gradient shape mismatch for {k}")
            if self.kind == "adam" and self.weight_decay:
                g = g + self.weight_decay * p
            if k not in self.m:
                self.m[k] = np.zeros_like(p)
                self.v[k] = np.zeros_like(p)
            m, v = self.m[k], self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            if self.kind == "adamw" and self.weight_decay:
                p *= 1.0 - lr * self.weight_decay
            p -= lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
        return params


class EmaTracker:
    """Shadow copy updated as ``shadow = decay * shadow + (1 - decay) * current``."""

    def __init__(self, params: dict, decay: float = 0.999):
        if not 0.0 < decay < 1.0:
            raise ValueError("EMA decay must lie in (0, 1)")
        self.decay = decay
        self.shadow = {k: v.copy() for k, v in params.items()}

    def update(self, params: dict) -> None:
        for k, v in params.items():
            self.shadow[k] *= self.decay
            self.shadow[k] += (1.0 - self.decay) * v


def polyak_update(target: dict, online: dict, rho: float) -> dict:
    """In-place ``target <- rho * target + (1 - rho) * online``."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    for k, v in online.items():
        if target[k].shape != v.shape:
            raise ValueError(f"shape mismatch for {k}")
        target[k] *= rho
        target[k] += (1.0 - rho) * v
    return target


def clip_grad_norm(grads: dict, max_norm: float) -> float:
    total = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if max_norm and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for g in grads.values():
            g *= scale
    return total


def save_checkpoint(path, arrays: dict, meta: dict | None = None) -> None:
    """Write named arrays as JSON with shape headers and the format magic."""
    payload = {
        "magic": CKPT_MAGIC,
        "meta": meta or {},
        "arrays": {
            k: {"shape": list(np.shape(v)), "data": np.asarray(v, dtype=float).ravel().tolist()}
            for k, v in sorted(arrays.items())
        },
    }
    Path(path).write_text(json.dumps(payload))


def load_checkpoint(path):
    payload = json.loads(Path(path).read_text())
    if payload.get("magic") != CKPT_MAGIC:
        raise ValueError(f"{path}: not a {CKPT_MAGIC} checkpoint")
    arrays = {
        k: np.asarray(v["data"], dtype=float).reshape(v["shape"])
        for k, v in payload["arrays"].items()
    }
    return arrays, payload.get("meta", {})
