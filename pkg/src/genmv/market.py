"""Mean-variance selection on scenario trees, its quadratic-hedging dual, and metrics.

Hedging problem: minimise ``E|c - W_T|^2`` over adapted share holdings in K,
with ``W_{t+1} = W_t + theta_t . (S^{t+1} - S^t)``. The mean-variance value is
recovered through ``v* = sup_a { -(gamma/2) V(1/gamma + a) + 1/(2 gamma) + a }``.
"""
from __future__ import annotations

import itertools
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import spearmanr

from .transport import AdaptedMeasure, Node, aw2

log = logging.getLogger(__name__)


# scenario trees ---------------------------------------------------------

class ScenarioTree:
    """Price tree: an adapted measure over ``S^{1:T}`` with a deterministic ``S^1``."""

    def __init__(self, measure: AdaptedMeasure):
        if len(measure.root.children) != 1:
            raise ValueError("S^1 must be deterministic: the root needs exactly one child")
        vals, _ = measure.paths()
        if np.any(vals <= 0):
            raise ValueError("prices must be positive")
        self.measure = measure

    @property
    def T(self) -> int:
        return self.measure.T

    @property
    def d(self) -> int:
        return self.measure.d

    @property
    def first(self) -> Node:
        return self.measure.root.children[0]

    def nodes(self):
        """``(node, depth)`` pairs, parents before children (depth 1 = S^1)."""
        out, stack = [], [(self.first, 1)]
        while stack:
            n, t = stack.pop()
            out.append((n, t))
            stack.extend((c, t + 1) for c in reversed(n.children))
        return out

    def to_dict(self) -> dict:
        return {"prices": True, **self.measure.to_dict()}

    @classmethod
    def from_dict(cls, obj) -> "ScenarioTree":
        if not obj.get("prices", False):
            raise ValueError("tree JSON lacks the prices flag")
        return cls(AdaptedMeasure.from_dict(obj))

    @classmethod
    def from_increments(cls, s1, branches, depth: int) -> "ScenarioTree":
        """Recombining-free tree with the same ``(increment, prob)`` list at each node."""
        s1 = np.atleast_1d(np.asarray(s1, dtype=float))

        def grow(value, t):
            if t == depth:
                return []
            return [Node(value + np.atleast_1d(np.asarray(dx, dtype=float)), float(p),
                         grow(value + np.atleast_1d(np.asarray(dx, dtype=float)), t + 1))
                    for dx, p in branches]

        root = Node(np.zeros(0), 1.0, [Node(s1, 1.0, grow(s1, 1))])
        return cls(AdaptedMeasure(root, depth, len(s1)))


def random_tree(rng, T: int = 3, max_branches: int = 3, d: int = 1, s1: float = 10.0,
                scale: float = 1.0, drift: float = 0.3, min_branches: int = 1,
                alpha: float = 1.0) -> ScenarioTree:
    """Random tree with min..max_branches children per node and positive prices.

    Branch probabilities are Dirichlet(alpha); larger alpha keeps them balanced.
    """

    def grow(value, t):
        if t == T:
            return []
        k = int(rng.integers(min_branches, max_branches + 1))
        w = rng.dirichlet(np.full(k, float(alpha)))
        kids = []
        for wi in w:
            v = np.maximum(value + scale * (rng.standard_normal(d) + drift), 0.1)
            kids.append(Node(v, float(wi), grow(v, t + 1)))
        return kids

    start = np.full(d, float(s1))
    return ScenarioTree(AdaptedMeasure(Node(np.zeros(0), 1.0, [Node(start, 1.0, grow(start, 1))]), T, d))


def perturb_tree(tree: ScenarioTree, rng, size: float, weights: bool = True) -> ScenarioTree:
    """Same topology; prices shifted (and, with ``weights``, probabilities tilted) along a
    random direction of norm ``size``."""
    nodes = [n for n, t in tree.nodes() if t > 1]
    dv = rng.standard_normal((len(nodes), tree.d))
    dw = rng.standard_normal(len(nodes)) if weights else np.zeros(len(nodes))
    norm = math.sqrt((dv ** 2).sum() + (dw ** 2).sum())
    dv, dw = dv * size / norm, dw * size / norm
    new = {}

    def copy(node, t):
        kids = [copy(c, t + 1) for c in node.children]
        n = Node(node.value.copy(), node.weight, kids)
        new[id(node)] = n
        return n

    root = copy(tree.measure.root, 0)
    for k, node in enumerate(nodes):
        n = new[id(node)]
        n.value = np.maximum(n.value + dv[k], 0.05)
        n.weight = node.weight * math.exp(dw[k])
    for node, _ in tree.nodes():
        kids = new[id(node)].children
        tot = sum(c.weight for c in kids)
        for c in kids:
            c.weight /= tot
    return ScenarioTree(AdaptedMeasure(root, tree.T, tree.d))


# constraints ------------------------------------------------------------

@dataclass(frozen=True)
class ConstraintSet:
    kind: str = "box"
    lower: float = -1.0
    upper: float = 1.0

    def __post_init__(self):
        if self.kind not in ("box", "simplex"):
            raise ValueError(f"unknown constraint kind {self.kind!r}")
        if self.kind == "box" and not self.lower <= self.upper:
            raise ValueError("box needs lower <= upper")

    def action_grid(self, d: int, n: int = 21) -> np.ndarray:
        """Per-dimension uniform grid (box) or lattice with step ``1/(n-1)`` (simplex)."""
        if self.kind == "box":
            axis = np.linspace(self.lower, self.upper, n)
            return np.array(list(itertools.product(axis, repeat=d)))
        m = n - 1
        pts = [c for c in itertools.product(range(m + 1), repeat=d) if sum(c) == m]
        return np.array(pts, dtype=float) / m

    def contains(self, a, tol: float = 1e-9) -> bool:
        a = np.asarray(a, dtype=float)
        if self.kind == "box":
            return bool(np.all(a >= self.lower - tol) and np.all(a <= self.upper + tol))
        return bool(np.all(a >= -tol) and abs(a.sum() - 1.0) <= tol)

    def max_norm(self, d: int) -> float:
        if self.kind == "box":
            return max(abs(self.lower), abs(self.upper)) * math.sqrt(d)
        return 1.0


# hedging DPP ------------------------------------------------------------

@dataclass
class NodeTable:
    wealth: np.ndarray
    value: np.ndarray
    action: np.ndarray | None = None


@dataclass
class HedgeValue:
    c: float
    tables: dict
    actions: np.ndarray
    tree: ScenarioTree
    mode: str

    def table(self, node) -> NodeTable:
        return self.tables[id(node)]

    def value(self, node, w) -> float:
        tab = self.table(node)
        return float(_lookup(tab.wealth, tab.value, np.atleast_1d(float(w)), self.mode)[0])

    def root_value(self, w0: float = 0.0) -> float:
        return self.value(self.tree.first, w0)

    def action(self, node, w) -> np.ndarray:
        """Optimal holding at ``node`` and wealth ``w`` (nearest tabulated wealth)."""
        tab = self.table(node)
        i = int(np.argmin(np.abs(tab.wealth - w)))
        return tab.action[i]

    def terminal_wealths(self, w0: float = 0.0):
        """Terminal wealth and probability of every path under the recursive optimizer."""
        out_w, out_p = [], []
        stack = [(self.tree.first, w0, 1.0)]
        while stack:
            node, w, p = stack.pop()
            if not node.children:
                out_w.append(w)
                out_p.append(p)
                continue
            th = self.action(node, w)
            for c in node.children:
                stack.append((c, w + float(th @ (c.value - node.value)), p * c.weight))
        return np.array(out_w), np.array(out_p)


def _lookup(grid, values, w, mode):
    if mode == "reachable":
        idx = np.searchsorted(grid, w)
        idx = np.minimum(idx, len(grid) - 1)
        if not np.allclose(grid[idx], w, rtol=0, atol=1e-9):
            raise RuntimeError("wealth not on the reachable grid")
        return values[idx]
    if w.min() < grid[0] - 1e-12 or w.max() > grid[-1] + 1e-12:
        raise ValueError(f"reachable wealth [{w.min():.6g}, {w.max():.6g}] escapes the "
                         f"grid [{grid[0]:.6g}, {grid[-1]:.6g}]")
    return np.interp(w, grid, values)


def _uniform_grids(tree: ScenarioTree, K: ConstraintSet, w0: float, n_w: int, user=None):
    """Per-depth wealth grids covering every wealth reachable from ``w0``.

    Depth ``t`` needs ``[w0 - r (t-1), w0 + r (t-1)]`` with ``r`` the largest
    one-step gain, so interpolation at depth ``t + 1`` never leaves its grid.
    A user grid fixes the resolution and must contain the terminal band.
    """
    radius = 0.0
    for node, _ in tree.nodes():
        if node.children:
            step = max(np.linalg.norm(c.value - node.value) for c in node.children)
            radius = max(radius, step)
    r = K.max_norm(tree.d) * radius
    span_T = r * (tree.T - 1)
    if user is not None:
        g = np.sort(np.asarray(user, dtype=float))
        if w0 - span_T < g[0] - 1e-12 or w0 + span_T > g[-1] + 1e-12:
            raise ValueError(f"reachable wealth [{w0 - span_T:.6g}, {w0 + span_T:.6g}] escapes "
                             f"the grid [{g[0]:.6g}, {g[-1]:.6g}]")
    grids = {}
    for t in range(1, tree.T + 1):
        lo, hi = w0 - r * (t - 1), w0 + r * (t - 1)
        if hi <= lo:
            grids[t] = np.array([float(w0)])
        elif user is None:
            grids[t] = np.linspace(lo, hi, n_w)
        else:
            grids[t] = np.unique(np.concatenate([g[(g > lo) & (g < hi)], [lo, hi]]))
    return grids


def solve_hedge_dpp(tree: ScenarioTree, c: float, K: ConstraintSet | None = None,
                    n_actions: int = 21, wealth_grid=None, mode: str = "reachable",
                    w0: float = 0.0, n_wealth: int = 201) -> HedgeValue:
    """Backward induction ``V(T, w) = (c - w)^2``, ``V(t, w) = min_theta E[V(t+1, w + theta.dS)]``.

    ``mode="reachable"`` tabulates exactly the wealths reachable from ``w0`` on
    the action grid (no interpolation); ``mode="uniform"`` uses per-depth uniform
    grids with linear interpolation.
    """
    K = K or ConstraintSet()
    A = K.action_grid(tree.d, n_actions)
    nodes = tree.nodes()
    tables = {}
    if mode == "reachable":
        grids = {id(tree.first): np.array([float(w0)])}
        for node, _ in nodes:
            for ch in node.children:
                gain = A @ (ch.value - node.value)
                grids[id(ch)] = np.unique((grids[id(node)][:, None] + gain[None, :]).ravel())
    elif mode == "uniform":
        by_depth = _uniform_grids(tree, K, w0, n_wealth, wealth_grid)
        grids = {id(n): by_depth[t] for n, t in nodes}
    else:
        raise ValueError(f"unknown wealth grid mode {mode!r}")
    for node, _ in reversed(nodes):
        w = grids[id(node)]
        if not node.children:
            tables[id(node)] = NodeTable(w, (c - w) ** 2)
            continue
        q = np.zeros((len(w), len(A)))
        for ch in node.children:
            nxt = w[:, None] + (A @ (ch.value - node.value))[None, :]
            tab = tables[id(ch)]
            q += ch.weight * _lookup(tab.wealth, tab.value, nxt.ravel(), mode).reshape(nxt.shape)
        best = np.argmin(q, axis=1)
        tables[id(node)] = NodeTable(w, q[np.arange(len(w)), best], A[best])
    return HedgeValue(float(c), tables, A, tree, mode)


def enumerate_hedge(tree: ScenarioTree, c: float, K: ConstraintSet | None = None,
                    n_actions: int = 21, w0: float = 0.0) -> float:
    """Brute force over every node-wise action assignment; small trees only."""
    K = K or ConstraintSet()
    W, P = enumerate_terminal_wealths(tree, K, n_actions, w0)
    return float(((c - W) ** 2 @ P).min())


def enumerate_terminal_wealths(tree: ScenarioTree, K: ConstraintSet | None = None,
                               n_actions: int = 21, w0: float = 0.0):
    """Terminal wealths ``(n_strategies, n_paths)`` and path probabilities for all strategies."""
    K = K or ConstraintSet()
    A = K.action_grid(tree.d, n_actions)
    inner = [n for n, _ in tree.nodes() if n.children]
    col = {id(n): k for k, n in enumerate(inner)}
    if len(A) ** len(inner) > 5_000_000:
        raise ValueError("tree too large for exhaustive enumeration")
    choice = np.array(list(itertools.product(range(len(A)), repeat=len(inner))), dtype=np.int64)
    trails = [tr for tr, _ in tree.measure.iter_paths()]
    probs = np.array([p for _, p in tree.measure.iter_paths()])
    W = np.full((len(choice), len(trails)), float(w0))
    for j, tr in enumerate(trails):
        for prev, nxt in zip(tr[:-1], tr[1:]):
            gain = A @ (nxt.value - prev.value)
            W[:, j] += gain[choice[:, col[id(prev)]]]
    return W, probs


# mean-variance ----------------------------------------------------------

def mv_value(wealth, gamma: float, weights=None) -> float:
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    w = np.asarray(wealth, dtype=float)
    p = np.full(w.shape, 1.0 / w.size) if weights is None else np.asarray(weights, dtype=float)
    p = p / p.sum()
    m = float(p @ w)
    return m - 0.5 * gamma * float(p @ (w - m) ** 2)


@dataclass
class DualResult:
    value: float
    a: float
    hedge: HedgeValue
    a_grid: np.ndarray
    values: np.ndarray


def dual_mv(tree: ScenarioTree, gamma: float, K: ConstraintSet | None = None, a_grid=None,
            n_actions: int = 21, mode: str = "reachable", w0: float = 0.0,
            refine: int = 0) -> DualResult:
    """Mean-variance value through the multiplier search; ties go to the smallest ``a``.

    ``refine`` extra rounds rescan a 21-point grid between the neighbours of the
    current argmax.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    grid = np.linspace(0.0, 5.0 / gamma, 101) if a_grid is None else np.asarray(a_grid, float)
    if grid.size == 0 or grid.min() < 0:
        raise ValueError("a_grid must be nonempty and nonnegative")

    def scan(pts):
        vals, hedges = [], []
        for a in pts:
            h = solve_hedge_dpp(tree, 1.0 / gamma + a, K, n_actions, mode=mode, w0=w0)
            hedges.append(h)
            vals.append(-0.5 * gamma * h.root_value(w0) + 0.5 / gamma + a)
        return np.array(vals), hedges

    vals, hedges = scan(grid)
    k = int(np.argmax(vals))
    if k == len(grid) - 1 and len(grid) > 1:
        warnings.warn("multiplier argmax at the upper end of a_grid; consider a larger cap")
    best = (vals[k], grid[k], hedges[k])
    lo_hi = (grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)])
    for _ in range(refine):
        pts = np.linspace(lo_hi[0], lo_hi[1], 21)
        v2, h2 = scan(pts)
        j = int(np.argmax(v2))
        if v2[j] > best[0]:
            best = (v2[j], pts[j], h2[j])
        lo_hi = (pts[max(j - 1, 0)], pts[min(j + 1, len(pts) - 1)])
    return DualResult(float(best[0]), float(best[1]), best[2], grid, vals)


def enumerate_mv(tree: ScenarioTree, gamma: float, K: ConstraintSet | None = None,
                 n_actions: int = 21, w0: float = 0.0) -> float:
    """Direct maximisation of the mean-variance value over all grid strategies."""
    W, P = enumerate_terminal_wealths(tree, K, n_actions, w0)
    m = W @ P
    var = ((W - m[:, None]) ** 2) @ P
    return float((m - 0.5 * gamma * var).max())


def nondegeneracy(tree: ScenarioTree) -> list:
    """Per trading node, the largest delta with ``|E[phi.dS]|^2 <= (1 - delta) E[|phi.dS|^2]``.

    Warns when some node has delta <= 0 (a riskless gain is available there).
    """
    out = []
    for node, t in tree.nodes():
        if not node.children:
            continue
        dS = np.stack([c.value - node.value for c in node.children])
        p = np.array([c.weight for c in node.children])
        m = p @ dS
        M = (dS * p[:, None]).T @ dS
        ratio = float(m @ np.linalg.pinv(M) @ m) if np.any(M) else 0.0
        out.append((t, 1.0 - ratio))
    if any(delta <= 1e-12 for _, delta in out):
        warnings.warn("non-degeneracy fails at some node (delta <= 0)")
    return out


# stability --------------------------------------------------------------

@dataclass
class StabilityScatter:
    aw2: np.ndarray
    dv: np.ndarray
    C: float
    spearman: float
    within: bool
    base_value: float = 0.0
    tol: float = 0.0


def node_probabilities(tree: ScenarioTree) -> dict:
    prob = {id(tree.first): 1.0}
    for node, _ in tree.nodes():
        for c in node.children:
            prob[id(c)] = prob[id(node)] * c.weight
    return prob


def lipschitz_estimate(tree: ScenarioTree, gamma: float = 1.5, K: ConstraintSet | None = None,
                       n_actions: int = 21, eps: float = 1e-4) -> float:
    """Local slope of ``v*`` against price moves measured in the adapted metric.

    A price move ``delta`` at the nodes after ``S^1`` is at adapted distance
    ``sqrt(sum_n P(n) |delta_n|^2)`` when it is small, so the slope is the dual
    norm ``sqrt(sum_n |dv*/dS_n|^2 / P(n))`` of the central-difference gradient.
    """
    prob = node_probabilities(tree)
    total = 0.0
    for node, t in tree.nodes():
        if t == 1:
            continue
        for j in range(tree.d):
            old = node.value[j]
            node.value[j] = old + eps
            up = dual_mv(tree, gamma, K, n_actions=n_actions).value
            node.value[j] = old - eps
            down = dual_mv(tree, gamma, K, n_actions=n_actions).value
            node.value[j] = old
            g = (up - down) / (2.0 * eps)
            total += g * g / prob[id(node)]
    return math.sqrt(total)


def stability_scatter(base: ScenarioTree, gamma: float = 1.5, n: int = 30, seed: int = 0,
                      K: ConstraintSet | None = None, n_actions: int = 21,
                      sizes=(1e-4, 0.3), tol: float = 1e-3,
                      weights: bool = False) -> StabilityScatter:
    """|v*(P) - v*(Q)| against aw2(P, Q) over random perturbations Q of P.

    The envelope slope C comes from ``lipschitz_estimate`` at the base tree, so
    it is fitted without the scatter points; every point is then checked against
    ``1.05 C aw2 + tol``.
    """
    rng = np.random.default_rng(seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        v0 = dual_mv(base, gamma, K, n_actions=n_actions).value
        C = lipschitz_estimate(base, gamma, K, n_actions)
        d_aw, d_v = [], []
        for _ in range(n):
            size = float(np.exp(rng.uniform(np.log(sizes[0]), np.log(sizes[1]))))
            q = perturb_tree(base, rng, size, weights)
            d_aw.append(aw2(base.measure, q.measure))
            d_v.append(abs(dual_mv(q, gamma, K, n_actions=n_actions).value - v0))
    d_aw, d_v = np.array(d_aw), np.array(d_v)
    within = bool(np.all(d_v <= 1.05 * C * d_aw + tol))
    rho = float(spearmanr(d_aw, d_v).statistic)
    return StabilityScatter(d_aw, d_v, C, rho, within, v0, tol)


def stability_base_tree(seed: int = 0) -> ScenarioTree:
    """Binary three-date tree with balanced branch probabilities."""
    return random_tree(np.random.default_rng(seed), T=3, max_branches=2, min_branches=2,
                       alpha=4.0)


# Markowitz --------------------------------------------------------------

def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, len(v) + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1), 0.0)


def markowitz_simplex(mean, cov, gamma: float, max_iter: int = 20000, tol: float = 1e-13):
    """``argmax_a a.mean - (gamma/2) a' cov a`` over the simplex by accelerated projected gradient."""
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    d = len(mean)
    if cov.shape != (d, d) or not np.allclose(cov, cov.T, atol=1e-12):
        raise ValueError("cov must be a symmetric d x d matrix")
    eig = np.linalg.eigvalsh(cov)
    if eig[0] < -1e-8:
        raise ValueError(f"cov is not PSD (min eigenvalue {eig[0]:.3g})")
    L = gamma * max(eig[-1], 0.0)
    step = 1.0 / L if L > 0 else 1.0
    x = np.full(d, 1.0 / d)
    y, t = x.copy(), 1.0
    for _ in range(max_iter):
        x_new = project_simplex(y + step * (mean - gamma * cov @ y))
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = x_new + ((t - 1.0) / t_new) * (x_new - x)
        done = np.abs(x_new - x).max() < tol
        x, t = x_new, t_new
        if done:
            break
    return x


def markowitz_objective(a, mean, cov, gamma: float) -> float:
    a = np.asarray(a, dtype=float)
    return float(a @ mean - 0.5 * gamma * a @ cov @ a)


# wealth and metrics -----------------------------------------------------

def wealth_path(prices, strategy, mode: str = "shares", w0: float = 0.0, K=None) -> np.ndarray:
    """Wealth ``(w_1, ..., w_T)`` along a price path ``(T, d)``.

    ``strategy(t, prefix, w)`` returns the holding (shares) or the allocation
    (proportions) used over ``[t, t+1]``; ``prefix`` is ``prices[:t+1]``.
    """
    S = np.asarray(prices, dtype=float)
    if S.ndim == 1:
        S = S[:, None]
    w = [float(w0)]
    for t in range(len(S) - 1):
        a = np.asarray(strategy(t, S[:t + 1], w[-1]), dtype=float)
        if K is not None and not K.contains(a):
            raise ValueError(f"action at step {t} leaves the constraint set")
        if mode == "shares":
            nxt = w[-1] + float(a @ (S[t + 1] - S[t]))
        elif mode == "proportions":
            nxt = w[-1] * (1.0 + float(a @ (S[t + 1] / S[t] - 1.0)))
        else:
            raise ValueError(f"unknown wealth mode {mode!r}")
        if not math.isfinite(nxt):
            raise FloatingPointError(f"non-finite wealth at step {t}")
        w.append(nxt)
    return np.array(w)


@dataclass
class PerfMetrics:
    ann_return: float
    ann_vol: float
    sharpe: float | None
    sortino: float | None
    max_dd: float
    calmar: float | None
    mv_value: float
    gamma: float

    def to_dict(self, strategy: str | None = None) -> dict:
        out = asdict(self)
        if strategy is not None:
            out = {"strategy": strategy, **out}
        return out


def max_drawdown(returns) -> float:
    """Most negative peak-to-trough change of the compounded curve started at 1."""
    curve = np.concatenate([[1.0], np.cumprod(1.0 + np.asarray(returns, dtype=float))])
    peak = np.maximum.accumulate(curve)
    return float(np.min(curve / peak - 1.0))


def perf_metrics(returns, periods: int = 12, rf: float = 0.0, gamma: float = 1.5) -> PerfMetrics:
    raw = np.asarray(returns, dtype=float)
    r = raw - rf / periods
    if r.size == 0:
        raise ValueError("empty return series")
    ann_ret = periods * float(r.mean())
    vol = math.sqrt(periods) * float(r.std(ddof=1)) if r.size > 1 else 0.0
    if vol < 1e-14:
        vol = 0.0
    down = np.minimum(r, 0.0)
    dd_dev = math.sqrt(periods) * math.sqrt(float(np.mean(down ** 2)))
    mdd = max_drawdown(raw)
    return PerfMetrics(
        ann_return=ann_ret,
        ann_vol=vol,
        sharpe=ann_ret / vol if vol > 0 else None,
        sortino=ann_ret / dd_dev if dd_dev > 0 else None,
        max_dd=mdd,
        calmar=ann_ret / abs(mdd) if mdd != 0 else None,
        mv_value=ann_ret - 0.5 * gamma * vol ** 2,
        gamma=gamma,
    )
