"""Exact optimal transport on finite measures: W2, adapted W2 and its LP oracle.

Adapted measures are trees under a virtual root. A node at depth t carries
the value of the t-th coordinate block and its weight conditional on the
parent, so a root-to-leaf walk spells one path and the product of weights is
its probability.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

LP_MAX_PATHS = 64
TOL = 1e-10


@dataclass
class DiscreteMeasure:
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.asarray(self.weights, dtype=float).ravel()
        if pts.shape[0] != w.shape[0] or w.size == 0:
            raise ValueError("points and weights must be nonempty and aligned")
        if np.any(w < 0) or abs(w.sum() - 1.0) > TOL:
            raise ValueError("weights must be nonnegative and sum to 1")
        if not np.all(np.isfinite(pts)):
            raise ValueError("support points must be finite")
        self.points, self.weights = pts, w

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @classmethod
    def uniform(cls, points) -> "DiscreteMeasure":
        pts = np.asarray(points, dtype=float)
        return cls(pts, np.full(pts.shape[0], 1.0 / pts.shape[0]))


# plain OT ---------------------------------------------------------------

def ot_lp(a, b, cost):
    """Balanced OT ``min <cost, pi>`` by dense LP (HiGHS); returns ``(value, plan)``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n, m = cost.shape
    if n == 1 or m == 1:
        plan = np.outer(a, b)
        return float(np.sum(plan * cost)), plan
    rows = sparse.kron(sparse.identity(n), np.ones((1, m)))
    cols = sparse.kron(np.ones((1, n)), sparse.identity(m))
    A = sparse.vstack([rows, cols]).tocsr()
    res = linprog(cost.ravel(), A_eq=A, b_eq=np.concatenate([a, b]), bounds=(0, None),
                  method="highs")
    if res.status != 0:
        raise RuntimeError(f"OT LP failed: {res.message}")
    plan = res.x.reshape(n, m)
    return float(np.sum(plan * cost)), plan


def ot_1d(x, a, y, b) -> float:
    """Squared-cost OT in one dimension via the monotone (quantile) coupling."""
    ix, iy = np.argsort(x, kind="stable"), np.argsort(y, kind="stable")
    x, a, y, b = np.asarray(x)[ix], np.asarray(a)[ix], np.asarray(y)[iy], np.asarray(b)[iy]
    ca, cb = np.cumsum(a), np.cumsum(b)
    ca[-1] = cb[-1] = 1.0
    knots = np.union1d(ca, cb)
    mass = np.diff(np.concatenate([[0.0], knots]))
    # atom index whose cumulative interval contains each knot's left piece
    i = np.minimum(np.searchsorted(ca, knots - 0.5 * mass), len(x) - 1)
    j = np.minimum(np.searchsorted(cb, knots - 0.5 * mass), len(y) - 1)
    return float(np.sum(mass * (x[i] - y[j]) ** 2))


def sq_cost(x, y) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(len(x), -1)
    y = np.asarray(y, dtype=float).reshape(len(y), -1)
    return ((x[:, None, :] - y[None, :, :]) ** 2).sum(axis=2)


def w2(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    if mu.d != nu.d:
        raise ValueError(f"dimension mismatch: {mu.d} vs {nu.d}")
    if mu.d == 1:
        v = ot_1d(mu.points[:, 0], mu.weights, nu.points[:, 0], nu.weights)
    else:
        v, _ = ot_lp(mu.weights, nu.weights, sq_cost(mu.points, nu.points))
    return float(np.sqrt(max(v, 0.0)))


# trees ------------------------------------------------------------------

@dataclass
class Node:
    value: np.ndarray
    weight: float = 1.0
    children: list = field(default_factory=list)


@dataclass
class AdaptedMeasure:
    """Tree-structured path law; ``root`` is virtual (no value)."""

    root: Node
    T: int
    d: int

    def __post_init__(self):
        total = 0.0
        for _, p in self.iter_paths():
            total += p
        if abs(total - 1.0) > TOL:
            raise ValueError(f"path probabilities sum to {total}, not 1")
        self._check(self.root, 0)

    def _check(self, node, depth):
        if depth == self.T:
            if node.children:
                raise ValueError("tree deeper than T")
            return
        if not node.children:
            raise ValueError(f"leaf at depth {depth} < T={self.T}")
        w = np.array([c.weight for c in node.children])
        if np.any(w < 0) or abs(w.sum() - 1.0) > TOL:
            raise ValueError("children weights must be nonnegative and sum to 1")
        for c in node.children:
            if np.shape(c.value) != (self.d,):
                raise ValueError("node value has wrong dimension")
            self._check(c, depth + 1)

    def iter_paths(self):
        """Yields ``(list of nodes from depth 1 to T, probability)``."""
        stack = [(self.root, [], 1.0)]
        while stack:
            node, trail, p = stack.pop()
            if not node.children:
                yield trail, p
                continue
            for c in reversed(node.children):
                stack.append((c, trail + [c], p * c.weight))

    def paths(self):
        """``(values (n, T, d), probabilities (n,))`` in depth-first order."""
        vals, probs = [], []
        for trail, p in self.iter_paths():
            vals.append(np.stack([n.value for n in trail]))
            probs.append(p)
        return np.array(vals), np.array(probs)

    def flatten(self) -> DiscreteMeasure:
        vals, probs = self.paths()
        keep = probs > 0
        w = probs[keep]
        return DiscreteMeasure(vals[keep].reshape(keep.sum(), -1), w / w.sum())

    @classmethod
    def from_paths(cls, paths, probs=None) -> "AdaptedMeasure":
        """Merges identical prefixes; ``paths`` is ``(n, T)`` or ``(n, T, d)``."""
        paths = np.asarray(paths, dtype=float)
        if paths.ndim == 2:
            paths = paths[:, :, None]
        n, T, d = paths.shape
        if n == 0:
            raise ValueError("empty path set")
        probs = np.full(n, 1.0 / n) if probs is None else np.asarray(probs, dtype=float)
        root = Node(np.zeros(0))
        mass = {id(root): 0.0}
        for path, p in zip(paths, probs):
            node = root
            mass[id(root)] += p
            for t in range(T):
                key = path[t].tobytes()
                child = next((c for c in node.children if c.value.tobytes() == key), None)
                if child is None:
                    child = Node(path[t].copy())
                    node.children.append(child)
                    mass[id(child)] = 0.0
                mass[id(child)] += p
                node = child
        _normalize(root, mass)
        return cls(root, T, d)

    def to_dict(self) -> dict:
        return {"T": self.T, "d": self.d, "root": _node_to_dict(self.root)}

    @classmethod
    def from_dict(cls, obj) -> "AdaptedMeasure":
        return cls(_node_from_dict(obj["root"]), int(obj["T"]), int(obj["d"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "AdaptedMeasure":
        return cls.from_dict(json.loads(text))


def _normalize(node, mass):
    tot = mass[id(node)]
    for c in node.children:
        c.weight = mass[id(c)] / tot if tot > 0 else 1.0 / len(node.children)
        _normalize(c, mass)


def _node_to_dict(node) -> dict:
    return {"value": node.value.tolist(), "weight": float(node.weight),
            "children": [_node_to_dict(c) for c in node.children]}


def _node_from_dict(obj) -> Node:
    return Node(np.asarray(obj.get("value", []), dtype=float), float(obj.get("weight", 1.0)),
                [_node_from_dict(c) for c in obj.get("children", [])])


# adapted W2 -------------------------------------------------------------

def _nested_value(nx: Node, ny: Node) -> float:
    cx, cy = nx.children, ny.children
    if not cx:
        return 0.0
    a = np.array([c.weight for c in cx])
    b = np.array([c.weight for c in cy])
    xs = np.stack([c.value for c in cx])
    ys = np.stack([c.value for c in cy])
    if not cx[0].children and xs.shape[1] == 1:
        return ot_1d(xs[:, 0], a, ys[:, 0], b)
    cost = sq_cost(xs, ys)
    if cx[0].children:
        cost = cost + np.array([[_nested_value(u, v) for v in cy] for u in cx])
    v, _ = ot_lp(a, b, cost)
    return v


def aw2(mu: AdaptedMeasure, nu: AdaptedMeasure) -> float:
    """Adapted Wasserstein-2 distance by backward induction over the two trees."""
    if mu.T != nu.T:
        raise ValueError(f"depth mismatch: {mu.T} vs {nu.T}")
    if mu.d != nu.d:
        raise ValueError(f"dimension mismatch: {mu.d} vs {nu.d}")
    return float(np.sqrt(max(_nested_value(mu.root, nu.root), 0.0)))


@dataclass
class Coupling:
    plan: np.ndarray
    x_paths: np.ndarray
    y_paths: np.ndarray
    p: np.ndarray
    q: np.ndarray
    bicausal: bool = True

    def marginal_error(self) -> float:
        return float(max(np.abs(self.plan.sum(1) - self.p).max(),
                         np.abs(self.plan.sum(0) - self.q).max()))


def _prefix_ids(measure: AdaptedMeasure):
    """Per path, the id of its depth-t node for t = 1..T."""
    ids = []
    for trail, _ in measure.iter_paths():
        ids.append([id(n) for n in trail])
    return np.array(ids, dtype=object)


def _causal_rows(pref_x, pref_y, p, m, transpose):
    """Rows of ``p(prefix_t(i)) pi(i, v) - p(i) pi(prefix_t(i), v) = 0``."""
    n = len(p)
    T = pref_x.shape[1]
    rows = []
    for t in range(T - 1):
        groups = {}
        for i in range(n):
            groups.setdefault(pref_x[i, t], []).append(i)
        ygroups = {}
        for j in range(m):
            ygroups.setdefault(pref_y[j, t], []).append(j)
        for members in groups.values():
            if len(members) == 1:
                continue
            pp = p[members].sum()
            for i in members:
                for ys in ygroups.values():
                    row = np.zeros((n, m))
                    row[np.ix_(members, ys)] -= p[i]
                    row[i, ys] += pp
                    rows.append(row.T.ravel() if transpose else row.ravel())
    return rows


def bicausal_lp(mu: AdaptedMeasure, nu: AdaptedMeasure):
    """Squared AW2 as one LP over path-pair weights with linear causality constraints.

    Returns ``(value, Coupling)``; ``value`` is the squared cost, to compare with
    ``aw2(mu, nu) ** 2``.
    """
    if mu.T != nu.T or mu.d != nu.d:
        raise ValueError("depth or dimension mismatch")
    X, p = mu.paths()
    Y, q = nu.paths()
    n, m = len(p), len(q)
    if n > LP_MAX_PATHS or m > LP_MAX_PATHS:
        raise ValueError(f"instance too large for the LP oracle: {n}x{m} paths, "
                         f"limit {LP_MAX_PATHS} per side")
    cost = sq_cost(X.reshape(n, -1), Y.reshape(m, -1))
    px, py = _prefix_ids(mu), _prefix_ids(nu)
    rows = [np.kron(np.eye(n), np.ones((1, m)))[i] for i in range(n)]
    rows += [np.kron(np.ones((1, n)), np.eye(m))[j] for j in range(m)]
    rhs = list(p) + list(q)
    causal = _causal_rows(px, py, p, m, transpose=False)
    causal += _causal_rows(py, px, q, n, transpose=True)
    A = np.array(rows + causal)
    rhs = np.array(rhs + [0.0] * len(causal))
    res = linprog(cost.ravel(), A_eq=A, b_eq=rhs, bounds=(0, None), method="highs")
    if res.status != 0:
        raise RuntimeError(f"bicausal LP failed: {res.message}")
    plan = res.x.reshape(n, m)
    return float(np.sum(plan * cost)), Coupling(plan, X, Y, p, q, True)


# empirical --------------------------------------------------------------

def quantize(x, delta: float) -> np.ndarray:
    """Nearest multiple of ``delta``, ties rounded half away from zero."""
    if not delta > 0:
        raise ValueError("grid size delta must be positive")
    x = np.asarray(x, dtype=float)
    # "+ 0.0" folds -0.0 into 0.0 so equal grid points share a byte key
    return np.sign(x) * np.floor(np.abs(x) / delta + 0.5) * delta + 0.0


def adapted_empirical(paths, delta: float) -> AdaptedMeasure:
    paths = np.asarray(paths, dtype=float)
    if paths.size == 0:
        raise ValueError("empty path set")
    return AdaptedMeasure.from_paths(quantize(paths, delta))
