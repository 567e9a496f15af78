"""Isolation Forest written from scratch.

Each tree is stored as flat arrays (feature, split value, children, leaf size)
so scoring walks all rows through a tree at once. Tree ``i`` draws from its own
generator seeded by ``(base_seed, i)``, which makes the forest independent of
construction order or thread count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numkit import ShapeError, as_matrix

EULER_GAMMA = 0.5772156649


def c_factor(n: int) -> float:
    """Average path length of an unsuccessful BST search over ``n`` points."""
    if n <= 1:
        return 0.0
    if n == 2:
        return 1.0
    return 2.0 * (math.log(n - 1) + EULER_GAMMA) - 2.0 * (n - 1) / n


@dataclass
class ITree:
    feature: np.ndarray  # int, -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    size: np.ndarray  # rows reaching the node
    height_limit: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depths(self) -> np.ndarray:
        d = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):  # children always have larger indices
            if self.feature[i] >= 0:
                d[self.left[i]] = d[self.right[i]] = d[i] + 1
        return d

    def path_lengths(self, x: np.ndarray) -> np.ndarray:
        node = np.zeros(len(x), dtype=int)
        depth = np.zeros(len(x))
        active = self.feature[node] >= 0
        while active.any():
            idx = np.nonzero(active)[0]
            cur = node[idx]
            go_left = x[idx, self.feature[cur]] < self.threshold[cur]
            node[idx] = np.where(go_left, self.left[cur], self.right[cur])
            depth[idx] += 1
            active[idx] = self.feature[node[idx]] >= 0
        return depth + _leaf_adjust(self.size[node])


_C_CACHE: dict[int, float] = {}


def _leaf_adjust(sizes: np.ndarray) -> np.ndarray:
    out = np.empty(len(sizes))
    for i, s in enumerate(sizes):
        s = int(s)
        if s not in _C_CACHE:
            _C_CACHE[s] = c_factor(s)
        out[i] = _C_CACHE[s]
    return out


def build_tree(x: np.ndarray, height_limit: int, rng: np.random.Generator) -> ITree:
    feature, threshold, left, right, size = [], [], [], [], []

    def new_node(n):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        size.append(n)
        return len(feature) - 1

    root = new_node(len(x))
    stack = [(root, np.arange(len(x)), 0)]
    while stack:
        node, rows, depth = stack.pop()
        if depth >= height_limit or len(rows) <= 1:
            continue
        sub = x[rows]
        lo, hi = sub.min(axis=0), sub.max(axis=0)
        candidates = np.nonzero(hi > lo)[0]
        if len(candidates) == 0:
            continue
        f = int(candidates[rng.integers(len(candidates))])
        v = rng.uniform(lo[f], hi[f])
        if np.nextafter(lo[f], hi[f]) == hi[f]:
            v = hi[f]  # adjacent floats: nothing lies strictly between, hi still separates
        # open interval: uniform() may return the lower endpoint
        while not lo[f] < v < hi[f] and v != hi[f]:
            v = rng.uniform(lo[f], hi[f])
        mask = sub[:, f] < v
        feature[node], threshold[node] = f, v
        l, r = new_node(int(mask.sum())), new_node(int((~mask).sum()))
        left[node], right[node] = l, r
        stack.append((r, rows[~mask], depth + 1))
        stack.append((l, rows[mask], depth + 1))
    return ITree(
        np.array(feature, dtype=int),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=int),
        np.array(right, dtype=int),
        np.array(size, dtype=int),
        height_limit,
    )


@dataclass
class IsolationForest:
    trees: list[ITree]
    psi: int
    n_features: int
    seed: int

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def c_norm(self) -> float:
        return c_factor(self.psi)

    def expected_path_length(self, x) -> np.ndarray:
        x = as_matrix(x, "x")
        if x.shape[1] != self.n_features:
            raise ShapeError(f"forest was fit on {self.n_features} features, got {x.shape[1]}")
        return np.mean([t.path_lengths(x) for t in self.trees], axis=0)

    def score_samples(self, x) -> np.ndarray:
        return 2.0 ** (-self.expected_path_length(x) / self.c_norm)


def fit_forest(x, n_trees: int = 100, psi: int | None = None, rng: np.random.Generator | int = 0) -> IsolationForest:
    """``n_trees`` trees, each on a ``psi``-row subsample drawn without replacement."""
    x = as_matrix(x, "x")
    n = len(x)
    if n < 2:
        raise ShapeError(f"need at least 2 rows to fit a forest, got {n}")
    psi = min(256, n) if psi is None else int(psi)
    if not 2 <= psi <= n:
        raise ValueError(f"psi must lie in [2, {n}], got {psi}")
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    if isinstance(rng, np.random.Generator):
        base = int(rng.integers(2**63))
    else:
        base = int(rng)
    limit = math.ceil(math.log2(psi))
    trees = []
    for i in range(n_trees):
        tree_rng = np.random.default_rng([base, i])
        rows = tree_rng.choice(n, size=psi, replace=False)
        trees.append(build_tree(x[rows], limit, tree_rng))
    return IsolationForest(trees, psi, x.shape[1], base)


def score(f: IsolationForest, x) -> np.ndarray | float:
    """Anomaly score in (0, 1); higher is more anomalous. A 1-D row gives a float."""
    single = np.ndim(x) == 1
    s = f.score_samples(x)
    return float(s[0]) if single else s


# ---------------------------------------------------------------------------
# serialisation


def forest_to_dict(f: IsolationForest) -> dict:
    return {
        "psi": f.psi,
        "n_features": f.n_features,
        "seed": f.seed,
        "trees": [
            {
                "feature": t.feature.tolist(),
                "threshold": t.threshold.tolist(),
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "size": t.size.tolist(),
                "height_limit": t.height_limit,
            }
            for t in f.trees
        ],
    }


def forest_from_dict(d: dict) -> IsolationForest:
    trees = [
        ITree(
            np.array(t["feature"], dtype=int),
            np.array(t["threshold"], dtype=np.float64),
            np.array(t["left"], dtype=int),
            np.array(t["right"], dtype=int),
            np.array(t["size"], dtype=int),
            int(t["height_limit"]),
        )
        for t in d["trees"]
    ]
    return IsolationForest(trees, int(d["psi"]), int(d["n_features"]), int(d["seed"]))
