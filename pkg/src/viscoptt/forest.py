"""CART regression trees and a bootstrap Random Forest."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import TargetOutOfRange, TooFewSamples

FEATURES = ("inv_ptt", "v_visco", "hr", "amp")
BASELINE_FEATURES = ("inv_ptt", "hr", "amp")
TARGET_RANGE = (30.0, 250.0)


class Target(str, enum.Enum):
    SBP = "SBP"
    DBP = "DBP"


@dataclass(frozen=True)
class ForestHyperparams:
    n_trees: int = 100
    max_depth: int = 15
    min_samples_leaf: int = 2
    mtry: int = 2
    rng_seed: int = 0
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_trees < 1 or self.max_depth < 1 or self.min_samples_leaf < 1:
            raise ValueError("n_trees, max_depth and min_samples_leaf must be >= 1")
        if not 1 <= self.mtry <= 4:
            raise ValueError("mtry must lie in [1, 4]")


@dataclass(frozen=True, eq=False)
class Tree:
    """Flat pre-order tree. ``feature[i] == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def depth(self) -> int:
        d = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                d[self.left[i]] = d[self.right[i]] = d[i] + 1
        return int(d.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of X."""
        node = np.zeros(X.shape[0], dtype=np.intp)
        rows = np.arange(X.shape[0])
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return node
            r, n = rows[inner], node[inner]
            go_left = X[r, f[inner]] <= self.threshold[n]
            node[inner] = np.where(go_left, self.left[n], self.right[n])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]


@dataclass(frozen=True, eq=False)
class ForestModel:
    trees: list
    hyperparams: ForestHyperparams
    target: Target
    train_count: int
    feature_names: tuple = FEATURES
    importance_raw: np.ndarray = None  # summed SSE reduction per feature

    @property
    def n_features(self) -> int:
        return len(self.feature_names)


class _Builder:
    def __init__(self, X, y, hp: ForestHyperparams, rng: np.random.Generator):
        self.X, self.y, self.hp, self.rng = X, y, hp, rng
        self.p = X.shape[1]
        self.feature, self.threshold, self.left, self.right, self.value = [], [], [], [], []
        self.gain = np.zeros(self.p)

    def _leaf(self, value):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)

    def _best_split(self, idx):
        y = self.y[idx]
        y = y - y.mean()  # centring keeps the cumulative sums well conditioned
        n = y.size
        leaf = self.hp.min_samples_leaf
        sse = float(np.dot(y, y))
        best = (0.0, -1, 0.0, None, None)
        feats = np.sort(np.argsort(self.rng.random(self.p))[: self.hp.mtry])
        sizes = np.arange(leaf, n - leaf + 1)  # left-child sizes allowed
        if sizes.size == 0:
            return best
        for f in feats:
            xs = self.X[idx, f]
            order = np.argsort(xs, kind="stable")
            xs, ys = xs[order], y[order]
            valid = xs[sizes - 1] < xs[sizes]
            if not valid.any():
                continue
            c1 = np.cumsum(ys)
            c2 = np.cumsum(ys * ys)
            nl = sizes.astype(float)
            nr = n - nl
            s1l, s2l = c1[sizes - 1], c2[sizes - 1]
            s1r, s2r = c1[-1] - s1l, c2[-1] - s2l
            child = (s2l - s1l * s1l / nl) + (s2r - s1r * s1r / nr)
            gain = np.where(valid, sse - child, -np.inf)
            k = int(np.argmax(gain))
            if gain[k] > best[0]:
                thr = 0.5 * (xs[sizes[k] - 1] + xs[sizes[k]])
                best = (float(gain[k]), int(f), thr, idx[order[: sizes[k]]], idx[order[sizes[k]:]])
        return best

    def grow(self, idx, depth):
        y = self.y[idx]
        node = len(self.feature)
        value = float(np.mean(y))
        if depth >= self.hp.max_depth or y.size < 2 * self.hp.min_samples_leaf or np.ptp(y) == 0:
            self._leaf(value)
            return
        gain, f, thr, *children = self._best_split(idx)
        # guard against splits that only shuffle rounding error
        if f < 0 or gain <= 1e-12 * float(np.dot(y - value, y - value)):
            self._leaf(value)
            return
        self.gain[f] += gain
        self.feature.append(f)
        self.threshold.append(thr)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        self.left[node] = len(self.feature)
        self.grow(children[0], depth + 1)
        self.right[node] = len(self.feature)
        self.grow(children[1], depth + 1)

    def tree(self) -> Tree:
        return Tree(
            np.array(self.feature, dtype=np.int64),
            np.array(self.threshold, dtype=np.float64),
            np.array(self.left, dtype=np.int64),
            np.array(self.right, dtype=np.int64),
            np.array(self.value, dtype=np.float64),
        )


def fit_tree(X, y, hp: ForestHyperparams, seed: int):
    """One tree on a bootstrap resample drawn from ``seed``; returns (tree, gains)."""
    rng = np.random.default_rng(seed)
    n = y.size
    idx = rng.integers(0, n, size=n) if hp.bootstrap else np.arange(n)
    b = _Builder(X, y, hp, rng)
    b.grow(np.sort(idx), 0)
    return b.tree(), b.gain


def fit_forest(X, y, hp: ForestHyperparams = ForestHyperparams(), target=Target.SBP,
               feature_names=FEATURES) -> ForestModel:
    """Random Forest minimizing squared error; tree t uses seed rng_seed + t."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError("X must be (n_samples, n_features) matching y")
    if y.size < 2 * hp.min_samples_leaf:
        raise TooFewSamples(f"{y.size} samples, need >= {2 * hp.min_samples_leaf}")
    if X.shape[1] != len(feature_names) or hp.mtry > X.shape[1]:
        raise ValueError("feature count does not match feature_names or mtry")
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    if np.any(y < TARGET_RANGE[0]) or np.any(y > TARGET_RANGE[1]) or not np.all(np.isfinite(y)):
        raise TargetOutOfRange(f"targets must lie in {TARGET_RANGE} mmHg")
    trees = []
    gains = np.zeros(X.shape[1])
    for t in range(hp.n_trees):
        tree, g = fit_tree(X, y, hp, hp.rng_seed + t)
        trees.append(tree)
        gains += g
    return ForestModel(trees, hp, Target(target), int(y.size), tuple(feature_names), gains)


def predict(model: ForestModel, X) -> np.ndarray:
    """Mean of per-tree leaf values; accepts one row or a matrix."""
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    total = np.zeros(X.shape[0])
    for tree in model.trees:
        total += tree.predict(X)
    out = total / len(model.trees)
    return float(out[0]) if single else out


def feature_importance(model: ForestModel) -> np.ndarray:
    """Share of total SSE reduction attributed to each feature (zeros if no splits)."""
    raw = np.asarray(model.importance_raw, dtype=np.float64)
    total = raw.sum()
    return raw / total if total > 0 else np.zeros_like(raw)
