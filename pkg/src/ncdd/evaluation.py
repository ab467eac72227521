"""Classification of similarity matrices: upper-triangle features, a seeded
CART random forest, exact pairwise AUC and the chronological split."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (
    AsymmetryError,
    ConfigError,
    DimensionMismatch,
    GraphSignalSample,
    SimilarityMatrix,
    SingleClassError,
    derive_seeds,
    make_rng,
)


def vectorize_upper(s: SimilarityMatrix | np.ndarray) -> np.ndarray:
    """Strict upper triangle, row-major over u < v."""
    v = s.values if isinstance(s, SimilarityMatrix) else np.asarray(s, dtype=np.float64)
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got {v.shape}")
    if np.max(np.abs(v - v.T), initial=0.0) > 1e-9:
        raise AsymmetryError("similarity matrix is not symmetric")
    return v[np.triu_indices(v.shape[0], k=1)]


def symmetric_from_upper(vec: np.ndarray, n: int) -> np.ndarray:
    m = np.zeros((n, n))
    iu = np.triu_indices(n, k=1)
    m[iu] = vec
    return m + m.T


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    label: int


@dataclass(frozen=True)
class ForestConfig:
    """``n_trees`` defaults to 1000; the rest are plain CART defaults."""

    n_trees: int = 1000
    max_depth: Optional[int] = None
    features_per_split: Optional[int] = None  # None -> floor(sqrt(M))
    min_leaf: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError("n_trees must be at least 1")
        if self.min_leaf < 1:
            raise ConfigError("min_leaf must be at least 1")


def _best_split(X, y, idx, features, min_leaf):
    """Return (gain, feature, threshold) of the best Gini split, or None."""
    n = idx.size
    pos = y[idx].sum()
    parent = 1.0 - (pos / n) ** 2 - (1 - pos / n) ** 2
    sub = X[np.ix_(idx, features)]
    order = np.argsort(sub, axis=0, kind="stable")
    xs = np.take_along_axis(sub, order, axis=0)
    ys = y[idx][order]
    left_pos = np.cumsum(ys, axis=0)[:-1]
    n_left = np.arange(1, n)[:, None].astype(np.float64)
    n_right = n - n_left
    right_pos = pos - left_pos
    gl = 1.0 - (left_pos / n_left) ** 2 - (1 - left_pos / n_left) ** 2
    gr = 1.0 - (right_pos / n_right) ** 2 - (1 - right_pos / n_right) ** 2
    impurity = (n_left * gl + n_right * gr) / n
    valid = (xs[1:] > xs[:-1]) & (n_left >= min_leaf) & (n_right >= min_leaf)
    if not valid.any():
        return None
    impurity = np.where(valid, impurity, np.inf)
    r, c = np.unravel_index(np.argmin(impurity), impurity.shape)
    gain = parent - impurity[r, c]
    if gain <= 1e-12:
        return None
    return gain, int(features[c]), 0.5 * (xs[r, c] + xs[r + 1, c])


class DecisionTree:
    """Binary CART tree with Gini splits over random feature subsets."""

    def __init__(self, features_per_split: int, max_depth=None, min_leaf: int = 1):
        self.features_per_split = features_per_split
        self.max_depth = max_depth
        self.min_leaf = min_leaf

    def fit(self, X: np.ndarray, y: np.ndarray, rng: np.random.Generator) -> "DecisionTree":
        feature, threshold, left, right, vote = [], [], [], [], []

        def new_node():
            for lst, val in ((feature, -1), (threshold, 0.0), (left, -1), (right, -1), (vote, 0)):
                lst.append(val)
            return len(feature) - 1

        root = new_node()
        stack = [(root, np.arange(len(y)), 0)]
        n_feat = X.shape[1]
        k = min(self.features_per_split, n_feat)
        while stack:
            node, idx, depth = stack.pop()
            frac = y[idx].mean()
            vote[node] = int(frac > 0.5)
            if frac in (0.0, 1.0) or idx.size < 2 * self.min_leaf:
                continue
            if self.max_depth is not None and depth >= self.max_depth:
                continue
            cand = rng.choice(n_feat, size=k, replace=False)
            split = _best_split(X, y, idx, cand, self.min_leaf)
            if split is None:
                continue
            _, f, thr = split
            mask = X[idx, f] <= thr
            feature[node], threshold[node] = f, thr
            l, r = new_node(), new_node()
            left[node], right[node] = l, r
            stack.append((r, idx[~mask], depth + 1))
            stack.append((l, idx[mask], depth + 1))
        self.feature = np.array(feature)
        self.threshold = np.array(threshold)
        self.left = np.array(left)
        self.right = np.array(right)
        self.vote = np.array(vote)
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            rows = np.flatnonzero(active)
            nd = node[rows]
            go_left = X[rows, self.feature[nd]] <= self.threshold[nd]
            node[rows] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return self.vote[node]

    def used_features(self) -> set:
        return set(int(f) for f in self.feature if f >= 0)


@dataclass
class Forest:
    config: ForestConfig
    n_features: int
    trees: list = field(default_factory=list)

    def tree_votes(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        return np.stack([t.predict(X) for t in self.trees])

    def scores(self, X: np.ndarray) -> np.ndarray:
        return self.tree_votes(X).mean(axis=0)


def _as_xy(features):
    if isinstance(features, tuple):
        X, y = features
    else:
        X = np.stack([f.values for f in features])
        y = np.array([f.label for f in features])
    return np.asarray(X, dtype=np.float64), np.asarray(y, dtype=np.int64)


def forest_train(features: Sequence[FeatureVector] | tuple, config: ForestConfig = ForestConfig()) -> Forest:
    """Each tree sees a bootstrap resample drawn from its own derived seed."""
    X, y = _as_xy(features)
    if len(np.unique(y)) < 2:
        raise SingleClassError("random forest training needs both classes")
    m = X.shape[1]
    k = config.features_per_split or max(1, math.isqrt(m))
    forest = Forest(config, m)
    for seed in derive_seeds(config.seed, config.n_trees):
        rng = make_rng(seed)
        boot = rng.integers(0, len(y), size=len(y))
        tree = DecisionTree(k, config.max_depth, config.min_leaf)
        forest.trees.append(tree.fit(X[boot], y[boot], rng))
    return forest


def forest_score(forest: Forest, feature_vector) -> float:
    v = feature_vector.values if isinstance(feature_vector, FeatureVector) else feature_vector
    return float(forest.scores(np.asarray(v)[None, :])[0])


def _midranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    _, start, counts = np.unique(xs, return_index=True, return_counts=True)
    avg = start + (counts + 1) / 2.0
    ranks = np.empty(x.size)
    ranks[order] = np.repeat(avg, counts)
    return ranks


def auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Probability that a positive outscores a negative, ties counted 1/2."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape:
        raise DimensionMismatch("scores and labels differ in length")
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("AUC needs at least one sample of each class")
    r = _midranks(s)
    u = r[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _time_key(s: GraphSignalSample):
    return (s.timestamp if s.timestamp is not None else s.sample_index, s.sample_index)


def chronological_split(samples: Sequence[GraphSignalSample]):
    """Per class: earliest ceil(n/2) samples train, the rest test."""
    train, test = [], []
    for label in sorted({s.label for s in samples}):
        cls = sorted((s for s in samples if s.label == label), key=_time_key)
        cut = math.ceil(len(cls) / 2)
        train += cls[:cut]
        test += cls[cut:]
    return sorted(train, key=_time_key), sorted(test, key=_time_key)


def subsample_majority(samples: Sequence[GraphSignalSample], ratio: float, seed: int):
    """Keep every class-1 sample and at most ratio x (class-1 count) class-0 samples."""
    if ratio <= 0:
        raise ConfigError("ratio must be positive")
    zeros = [i for i, s in enumerate(samples) if s.label == 0]
    n_ones = sum(1 for s in samples if s.label == 1)
    cap = int(math.floor(ratio * n_ones))
    if len(zeros) <= cap:
        return list(samples)
    keep_zero = set(np.array(zeros)[make_rng(seed).choice(len(zeros), size=cap, replace=False)].tolist())
    return [s for i, s in enumerate(samples) if s.label != 0 or i in keep_zero]
