"""
CART decision trees with Gini splits, bagged into a random forest.

Trees are stored as flat node arrays. A node with ``feature == -1`` is a
leaf; otherwise samples with ``x[feature] <= threshold`` go to ``left``.
Each node keeps the class histogram of the training samples that reached it.

Randomness: tree ``t`` of a forest trained with ``seed`` draws from
``PCG64(SeedSequence([seed, t]))``, so every tree's stream is fixed
regardless of how many threads build the forest.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numba
import numpy as np

from floodscope.classify.dataset import LabeledDataset
from floodscope.errors import EmptyDataset, SingleSample

# two candidate scores closer than this (relative) count as a tie
SCORE_TIE_TOLERANCE = 1e-10


@dataclass(frozen=True, eq=False)
class DecisionTree:
    feature: np.ndarray    # int32, -1 marks a leaf
    threshold: np.ndarray  # float64
    left: np.ndarray       # int32 child index, -1 for leaves
    right: np.ndarray      # int32
    histogram: np.ndarray  # int64 (n_nodes, n_classes)

    def __post_init__(self):
        for name, dtype in (
            ("feature", np.int32),
            ("threshold", np.float64),
            ("left", np.int32),
            ("right", np.int32),
            ("histogram", np.int64),
        ):
            arr = np.array(getattr(self, name), dtype=dtype, copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for node in range(self.n_nodes):
            if self.feature[node] >= 0:
                depth[self.left[node]] = depth[node] + 1
                depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def leaf_classes(self) -> np.ndarray:
        return np.argmax(self.histogram, axis=1).astype(np.int32)


@dataclass(frozen=True, eq=False)
class ForestModel:
    trees: tuple
    n_features_per_split: int
    seed: int
    class_names: tuple
    feature_names: tuple
    max_depth: int = 16
    min_leaf: int = 1

    kind = "forest"

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def _flat(self):
        cached = self.__dict__.get("_flat_cache")
        if cached is None:
            offsets = np.cumsum([0] + [t.n_nodes for t in self.trees])
            shift = lambda a, off: np.where(a >= 0, a + off, -1)  # noqa: E731
            cached = (
                np.concatenate([t.feature for t in self.trees]).astype(np.int64),
                np.concatenate([t.threshold for t in self.trees]),
                np.concatenate([shift(t.left, o) for t, o in zip(self.trees, offsets)]).astype(np.int64),
                np.concatenate([shift(t.right, o) for t, o in zip(self.trees, offsets)]).astype(np.int64),
                np.concatenate([t.leaf_classes() for t in self.trees]).astype(np.int64),
                offsets[:-1].astype(np.int64),
            )
            object.__setattr__(self, "_flat_cache", cached)
        return cached

    def votes(self, X: np.ndarray) -> np.ndarray:
        feature, threshold, left, right, leaf_class, roots = self._flat()
        return _forest_votes(
            np.ascontiguousarray(X, dtype=np.float32),
            feature, threshold, left, right, leaf_class, roots, self.n_classes,
        )

    def predict(self, X: np.ndarray) -> np.ndarray:
        # argmax picks the first maximum: vote ties go to the lowest class index
        return np.argmax(self.votes(X), axis=1).astype(np.int64)


@numba.njit(cache=True, nogil=True)
def _forest_votes(X, feature, threshold, left, right, leaf_class, roots, n_classes):
    m = X.shape[0]
    votes = np.zeros((m, n_classes), dtype=np.int32)
    for i in range(m):
        for t in range(roots.shape[0]):
            node = roots[t]
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            votes[i, leaf_class[node]] += 1
    return votes


def split_scores(x: np.ndarray, y: np.ndarray, n_classes: int, min_leaf: int = 1):
    """
    All admissible thresholds on one feature and their scores.

    The score of a split is ``sum_k L_k**2 / n_L + sum_k R_k**2 / n_R`` over
    class counts in the two children; maximizing it minimizes the weighted
    Gini impurity of the children. Thresholds are midpoints between
    consecutive distinct sorted values, in ascending order.
    """
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    n = len(xs)
    cumulative = np.cumsum(np.eye(n_classes, dtype=np.int64)[ys], axis=0)
    n_left = np.arange(1, n + 1)
    ok = np.zeros(n, dtype=bool)
    ok[:-1] = xs[:-1] < xs[1:]
    ok &= (n_left >= min_leaf) & (n - n_left >= min_leaf)
    pos = np.flatnonzero(ok)
    if len(pos) == 0:
        return np.empty(0), np.empty(0)
    L = cumulative[pos].astype(np.float64)
    R = cumulative[-1].astype(np.float64) - L
    nl = n_left[pos].astype(np.float64)
    score = (L * L).sum(axis=1) / nl + (R * R).sum(axis=1) / (n - nl)
    thresholds = (xs[pos] + xs[pos + 1]) / 2.0
    return thresholds, score


def best_split(
    X: np.ndarray, y: np.ndarray, n_classes: int, features: Sequence[int], min_leaf: int = 1
) -> Optional[tuple[int, float, float]]:
    """
    Best (feature, threshold, score) over the given features, or None when no
    feature admits a split. Ties go to the lowest feature index, then the
    lowest threshold.
    """
    best = None
    for f in sorted(features):
        thresholds, scores = split_scores(X[:, f], y, n_classes, min_leaf)
        if len(scores) == 0:
            continue
        top = scores.max()
        k = int(np.flatnonzero(scores >= top - SCORE_TIE_TOLERANCE * max(1.0, top))[0])
        if best is None or scores[k] > best[2] + SCORE_TIE_TOLERANCE * max(1.0, best[2]):
            best = (int(f), float(thresholds[k]), float(scores[k]))
    return best


def fit_tree(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    rng: np.random.Generator,
    max_depth: int = 16,
    min_leaf: int = 1,
    n_features_per_split: Optional[int] = None,
) -> DecisionTree:
    """
    Grow one CART tree depth-first. At each node the features are visited in
    a random order until ``n_features_per_split`` of them that vary within the
    node have been scored; growth stops at max_depth, purity, or when no split
    leaves ``min_leaf`` samples on both sides.
    """
    n, d = X.shape
    k = d if n_features_per_split is None else max(1, min(d, n_features_per_split))
    feature, threshold, left, right, histogram = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        histogram.append(np.bincount(y[idx], minlength=n_classes))
        return len(feature) - 1

    root = new_node(np.arange(n))
    stack = [(root, np.arange(n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        counts = histogram[node]
        if depth >= max_depth or np.count_nonzero(counts) <= 1 or len(idx) < 2 * min_leaf:
            continue
        Xn, yn = X[idx], y[idx]
        chosen, scored = [], 0
        for f in rng.permutation(d):
            chosen.append(int(f))
            if Xn[:, f].min() < Xn[:, f].max():
                scored += 1
            if scored >= k:
                break
        split = best_split(Xn, yn, n_classes, chosen, min_leaf)
        if split is None:
            continue
        f, thr, _ = split
        go_left = Xn[:, f] <= thr
        feature[node], threshold[node] = f, thr
        left_id = new_node(idx[go_left])
        right_id = new_node(idx[~go_left])
        left[node], right[node] = left_id, right_id
        # push right first so the left subtree is numbered first
        stack.append((right_id, idx[~go_left], depth + 1))
        stack.append((left_id, idx[go_left], depth + 1))
    return DecisionTree(feature, threshold, left, right, np.array(histogram))


def tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, tree_index])))


def train_random_forest(
    ds: LabeledDataset,
    n_trees: int = 100,
    max_depth: int = 16,
    min_leaf: int = 1,
    seed: int = 0,
    n_features_per_split: Optional[int] = None,
    n_jobs: int = 1,
) -> ForestModel:
    if ds.n_samples == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    if ds.n_samples < 2 and ds.n_classes >= 2:
        raise SingleSample("need at least two samples to train a multi-class forest")
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    if max_depth < 0 or min_leaf < 1:
        raise ValueError("max_depth must be >= 0 and min_leaf >= 1")
    if seed < 0:
        raise ValueError("seed must be non-negative")
    k = n_features_per_split or math.ceil(math.sqrt(ds.n_features))
    X, y, n = ds.features, ds.labels, ds.n_samples

    def grow(t):
        rng = tree_rng(seed, t)
        boot = rng.integers(0, n, size=n)
        return fit_tree(X[boot], y[boot], ds.n_classes, rng, max_depth, min_leaf, k)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = tuple(pool.map(grow, range(n_trees)))
    else:
        trees = tuple(grow(t) for t in range(n_trees))
    return ForestModel(trees, k, seed, ds.class_names, ds.feature_names, max_depth, min_leaf)
