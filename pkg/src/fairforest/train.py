"""CART-style tree and random-forest training with fairness-aware splits.

Split quality is entropy information gain w.r.t. the class label,
optionally combined with the information gain w.r.t. the sensitive
attribute (criteria ``fair_sub``, ``fair_div``, ``fair_add``); growing a
node evaluates every midpoint threshold between consecutive distinct
values of a random feature subset. Leaves predict the majority label of
their training rows, ties going to the unfavorable class 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import ConfigError, InputError
from .ingest import Dataset
from .model import Forest, Node, Tree, annotate_leaf_stats, leaf_node, split_node

CRITERIA = {
    "plain": K.CRIT_PLAIN,
    "fair_sub": K.CRIT_SUB,
    "fair_div": K.CRIT_DIV,
    "fair_add": K.CRIT_ADD,
}


@dataclass
class TrainConfig:
    n_trees: int = 20
    max_depth: int = 8
    min_samples_leaf: int = 1
    criterion: str = "plain"
    features_per_split: int | str = "sqrt"
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.max_depth < 1:
            raise ConfigError(f"max_depth must be >= 1, got {self.max_depth}")
        if self.min_samples_leaf < 1:
            raise ConfigError(
                f"min_samples_leaf must be >= 1, got {self.min_samples_leaf}")
        if self.criterion not in CRITERIA:
            raise ConfigError(
                f"unknown criterion {self.criterion!r}, have {sorted(CRITERIA)}")
        if self.features_per_split != "sqrt":
            k = self.features_per_split
            if not isinstance(k, int) or k < 1:
                raise ConfigError(
                    f"features_per_split must be 'sqrt' or a positive int, got {k!r}")

    def resolve_features_per_split(self, n_features: int) -> int:
        if self.features_per_split == "sqrt":
            return max(1, int(math.sqrt(n_features)))
        if self.features_per_split > n_features:
            raise ConfigError(
                f"features_per_split {self.features_per_split} exceeds "
                f"n_features {n_features}")
        return self.features_per_split

    def to_json(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_samples_leaf": self.min_samples_leaf,
            "criterion": self.criterion,
            "features_per_split": self.features_per_split,
            "bootstrap": self.bootstrap,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, doc: dict) -> TrainConfig:
        known = set(cls.__dataclass_fields__)
        extra = set(doc) - known
        if extra:
            raise ConfigError(f"unknown training config keys {sorted(extra)}")
        return cls(**doc)

    @classmethod
    def from_file(cls, path) -> TrainConfig:
        try:
            with open(path, "r", encoding="utf-8") as f:
                return cls.from_json(json.load(f))
        except OSError as exc:
            raise InputError(f"cannot read config file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc


def info_gain(parent_labels, left_labels, right_labels) -> float:
    """Entropy information gain of splitting ``parent`` into left/right.

    H(parent) - |L|/|P| H(L) - |R|/|P| H(R), binary Shannon entropy in
    bits with H(empty) = 0.
    """
    p = np.asarray(parent_labels)
    l = np.asarray(left_labels)
    r = np.asarray(right_labels)
    if len(l) + len(r) != len(p):
        raise InputError("left and right must partition the parent")
    pn1 = int(np.count_nonzero(p))
    ln1 = int(np.count_nonzero(l))
    rn1 = int(np.count_nonzero(r))
    return K.info_gain_counts(pn1, len(p) - pn1, ln1, len(l) - ln1,
                              rn1, len(r) - rn1)


def combined_gain(gain_class: float, gain_sensitive: float, criterion: str) -> float:
    """Fold class gain and sensitive gain into one per-criterion score."""
    if criterion not in CRITERIA:
        raise ConfigError(
            f"unknown criterion {criterion!r}, have {sorted(CRITERIA)}")
    return K.combine_gains(gain_class, gain_sensitive, CRITERIA[criterion])


def _best_split(X, y, s, idx, features, min_leaf, crit_code):
    """Best (feature, threshold) over ``features`` for the rows ``idx``.

    Features are scanned in ascending index order and thresholds in
    ascending value order; the first strictly-best candidate wins, which
    makes tie-breaking deterministic.
    """
    y_node = y[idx]
    s_node = s[idx]
    best = None  # (combined, feature, threshold, gain_y, gain_s)
    for f in features:
        col = X[idx, f]
        order = np.argsort(col, kind="stable")
        found, comb, gy, gs, thr = K.scan_split(
            np.ascontiguousarray(col[order]),
            np.ascontiguousarray(y_node[order]),
            np.ascontiguousarray(s_node[order]),
            min_leaf, crit_code)
        if found and (best is None or comb > best[0]):
            best = (comb, int(f), thr, gy, gs)
    return best


def grow_tree(data: Dataset, config: TrainConfig, rng: np.random.Generator,
              tree_id: int = 0) -> Tree:
    """Grow one tree on ``data`` (already resampled, if bootstrapping)."""
    if len(data) == 0:
        raise InputError("cannot grow a tree on an empty dataset")
    X, y, s = data.X, data.y, data.s
    n_features = data.n_features
    k = config.resolve_features_per_split(n_features)
    crit_code = CRITERIA[config.criterion]
    min_leaf = config.min_samples_leaf
    nodes: list[Node] = []

    def build(idx, depth):
        i = len(nodes)
        nodes.append(None)  # reserve the id; filled below
        n1 = int(np.count_nonzero(y[idx]))
        n0 = len(idx) - n1
        best = None
        if depth < config.max_depth and 0 < n1 < len(idx) and len(idx) >= 2 * min_leaf:
            features = np.sort(rng.permutation(n_features)[:k])
            best = _best_split(X, y, s, idx, features, min_leaf, crit_code)
            if best is not None and best[0] <= 0.0:
                best = None
        if best is None:
            nodes[i] = leaf_node(i, 1 if n1 > n0 else 0)
            return i
        _, f, thr, _, _ = best
        mask = X[idx, f] <= thr
        left = build(idx[mask], depth + 1)
        right = build(idx[~mask], depth + 1)
        nodes[i] = split_node(i, f, thr, left, right)
        return i

    build(np.arange(len(data)), 0)
    return Tree(tree_id, nodes, root=0)


def train_forest(train: Dataset, config: TrainConfig) -> Forest:
    """Train a forest and annotate leaf stats against the full train set.

    Each tree draws its bootstrap resample and feature subsets from its
    own child stream of ``config.seed``, so results are reproducible and
    independent of evaluation order.
    """
    streams = np.random.SeedSequence(config.seed).spawn(config.n_trees)
    n = len(train)
    trees = []
    for t in range(config.n_trees):
        rng = np.random.default_rng(streams[t])
        if config.bootstrap:
            view = train.subset(rng.integers(0, n, size=n))
        else:
            view = train
        trees.append(grow_tree(view, config, rng, tree_id=t))
    forest = Forest(
        trees,
        n_features=train.n_features,
        feature_names=train.feature_names,
        sensitive_feature=train.sensitive_name,
        metadata={"training": config.to_json()},
    )
    return annotate_leaf_stats(forest, train)
