"""Decision trees, forests, prediction routing and the portable JSON format.

Trees live in id-indexed flat arrays (node id == array position) so the
routing loops can run in the compiled kernel and the serialized layout
stays language-neutral. Split tests are total over the reals: an instance
goes left iff ``instance[feature] <= threshold``, else right.

Trees and forests are treated as immutable values; code that needs to
change leaf predictions works on a :meth:`Forest.copy` it owns exclusively.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import ConfigError, ForestFormatError, InputError

FORMAT_VERSION = 1

SPLIT = "split"
LEAF = "leaf"

_KIND_SPLIT = K.SPLIT
_KIND_LEAF = K.LEAF


@dataclass
class LeafStats:
    """Counts of repair-set instances routed to one leaf."""

    n_y1: int = 0
    n_y0: int = 0
    n_s1: int = 0
    n_s0: int = 0

    @property
    def total(self) -> int:
        return self.n_y1 + self.n_y0


@dataclass
class Node:
    """One tree node; split fields or leaf fields apply, per ``kind``."""

    id: int
    kind: str
    feature: int = -1
    threshold: float = 0.0
    left: int = -1
    right: int = -1
    pred: int = 0
    flipped: bool = False
    counts: LeafStats = field(default_factory=LeafStats)


def split_node(id, feature, threshold, left, right) -> Node:
    return Node(id=id, kind=SPLIT, feature=feature, threshold=threshold,
                left=left, right=right)


def leaf_node(id, pred, flipped=False, counts=None) -> Node:
    return Node(id=id, kind=LEAF, pred=pred, flipped=flipped,
                counts=counts or LeafStats())


class Tree:
    """Binary decision tree over id-indexed flat node arrays.

    Construction validates the structure: ids must be exactly ``0..n-1``,
    child references must resolve, and the node graph must be a proper
    binary tree (the root has no parent, every other node exactly one).
    """

    def __init__(self, id: int, nodes: list[Node], root: int, flipped: bool = False):
        self.id = int(id)
        self.flipped = bool(flipped)
        self.root = int(root)

        n = len(nodes)
        if n == 0:
            raise ForestFormatError(f"tree {id}: has no nodes")
        self.kind = np.zeros(n, dtype=np.uint8)
        self.feature = np.full(n, -1, dtype=np.int32)
        self.threshold = np.zeros(n, dtype=np.float64)
        self.left = np.full(n, -1, dtype=np.int32)
        self.right = np.full(n, -1, dtype=np.int32)
        self.pred = np.zeros(n, dtype=np.uint8)
        self.leaf_flipped = np.zeros(n, dtype=bool)
        self.counts = np.zeros((n, 4), dtype=np.int64)  # columns y1, y0, s1, s0

        seen = np.zeros(n, dtype=bool)
        for node in nodes:
            i = node.id
            if not 0 <= i < n:
                raise ForestFormatError(
                    f"tree {id}: node id {i} outside 0..{n - 1} (ids must be dense)")
            if seen[i]:
                raise ForestFormatError(f"tree {id}: duplicate node id {i}")
            seen[i] = True
            if node.kind == SPLIT:
                if not (0 <= node.left < n) or not (0 <= node.right < n):
                    raise ForestFormatError(
                        f"tree {id}: node {i} has dangling child id "
                        f"({node.left}, {node.right})")
                if node.left == node.right:
                    raise ForestFormatError(f"tree {id}: node {i} repeats a child id")
                if node.feature < 0:
                    raise ForestFormatError(f"tree {id}: node {i} has negative feature")
                self.kind[i] = _KIND_SPLIT
                self.feature[i] = node.feature
                self.threshold[i] = node.threshold
                self.left[i] = node.left
                self.right[i] = node.right
            elif node.kind == LEAF:
                if node.pred not in (0, 1):
                    raise ForestFormatError(
                        f"tree {id}: node {i} has prediction {node.pred}, expected 0 or 1")
                c = node.counts
                if min(c.n_y1, c.n_y0, c.n_s1, c.n_s0) < 0:
                    raise ForestFormatError(f"tree {id}: node {i} has negative counts")
                self.kind[i] = _KIND_LEAF
                self.pred[i] = node.pred
                self.leaf_flipped[i] = node.flipped
                self.counts[i] = (c.n_y1, c.n_y0, c.n_s1, c.n_s0)
            else:
                raise ForestFormatError(
                    f"tree {id}: node {i} has unknown kind {node.kind!r}")

        if not 0 <= self.root < n:
            raise ForestFormatError(f"tree {id}: root {root} is not a node id")
        parents = np.zeros(n, dtype=np.int64)
        for i in np.nonzero(self.kind == _KIND_SPLIT)[0]:
            parents[self.left[i]] += 1
            parents[self.right[i]] += 1
        if parents[self.root] != 0:
            raise ForestFormatError(f"tree {id}: root {self.root} has a parent")
        bad = np.nonzero((parents != 1) & (np.arange(n) != self.root))[0]
        if bad.size:
            raise ForestFormatError(
                f"tree {id}: node {bad[0]} has {parents[bad[0]]} parents, expected 1")

    @property
    def n_nodes(self) -> int:
        return len(self.kind)

    def leaf_ids(self) -> np.ndarray:
        return np.nonzero(self.kind == _KIND_LEAF)[0]

    def max_feature(self) -> int:
        splits = self.feature[self.kind == _KIND_SPLIT]
        return int(splits.max()) if splits.size else -1

    def depth(self) -> int:
        """Longest root-to-leaf path length in edges."""
        best = 0
        stack = [(self.root, 0)]
        while stack:
            i, d = stack.pop()
            if self.kind[i] == _KIND_LEAF:
                best = max(best, d)
            else:
                stack.append((self.left[i], d + 1))
                stack.append((self.right[i], d + 1))
        return best

    def node(self, i: int) -> Node:
        """Materialize node ``i`` as a value object."""
        if self.kind[i] == _KIND_SPLIT:
            return split_node(i, int(self.feature[i]), float(self.threshold[i]),
                              int(self.left[i]), int(self.right[i]))
        y1, y0, s1, s0 = (int(v) for v in self.counts[i])
        return leaf_node(i, int(self.pred[i]), bool(self.leaf_flipped[i]),
                         LeafStats(y1, y0, s1, s0))

    def nodes(self) -> list[Node]:
        return [self.node(i) for i in range(self.n_nodes)]

    def copy(self) -> Tree:
        dup = object.__new__(Tree)
        dup.id = self.id
        dup.flipped = self.flipped
        dup.root = self.root
        for name in ("kind", "feature", "threshold", "left", "right",
                     "pred", "leaf_flipped", "counts"):
            setattr(dup, name, getattr(self, name).copy())
        return dup

    def leaf_stats(self, i: int) -> LeafStats:
        if self.kind[i] != _KIND_LEAF:
            raise InputError(f"node {i} is not a leaf")
        y1, y0, s1, s0 = (int(v) for v in self.counts[i])
        return LeafStats(y1, y0, s1, s0)

    def flip_leaf(self, i: int) -> None:
        """Invert leaf ``i``'s prediction and mark it flipped (in place)."""
        if self.kind[i] != _KIND_LEAF:
            raise InputError(f"node {i} is not a leaf")
        self.pred[i] = 1 - self.pred[i]
        self.leaf_flipped[i] = True

    def route(self, instance) -> int:
        x = np.asarray(instance, dtype=np.float64)
        if x.ndim != 1 or x.shape[0] <= self.max_feature():
            raise InputError(
                f"instance has {x.shape} values, tree {self.id} splits on "
                f"feature {self.max_feature()}")
        i = self.root
        while self.kind[i] == _KIND_SPLIT:
            i = self.left[i] if x[self.feature[i]] <= self.threshold[i] else self.right[i]
        return int(i)

    def route_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] <= self.max_feature():
            raise InputError(
                f"instance matrix has shape {X.shape}, tree {self.id} splits on "
                f"feature {self.max_feature()}")
        return K.route_batch(self.kind, self.feature, self.threshold,
                             self.left, self.right, self.root, X)

    def predict(self, instance) -> int:
        return int(self.pred[self.route(instance)])

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        return self.pred[self.route_batch(X)]


class Forest:
    """A collection of trees plus the feature space they were built over."""

    def __init__(self, trees: list[Tree], n_features: int, feature_names: list[str],
                 sensitive_feature: str = "", metadata: dict | None = None):
        self.trees = list(trees)
        self.n_features = int(n_features)
        self.feature_names = list(feature_names)
        self.sensitive_feature = sensitive_feature
        self.metadata = dict(metadata or {})
        if len(self.feature_names) != self.n_features:
            raise ForestFormatError(
                f"{len(self.feature_names)} feature names for {self.n_features} features")
        for tree in self.trees:
            if tree.max_feature() >= self.n_features:
                raise ForestFormatError(
                    f"tree {tree.id} splits on feature {tree.max_feature()} "
                    f">= n_features {self.n_features}")

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def copy(self) -> Forest:
        return Forest([t.copy() for t in self.trees], self.n_features,
                      self.feature_names, self.sensitive_feature,
                      dict(self.metadata))

    def _check_nonempty(self):
        if not self.trees:
            raise ConfigError("forest has no trees")

    def predict(self, instance) -> int:
        """Majority vote across trees; an exact tie votes 0 (unfavorable)."""
        self._check_nonempty()
        votes = sum(t.predict(instance) for t in self.trees)
        return 1 if 2 * votes > self.n_trees else 0

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        self._check_nonempty()
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise InputError(
                f"instance matrix has shape {X.shape}, expected (n, {self.n_features})")
        votes = np.zeros(X.shape[0], dtype=np.int32)
        for tree in self.trees:
            votes += tree.predict_batch(X)
        return (2 * votes > self.n_trees).astype(np.uint8)


def route(tree: Tree, instance) -> int:
    """Leaf id reached by descending the tree; ``<=`` goes left."""
    return tree.route(instance)


def predict_tree(tree: Tree, instance) -> int:
    """Prediction of the routed leaf, honoring any flipped value."""
    return tree.predict(instance)


def predict_forest(forest: Forest, instance) -> int:
    """Majority vote over the forest's trees; exact tie -> 0."""
    return forest.predict(instance)


def annotate_leaf_stats(forest: Forest, repair) -> Forest:
    """Return a copy of ``forest`` whose leaf counts tally the repair data.

    ``repair`` is any object with ``X`` (n, n_features), ``y`` and ``s``
    arrays. Every leaf receives the exact counts of rows routed to it;
    leaves that receive no rows get all-zero stats.
    """
    X = np.ascontiguousarray(repair.X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != forest.n_features:
        raise InputError(
            f"repair data has shape {X.shape}, expected (n, {forest.n_features})")
    y = np.asarray(repair.y)
    s = np.asarray(repair.s)
    out = forest.copy()
    for tree in out.trees:
        ids = tree.route_batch(X)
        n = tree.n_nodes
        tree.counts[:, 0] = np.bincount(ids[y == 1], minlength=n)
        tree.counts[:, 1] = np.bincount(ids[y == 0], minlength=n)
        tree.counts[:, 2] = np.bincount(ids[s == 1], minlength=n)
        tree.counts[:, 3] = np.bincount(ids[s == 0], minlength=n)
    return out


def _node_doc(tree: Tree, i: int) -> dict:
    if tree.kind[i] == _KIND_SPLIT:
        return {
            "id": int(i),
            "kind": "split",
            "feature": int(tree.feature[i]),
            "threshold": float(tree.threshold[i]),
            "left": int(tree.left[i]),
            "right": int(tree.right[i]),
        }
    return {
        "id": int(i),
        "kind": "leaf",
        "pred": int(tree.pred[i]),
        "flipped": bool(tree.leaf_flipped[i]),
        "counts": {
            "y1": int(tree.counts[i, 0]),
            "y0": int(tree.counts[i, 1]),
            "s1": int(tree.counts[i, 2]),
            "s0": int(tree.counts[i, 3]),
        },
    }


def serialize(forest: Forest) -> str:
    """Canonical JSON for the forest; floats keep round-trip precision."""
    doc = {
        "version": FORMAT_VERSION,
        "n_features": forest.n_features,
        "feature_names": forest.feature_names,
        "sensitive_feature": forest.sensitive_feature,
        "trees": [
            {
                "id": tree.id,
                "flipped": tree.flipped,
                "root": tree.root,
                "nodes": [_node_doc(tree, i) for i in range(tree.n_nodes)],
            }
            for tree in forest.trees
        ],
        "metadata": forest.metadata,
    }
    return json.dumps(doc, separators=(",", ":"))


def _req(doc: dict, key: str, where: str):
    if key not in doc:
        raise ForestFormatError(f"{where}: missing field {key!r}")
    return doc[key]


def _parse_node(doc, tree_id) -> Node:
    if not isinstance(doc, dict):
        raise ForestFormatError(f"tree {tree_id}: node entry is not an object")
    nid = _req(doc, "id", f"tree {tree_id} node")
    if not isinstance(nid, int) or isinstance(nid, bool):
        raise ForestFormatError(f"tree {tree_id}: node id {nid!r} is not an integer")
    where = f"tree {tree_id} node {nid}"
    kind = _req(doc, "kind", where)
    if kind == "split":
        feature = _req(doc, "feature", where)
        threshold = _req(doc, "threshold", where)
        if not isinstance(threshold, (int, float)) or isinstance(threshold, bool):
            raise ForestFormatError(f"{where}: threshold {threshold!r} is not a number")
        return split_node(nid, feature, float(threshold),
                          _req(doc, "left", where), _req(doc, "right", where))
    if kind == "leaf":
        pred = _req(doc, "pred", where)
        counts = _req(doc, "counts", where)
        if not isinstance(counts, dict):
            raise ForestFormatError(f"{where}: counts is not an object")
        stats = LeafStats(
            n_y1=_req(counts, "y1", where), n_y0=_req(counts, "y0", where),
            n_s1=_req(counts, "s1", where), n_s0=_req(counts, "s0", where))
        return leaf_node(nid, pred, bool(_req(doc, "flipped", where)), stats)
    raise ForestFormatError(f"{where}: unknown kind {kind!r}")


def deserialize(text: str | bytes) -> Forest:
    """Parse and validate a portable forest document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ForestFormatError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ForestFormatError("top level is not an object")
    version = _req(doc, "version", "document")
    if version != FORMAT_VERSION:
        raise ForestFormatError(f"unsupported format version {version!r}")
    n_features = _req(doc, "n_features", "document")
    trees = []
    for tree_doc in _req(doc, "trees", "document"):
        tree_id = _req(tree_doc, "id", "tree")
        nodes = [_parse_node(nd, tree_id) for nd in _req(tree_doc, "nodes", f"tree {tree_id}")]
        trees.append(Tree(tree_id, nodes, _req(tree_doc, "root", f"tree {tree_id}"),
                          bool(_req(tree_doc, "flipped", f"tree {tree_id}"))))
    forest = Forest(trees, n_features, _req(doc, "feature_names", "document"),
                    _req(doc, "sensitive_feature", "document"),
                    _req(doc, "metadata", "document"))
    return forest


def save_forest(forest: Forest, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(serialize(forest))
        f.write("\n")


def load_forest(path) -> Forest:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return deserialize(f.read())
    except OSError as exc:
        raise InputError(f"cannot read forest file {path}: {exc}") from exc
