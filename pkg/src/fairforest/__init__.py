"""fairforest: train, audit and repair random forests for group fairness.

Train binary-classification forests (optionally with fairness-aware
splits), measure accuracy and group discrimination, and enforce a
discrimination bound by post-hoc flipping of leaf predictions, trading a
bounded amount of accuracy for fairness.
"""

from ._kernels import NAME as kernel_backend
from .errors import (
    ConfigError,
    FairForestError,
    ForestFormatError,
    InputError,
    InternalError,
    ParseError,
    UndefinedMetricError,
)
from .ingest import (
    Dataset,
    FeatureSchema,
    builtin_schema,
    load_csv,
    resolve_schema,
    split,
)
from .metrics import (
    MetricsReport,
    accuracy,
    discrimination,
    evaluate,
    evaluate_forest,
    evaluate_tree,
    forest_discrimination,
    report_from_predictions,
    tree_discrimination,
)
from .model import (
    Forest,
    LeafStats,
    Node,
    Tree,
    annotate_leaf_stats,
    deserialize,
    leaf_node,
    load_forest,
    predict_forest,
    predict_tree,
    route,
    save_forest,
    serialize,
    split_node,
)
from .relabel import (
    CandidateLeaf,
    RelabelConfig,
    RelabelReport,
    leaf_based_flip,
    repair_forest,
    score_leaves,
    tree_based_flip,
)
from .train import TrainConfig, combined_gain, grow_tree, info_gain, train_forest

__version__ = "0.1.0"

__all__ = [
    "CandidateLeaf",
    "ConfigError",
    "Dataset",
    "FairForestError",
    "FeatureSchema",
    "Forest",
    "ForestFormatError",
    "InputError",
    "InternalError",
    "LeafStats",
    "MetricsReport",
    "Node",
    "ParseError",
    "RelabelConfig",
    "RelabelReport",
    "TrainConfig",
    "Tree",
    "UndefinedMetricError",
    "accuracy",
    "annotate_leaf_stats",
    "builtin_schema",
    "combined_gain",
    "deserialize",
    "discrimination",
    "evaluate",
    "evaluate_forest",
    "evaluate_tree",
    "forest_discrimination",
    "grow_tree",
    "info_gain",
    "kernel_backend",
    "leaf_based_flip",
    "leaf_node",
    "load_csv",
    "load_forest",
    "predict_forest",
    "predict_tree",
    "repair_forest",
    "report_from_predictions",
    "resolve_schema",
    "route",
    "save_forest",
    "score_leaves",
    "serialize",
    "split",
    "split_node",
    "train_forest",
    "tree_based_flip",
    "tree_discrimination",
]
