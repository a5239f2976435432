"""Accuracy and group-discrimination scoring for any binary predictor.

Discrimination is the favorable-rate difference between the privileged
(S=1) and unprivileged (S=0) groups:

    P(g(x)=1 | S=1) - P(g(x)=1 | S=0)

computed over an explicit dataset. The caller chooses which dataset the
score refers to (repair/training vs held-out evaluation data).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UndefinedMetricError
from .model import Forest, Tree


@dataclass
class MetricsReport:
    """Accuracy and discrimination of one predictor on one dataset."""

    accuracy: float
    discrimination: float
    rate_s1: float
    rate_s0: float
    n: int
    n_s1: int
    n_s0: int
    n_correct: int
    n_favorable_s1: int
    n_favorable_s0: int

    def to_json(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "discrimination": self.discrimination,
            "rate_s1": self.rate_s1,
            "rate_s0": self.rate_s0,
            "n": self.n,
            "n_s1": self.n_s1,
            "n_s0": self.n_s0,
        }


def report_from_predictions(preds, dataset) -> MetricsReport:
    """Score an externally computed 0/1 prediction vector.

    Single source of the metric arithmetic: every evaluation path in the
    package reduces to integer counts fed through this function, so equal
    predictions always give bit-equal reports.
    """
    preds = np.asarray(preds, dtype=np.uint8)
    y = dataset.y
    s = dataset.s
    n = len(y)
    if n == 0:
        raise UndefinedMetricError("metrics undefined on an empty dataset")
    n_s1 = int(np.count_nonzero(s == 1))
    n_s0 = n - n_s1
    if n_s1 == 0 or n_s0 == 0:
        raise UndefinedMetricError(
            f"discrimination undefined: group sizes S=1:{n_s1}, S=0:{n_s0}")
    n_fav_s1 = int(np.count_nonzero((preds == 1) & (s == 1)))
    n_fav_s0 = int(np.count_nonzero((preds == 1) & (s == 0)))
    n_correct = int(np.count_nonzero(preds == y))
    rate_s1 = n_fav_s1 / n_s1
    rate_s0 = n_fav_s0 / n_s0
    return MetricsReport(
        accuracy=n_correct / n,
        discrimination=rate_s1 - rate_s0,
        rate_s1=rate_s1,
        rate_s0=rate_s0,
        n=n,
        n_s1=n_s1,
        n_s0=n_s0,
        n_correct=n_correct,
        n_favorable_s1=n_fav_s1,
        n_favorable_s0=n_fav_s0,
    )


def _predictions(predict, dataset) -> np.ndarray:
    return np.fromiter((predict(x) for x in dataset.X), dtype=np.uint8,
                       count=len(dataset))


def evaluate(predict, dataset) -> MetricsReport:
    """Full report for a per-instance predictor callable."""
    return report_from_predictions(_predictions(predict, dataset), dataset)


def discrimination(predict, dataset) -> float:
    """Favorable-rate difference of ``predict`` between the two groups."""
    return evaluate(predict, dataset).discrimination


def accuracy(predict, dataset) -> float:
    """Fraction of instances where ``predict`` matches the label."""
    preds = _predictions(predict, dataset)
    n = len(dataset)
    if n == 0:
        raise UndefinedMetricError("accuracy undefined on an empty dataset")
    return int(np.count_nonzero(preds == dataset.y)) / n


def evaluate_tree(tree: Tree, dataset) -> MetricsReport:
    return report_from_predictions(tree.predict_batch(dataset.X), dataset)


def evaluate_forest(forest: Forest, dataset) -> MetricsReport:
    return report_from_predictions(forest.predict_batch(dataset.X), dataset)


def tree_discrimination(tree: Tree, dataset) -> float:
    return evaluate_tree(tree, dataset).discrimination


def forest_discrimination(forest: Forest, dataset) -> float:
    return evaluate_forest(forest, dataset).discrimination
