"""Post-hoc forest repair by flipping leaf predictions.

Each leaf gets a score: how much the enclosing tree's discrimination
would drop per unit of accuracy lost if the leaf's prediction were
inverted, both measured by the leaf's repair-set counts. The repair loop
then greedily attacks the most discriminating unflipped tree until the
forest's discrimination on the repair set reaches ``epsilon``, the
accuracy drop hits ``alpha``, or every tree is exhausted.

Two strategies: tree-based flipping inverts every positively scored leaf
of the selected tree at once; leaf-based flipping inverts only the single
best leaf per iteration, which usually buys the same discrimination drop
for less accuracy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError, InternalError, UndefinedMetricError
from .ingest import Dataset
from .metrics import MetricsReport, report_from_predictions
from .model import Forest, Tree

TREE_BASED = "tree_based"
LEAF_BASED = "leaf_based"

STOP_DISC_MET = "disc_met"
STOP_ACCURACY_BUDGET = "accuracy_budget"
STOP_TREES_EXHAUSTED = "trees_exhausted"

_VERIFY_EVERY = 256


@dataclass
class CandidateLeaf:
    """A flippable leaf with its projected per-tree effect."""

    tree_id: int
    leaf_id: int
    delta_accu: float  # <= 0: projected accuracy change if flipped
    delta_disc: float  # > 0: projected per-tree discrimination reduction
    score: float       # discrimination reduction per unit accuracy lost

    def to_json(self) -> dict:
        return {
            "tree_id": self.tree_id,
            "leaf_id": self.leaf_id,
            "delta_accu": self.delta_accu,
            "delta_disc": self.delta_disc,
            "score": self.score,
        }


@dataclass
class RelabelConfig:
    epsilon: float
    alpha: float
    strategy: str = LEAF_BASED

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError(f"epsilon {self.epsilon} not in [0, 1]")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha {self.alpha} not in [0, 1]")
        if self.strategy not in (TREE_BASED, LEAF_BASED):
            raise ConfigError(
                f"unknown strategy {self.strategy!r}, "
                f"expected {TREE_BASED!r} or {LEAF_BASED!r}")


@dataclass
class IterationRecord:
    index: int
    tree_id: int
    tree_disc: float
    flipped: list[CandidateLeaf]
    disc_before: float
    disc_after: float
    accu_before: float
    accu_after: float
    cum_delta_accu: float

    def to_json(self) -> dict:
        return {
            "type": "iteration",
            "index": self.index,
            "tree_id": self.tree_id,
            "tree_disc": self.tree_disc,
            "flipped": [c.to_json() for c in self.flipped],
            "disc_before": self.disc_before,
            "disc_after": self.disc_after,
            "accu_before": self.accu_before,
            "accu_after": self.accu_after,
            "cum_delta_accu": self.cum_delta_accu,
        }


@dataclass
class RelabelReport:
    """Full audit trail of one repair run, on the repair dataset."""

    strategy: str
    epsilon: float
    alpha: float
    baseline_accuracy: float
    initial_discrimination: float
    final_accuracy: float
    final_discrimination: float
    stop_reason: str
    reverse_discrimination: bool
    iterations: list[IterationRecord] = field(default_factory=list)

    @property
    def n_leaves_flipped(self) -> int:
        return sum(len(rec.flipped) for rec in self.iterations)

    @property
    def accuracy_drop(self) -> float:
        return self.baseline_accuracy - self.final_accuracy

    def summary_json(self) -> dict:
        return {
            "type": "summary",
            "strategy": self.strategy,
            "epsilon": self.epsilon,
            "alpha": self.alpha,
            "baseline_accuracy": self.baseline_accuracy,
            "initial_discrimination": self.initial_discrimination,
            "final_accuracy": self.final_accuracy,
            "final_discrimination": self.final_discrimination,
            "accuracy_drop": self.accuracy_drop,
            "stop_reason": self.stop_reason,
            "reverse_discrimination": self.reverse_discrimination,
            "iterations": len(self.iterations),
            "leaves_flipped": self.n_leaves_flipped,
        }

    def to_json_lines(self) -> str:
        """One JSON object per iteration, then the summary object."""
        lines = [json.dumps(rec.to_json(), separators=(",", ":"))
                 for rec in self.iterations]
        lines.append(json.dumps(self.summary_json(), separators=(",", ":")))
        return "\n".join(lines) + "\n"


def _check_annotation(tree: Tree, repair: Dataset):
    leaves = tree.leaf_ids()
    tot_y = int(tree.counts[leaves, 0].sum() + tree.counts[leaves, 1].sum())
    tot_s = int(tree.counts[leaves, 2].sum() + tree.counts[leaves, 3].sum())
    if tot_y != len(repair) or tot_s != len(repair):
        raise InputError(
            f"tree {tree.id}: leaf stats cover {tot_y} rows but the repair "
            f"dataset has {len(repair)}; run annotate_leaf_stats first")


def score_leaves(tree: Tree, repair: Dataset, literal_signs: bool = False) -> list[CandidateLeaf]:
    """Candidate leaves of one tree, best score first.

    A leaf qualifies when it is not yet flipped, received repair rows with
    a label majority (``n_y1 != n_y0``), and flipping it would reduce the
    tree's discrimination. ``delta_accu`` is the (non-positive) accuracy
    change and ``delta_disc`` the discrimination reduction, both exact on
    the repair set whenever the leaf prediction matches its routed label
    majority. Ties order by (tree_id, leaf_id).

    ``literal_signs`` switches to the historical scoring variant that
    divides by the signed (negative) accuracy change and admits scores
    >= 0; it selects discrimination-increasing flips and exists only for
    auditing comparisons.
    """
    _check_annotation(tree, repair)
    n = len(repair)
    n_s1 = repair.n_s1
    n_s0 = repair.n_s0
    if n_s1 == 0 or n_s0 == 0:
        raise UndefinedMetricError(
            f"leaf scoring undefined: group sizes S=1:{n_s1}, S=0:{n_s0}")

    out = []
    for leaf in tree.leaf_ids():
        if tree.leaf_flipped[leaf]:
            continue
        y1, y0, s1, s0 = (int(v) for v in tree.counts[leaf])
        diff = y1 - y0
        if diff == 0:  # includes leaves with no routed rows
            continue
        delta_accu = -abs(diff) / n
        sign = 1.0 if diff > 0 else -1.0
        delta_disc = sign * (s1 / n_s1 - s0 / n_s0)
        if literal_signs:
            score = delta_disc / delta_accu
            if score < 0.0:
                continue
        else:
            score = delta_disc / -delta_accu
            if score <= 0.0:
                continue
        out.append(CandidateLeaf(tree.id, int(leaf), delta_accu, delta_disc, score))
    out.sort(key=lambda c: (-c.score, c.tree_id, c.leaf_id))
    return out


class _RepairEvaluator:
    """Exact forest metrics on the repair set under leaf flips.

    Routing never changes when predictions flip, so leaf assignments are
    computed once; per-tree prediction columns and the vote tally are
    maintained with integer arithmetic and therefore stay equal to a full
    re-evaluation (checked by :meth:`verify`).
    """

    def __init__(self, forest: Forest, repair: Dataset):
        if len(repair) == 0:
            raise UndefinedMetricError("repair dataset is empty")
        if repair.n_s1 == 0 or repair.n_s0 == 0:
            raise UndefinedMetricError(
                f"repair dataset group sizes S=1:{repair.n_s1}, S=0:{repair.n_s0}")
        self.forest = forest
        self.repair = repair
        self.n_trees = forest.n_trees
        X = repair.X
        self.assign = np.column_stack([t.route_batch(X) for t in forest.trees])
        self.preds = np.empty((len(repair), self.n_trees), dtype=np.uint8)
        for t, tree in enumerate(forest.trees):
            self.preds[:, t] = tree.pred[self.assign[:, t]]
        self.votes = self.preds.sum(axis=1, dtype=np.int32)
        self._s1 = repair.s == 1
        self._s0 = ~self._s1
        self._fav_s1 = [int(np.count_nonzero(self.preds[self._s1, t]))
                        for t in range(self.n_trees)]
        self._fav_s0 = [int(np.count_nonzero(self.preds[self._s0, t]))
                        for t in range(self.n_trees)]

    def tree_discrimination(self, t: int) -> float:
        return self._fav_s1[t] / self.repair.n_s1 - self._fav_s0[t] / self.repair.n_s0

    def forest_predictions(self) -> np.ndarray:
        return (2 * self.votes > self.n_trees).astype(np.uint8)

    def forest_report(self) -> MetricsReport:
        return report_from_predictions(self.forest_predictions(), self.repair)

    def flip(self, t: int, leaf_ids) -> None:
        tree = self.forest.trees[t]
        for leaf in leaf_ids:
            tree.flip_leaf(leaf)
        if not leaf_ids:
            return
        new_col = tree.pred[self.assign[:, t]]
        self.votes += new_col.astype(np.int32) - self.preds[:, t]
        self.preds[:, t] = new_col
        self._fav_s1[t] = int(np.count_nonzero(new_col[self._s1]))
        self._fav_s0[t] = int(np.count_nonzero(new_col[self._s0]))

    def verify(self) -> None:
        """Re-derive every cached quantity from scratch; bug check."""
        for t, tree in enumerate(self.forest.trees):
            expect = tree.pred[tree.route_batch(self.repair.X)]
            if not np.array_equal(expect, self.preds[:, t]):
                raise InternalError(f"cached predictions diverged for tree index {t}")
        if not np.array_equal(self.votes, self.preds.sum(axis=1, dtype=np.int32)):
            raise InternalError("cached vote tally diverged")


def _run(forest: Forest, repair: Dataset, config: RelabelConfig,
         literal_signs: bool) -> tuple[Forest, RelabelReport]:
    work = forest.copy()
    if not work.trees:
        raise ConfigError("cannot repair an empty forest")
    for tree in work.trees:
        _check_annotation(tree, repair)
    ev = _RepairEvaluator(work, repair)

    rep = ev.forest_report()
    baseline_accu = rep.accuracy
    initial_disc = rep.discrimination
    delta_accu = 0.0
    iterations: list[IterationRecord] = []
    max_iter = sum(len(t.leaf_ids()) for t in work.trees) + work.n_trees + 1

    while True:
        rep = ev.forest_report()
        if rep.discrimination <= config.epsilon:
            stop = STOP_DISC_MET
            break
        if not delta_accu < config.alpha:
            stop = STOP_ACCURACY_BUDGET
            break
        open_pos = [p for p, t in enumerate(work.trees) if not t.flipped]
        if not open_pos:
            stop = STOP_TREES_EXHAUSTED
            break
        if len(iterations) >= max_iter:
            raise InternalError("repair loop exceeded its iteration bound")

        pos = min(open_pos, key=lambda p: (-ev.tree_discrimination(p),
                                           work.trees[p].id))
        tree = work.trees[pos]
        tree_disc = ev.tree_discrimination(pos)
        candidates = score_leaves(tree, repair, literal_signs=literal_signs)

        if config.strategy == TREE_BASED:
            flipped = candidates
            ev.flip(pos, [c.leaf_id for c in flipped])
            tree.flipped = True
        elif not candidates:
            flipped = []
            tree.flipped = True
        else:
            flipped = [candidates[0]]
            ev.flip(pos, [flipped[0].leaf_id])

        after = ev.forest_report()
        delta_accu = baseline_accu - after.accuracy
        iterations.append(IterationRecord(
            index=len(iterations),
            tree_id=tree.id,
            tree_disc=tree_disc,
            flipped=flipped,
            disc_before=rep.discrimination,
            disc_after=after.discrimination,
            accu_before=rep.accuracy,
            accu_after=after.accuracy,
            cum_delta_accu=delta_accu,
        ))
        if len(iterations) % _VERIFY_EVERY == 0:
            ev.verify()

    ev.verify()
    report = RelabelReport(
        strategy=config.strategy,
        epsilon=config.epsilon,
        alpha=config.alpha,
        baseline_accuracy=baseline_accu,
        initial_discrimination=initial_disc,
        final_accuracy=rep.accuracy,
        final_discrimination=rep.discrimination,
        stop_reason=stop,
        reverse_discrimination=initial_disc < -config.epsilon,
        iterations=iterations,
    )
    return work, report


def tree_based_flip(forest: Forest, repair: Dataset, config: RelabelConfig,
                    literal_signs: bool = False) -> tuple[Forest, RelabelReport]:
    """Repair by flipping every candidate leaf of one tree per iteration."""
    if config.strategy != TREE_BASED:
        config = RelabelConfig(config.epsilon, config.alpha, TREE_BASED)
    return _run(forest, repair, config, literal_signs)


def leaf_based_flip(forest: Forest, repair: Dataset, config: RelabelConfig,
                    literal_signs: bool = False) -> tuple[Forest, RelabelReport]:
    """Repair by flipping the single best-scoring leaf per iteration."""
    if config.strategy != LEAF_BASED:
        config = RelabelConfig(config.epsilon, config.alpha, LEAF_BASED)
    return _run(forest, repair, config, literal_signs)


def repair_forest(forest: Forest, repair: Dataset, config: RelabelConfig,
                  literal_signs: bool = False) -> tuple[Forest, RelabelReport]:
    """Run the strategy named by ``config.strategy``."""
    if config.strategy == TREE_BASED:
        return tree_based_flip(forest, repair, config, literal_signs)
    return leaf_based_flip(forest, repair, config, literal_signs)
