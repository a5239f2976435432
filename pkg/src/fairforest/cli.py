"""Command-line front end.

Subcommands: ``train`` a forest from a CSV, ``flip`` (repair) a stored
forest, ``eval`` a forest on a dataset, ``inspect`` a forest file, and
``experiment`` to run a (strategy x epsilon x alpha) grid and emit the
result tables. Exit codes: 0 success, 2 input error, 3 undefined metric
(an empty sensitive group), 4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor

from . import relabel
from .errors import ConfigError, InputError, InternalError, UndefinedMetricError
from .ingest import load_csv, resolve_schema, split
from .metrics import evaluate_forest
from .model import annotate_leaf_stats, load_forest, save_forest, serialize
from .relabel import RelabelConfig, repair_forest
from .train import TrainConfig, train_forest

STRATEGY_NAMES = {
    "tf": relabel.TREE_BASED,
    "lf": relabel.LEAF_BASED,
    "tree_based": relabel.TREE_BASED,
    "leaf_based": relabel.LEAF_BASED,
}

# starred variants run the same post-processing on fairness-aware base trees
EXPERIMENT_STRATEGIES = {
    "tf": ("tf", "plain"),
    "lf": ("lf", "plain"),
    "tf_star": ("tf", "fair_add"),
    "lf_star": ("lf", "fair_add"),
}


def _write_atomic(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _save_forest_atomic(forest, path):
    _write_atomic(path, serialize(forest) + "\n")


def _load_split(args, metadata=None):
    """Load the CSV and reproduce the train/test split.

    Split parameters fall back to the ones recorded in the forest's
    metadata so that ``flip``/``eval`` see the exact split ``train`` used.
    """
    recorded = (metadata or {}).get("split", {})
    fraction = args.test_fraction
    if fraction is None:
        fraction = recorded.get("test_fraction", 0.2)
    seed = args.seed
    if seed is None:
        seed = recorded.get("seed", 0)
    schema = resolve_schema(args.schema)
    data = load_csv(args.data, schema)
    train, test = split(data, fraction, seed)
    return data, train, test, fraction, seed


def cmd_train(args):
    if args.config:
        config = TrainConfig.from_file(args.config)
    else:
        config = TrainConfig()
    overrides = {
        "n_trees": args.trees,
        "max_depth": args.depth,
        "min_samples_leaf": args.min_leaf,
        "criterion": args.criterion,
        "features_per_split": args.features_per_split,
        "seed": args.seed,
    }
    fields = {k: v for k, v in overrides.items() if v is not None}
    if args.no_bootstrap:
        fields["bootstrap"] = False
    config = TrainConfig(**{**config.to_json(), **fields})

    args.seed = config.seed
    _, train, test, fraction, seed = _load_split(args)
    forest = train_forest(train, config)
    forest.metadata["schema"] = args.schema
    forest.metadata["split"] = {"test_fraction": fraction, "seed": seed}
    _save_forest_atomic(forest, args.out)

    doc = {
        "train": evaluate_forest(forest, train).to_json(),
        "test": evaluate_forest(forest, test).to_json(),
    }
    metrics_path = args.metrics_out or args.out + ".metrics.json"
    _write_atomic(metrics_path, json.dumps(doc, indent=2) + "\n")
    print(f"forest written to {args.out}")
    print(f"baseline metrics written to {metrics_path}")
    return 0


def cmd_flip(args):
    forest = load_forest(args.forest)
    _, train, test, _, _ = _load_split(args, forest.metadata)
    forest = annotate_leaf_stats(forest, train)

    config = RelabelConfig(args.epsilon, args.alpha, STRATEGY_NAMES[args.strategy])
    before_repair = evaluate_forest(forest, train)
    before_test = evaluate_forest(forest, test)
    repaired, report = repair_forest(forest, train, config,
                                     literal_signs=args.literal_signs)
    after_repair = evaluate_forest(repaired, train)
    after_test = evaluate_forest(repaired, test)

    _save_forest_atomic(repaired, args.out)
    report_path = args.report or args.out + ".report.jsonl"
    _write_atomic(report_path, report.to_json_lines())
    doc = {
        "repair": {"before": before_repair.to_json(), "after": after_repair.to_json()},
        "test": {"before": before_test.to_json(), "after": after_test.to_json()},
        "summary": report.summary_json(),
    }
    metrics_path = args.metrics_out or args.out + ".metrics.json"
    _write_atomic(metrics_path, json.dumps(doc, indent=2) + "\n")

    s = report.summary_json()
    print(f"stop_reason={s['stop_reason']} iterations={s['iterations']} "
          f"leaves_flipped={s['leaves_flipped']}")
    print(f"repair set: disc {s['initial_discrimination']:.4f} -> "
          f"{s['final_discrimination']:.4f}, accuracy {s['baseline_accuracy']:.4f} "
          f"-> {s['final_accuracy']:.4f}")
    print(f"test set:   disc {before_test.discrimination:.4f} -> "
          f"{after_test.discrimination:.4f}, accuracy {before_test.accuracy:.4f} "
          f"-> {after_test.accuracy:.4f}")
    print(f"repaired forest written to {args.out}")
    return 0


def cmd_eval(args):
    forest = load_forest(args.forest)
    data, train, test, _, _ = _load_split(args, forest.metadata)
    part = {"train": train, "test": test, "full": data}[args.split]
    doc = evaluate_forest(forest, part).to_json()
    text = json.dumps(doc, indent=2)
    if args.out:
        _write_atomic(args.out, text + "\n")
    else:
        print(text)
    return 0


def cmd_inspect(args):
    forest = load_forest(args.forest)
    print(f"forest: {args.forest}")
    print(f"  n_features: {forest.n_features}")
    print(f"  sensitive_feature: {forest.sensitive_feature}")
    print(f"  trees: {forest.n_trees}")
    total_leaves = 0
    total_flipped = 0
    for tree in forest.trees:
        leaves = tree.leaf_ids()
        flipped = int(tree.leaf_flipped[leaves].sum())
        total_leaves += len(leaves)
        total_flipped += flipped
        print(f"    tree {tree.id}: nodes={tree.n_nodes} leaves={len(leaves)} "
              f"depth={tree.depth()} flipped_leaves={flipped}"
              f"{' [tree flipped]' if tree.flipped else ''}")
    print(f"  total leaves: {total_leaves} ({total_flipped} flipped)")
    print(f"  metadata: {json.dumps(forest.metadata, indent=2)}")
    return 0


def _round_points(value: float) -> int:
    """Hundredths, rounded half away from zero (table formatting)."""
    scaled = abs(value) * 100
    return int(math.copysign(math.floor(scaled + 0.5), value))


class ExperimentSpec:
    def __init__(self, doc: dict, out_dir: str | None):
        try:
            self.name = doc.get("name", "dataset")
            self.data = doc["data"]
            self.schema = doc["schema"]
            self.train = TrainConfig.from_json(doc.get("train", {}))
            self.test_fraction = doc.get("test_fraction", 0.2)
            self.seed = doc.get("seed", self.train.seed)
            self.epsilons = list(doc["epsilons"])
            self.alphas = list(doc["alphas"])
            self.strategies = list(doc["strategies"])
            self.out_dir = out_dir or doc.get("out_dir", "results")
        except KeyError as exc:
            raise ConfigError(f"experiment spec missing key {exc}") from exc
        if not self.epsilons or not self.alphas:
            raise ConfigError("experiment spec needs non-empty epsilons and alphas")
        if not self.strategies:
            raise ConfigError("experiment spec needs a non-empty strategy list")
        for strategy in self.strategies:
            if strategy not in EXPERIMENT_STRATEGIES:
                raise ConfigError(
                    f"unknown strategy {strategy!r}, "
                    f"have {sorted(EXPERIMENT_STRATEGIES)}")
        if not os.path.exists(self.data):
            raise InputError(f"dataset file {self.data} does not exist")

    @classmethod
    def from_file(cls, path, out_dir=None):
        try:
            with open(path, "r", encoding="utf-8") as f:
                return cls(json.load(f), out_dir)
        except OSError as exc:
            raise InputError(f"cannot read spec file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"spec file {path} is not valid JSON: {exc}") from exc


def _experiment_cell(task):
    """One grid cell: repair a baseline forest copy and evaluate it.

    Runs in a worker process; reloads its inputs from the files the parent
    wrote, so the cell stays reproducible from persisted artifacts alone.
    """
    (cell_id, baseline_path, data_path, schema_spec, fraction, seed,
     strategy, epsilon, alpha, out_dir) = task
    try:
        forest = load_forest(baseline_path)
        schema = resolve_schema(schema_spec)
        data = load_csv(data_path, schema)
        train, test = split(data, fraction, seed)
        forest = annotate_leaf_stats(forest, train)
        config = RelabelConfig(epsilon, alpha, STRATEGY_NAMES[strategy])
        repaired, report = repair_forest(forest, train, config)
        rep_test = evaluate_forest(repaired, test)

        base = os.path.join(out_dir, cell_id)
        _save_forest_atomic(repaired, base + ".forest.json")
        _write_atomic(base + ".report.jsonl", report.to_json_lines())
        _write_atomic(base + ".metrics.json", json.dumps({
            "test": rep_test.to_json(), "summary": report.summary_json()},
            indent=2) + "\n")
        return cell_id, {
            "status": "ok",
            "accuracy_test": rep_test.accuracy,
            "discrimination_test": rep_test.discrimination,
            "stop_reason": report.stop_reason,
            "leaves_flipped": report.n_leaves_flipped,
        }
    except Exception as exc:  # record the failure, keep the grid running
        return cell_id, {"status": f"error: {exc}"}


def cmd_experiment(args):
    spec = ExperimentSpec.from_file(args.spec, args.out_dir)
    os.makedirs(spec.out_dir, exist_ok=True)
    schema = resolve_schema(spec.schema)
    data = load_csv(spec.data, schema)
    train, test = split(data, spec.test_fraction, spec.seed)

    # one baseline forest per base criterion, shared by every cell
    criteria = sorted({EXPERIMENT_STRATEGIES[s][1] for s in spec.strategies})
    baselines = {}
    for criterion in criteria:
        config = TrainConfig(**{**spec.train.to_json(), "criterion": criterion})
        forest = train_forest(train, config)
        forest.metadata["schema"] = spec.schema
        forest.metadata["split"] = {
            "test_fraction": spec.test_fraction, "seed": spec.seed}
        path = os.path.join(spec.out_dir, f"{spec.name}_baseline_{criterion}.forest.json")
        _save_forest_atomic(forest, path)
        rep = evaluate_forest(forest, test)
        _write_atomic(path.replace(".forest.json", ".metrics.json"),
                      json.dumps({"test": rep.to_json()}, indent=2) + "\n")
        baselines[criterion] = (path, rep)
        print(f"baseline[{criterion}]: test accu={rep.accuracy:.4f} "
              f"disc={rep.discrimination:.4f}")

    # the tables always compare against the plain baseline
    ref = baselines.get("plain", next(iter(baselines.values())))[1]

    tasks = []
    for strategy in spec.strategies:
        flip_kind, criterion = EXPERIMENT_STRATEGIES[strategy]
        for epsilon in spec.epsilons:
            for alpha in spec.alphas:
                cell_id = f"{spec.name}_{strategy}_e{epsilon:g}_a{alpha:g}"
                tasks.append((cell_id, baselines[criterion][0], spec.data,
                              spec.schema, spec.test_fraction, spec.seed,
                              flip_kind, epsilon, alpha, spec.out_dir))

    workers = max(1, int(os.environ.get("FAIRFOREST_THREADS", "1")))
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = dict(pool.map(_experiment_cell, tasks))
    else:
        results = dict(map(_experiment_cell, tasks))

    table_rows = []
    frontier_rows = []
    cells = {}
    for strategy in spec.strategies:
        flip_kind, criterion = EXPERIMENT_STRATEGIES[strategy]
        for epsilon in spec.epsilons:
            for alpha in spec.alphas:
                cell_id = f"{spec.name}_{strategy}_e{epsilon:g}_a{alpha:g}"
                outcome = results[cell_id]
                cells[cell_id] = outcome
                if outcome["status"] != "ok":
                    print(f"cell {cell_id}: {outcome['status']}", file=sys.stderr)
                    continue
                accu = outcome["accuracy_test"]
                disc = outcome["discrimination_test"]
                table_rows.append("\t".join([
                    flip_kind, criterion, f"{epsilon:g}", f"{alpha:g}",
                    f"{accu:.6f}", f"{disc:.6f}",
                    str(_round_points(ref.accuracy - accu)),
                    str(_round_points(ref.discrimination - disc)),
                ]))
                frontier_rows.append(
                    f"{flip_kind},{criterion},{epsilon:g},{alpha:g},"
                    f"{disc:.6f},{accu:.6f}")

    header = ("strategy\tbase_criterion\tepsilon\talpha\taccu_test\tdisc_test"
              "\tdelta_accu_points\tdelta_disc_points")
    _write_atomic(os.path.join(spec.out_dir, f"{spec.name}_table.tsv"),
                  "\n".join([header] + table_rows) + "\n")
    _write_atomic(
        os.path.join(spec.out_dir, f"{spec.name}_frontier.csv"),
        "\n".join(["strategy,base_criterion,epsilon,alpha,disc_test,accu_test"]
                  + frontier_rows) + "\n")
    _write_atomic(os.path.join(spec.out_dir, f"{spec.name}_cells.json"),
                  json.dumps(cells, indent=2) + "\n")
    # cell failures are recorded in cells.json, not an exit condition
    print(f"grid complete: {len(table_rows)}/{len(tasks)} cells ok, "
          f"tables in {spec.out_dir}")
    return 0


def _features_arg(value):
    if value == "sqrt":
        return value
    try:
        return int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected 'sqrt' or an integer, got {value!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairforest",
        description="Train, audit and repair random forests for group fairness.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_data_args(p):
        p.add_argument("--data", required=True, help="CSV file with header row")
        p.add_argument("--schema", required=True,
                       help="builtin schema name (adult/compas/bank) or JSON path")
        p.add_argument("--test-fraction", type=float, default=None)
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("train", help="train a forest and write it to disk")
    add_data_args(p)
    p.add_argument("--out", required=True, help="output forest JSON path")
    p.add_argument("--metrics-out", help="baseline metrics path "
                                         "(default: <out>.metrics.json)")
    p.add_argument("--config", help="TrainConfig JSON file")
    p.add_argument("--trees", type=int, dest="trees")
    p.add_argument("--depth", type=int, dest="depth")
    p.add_argument("--min-leaf", type=int, dest="min_leaf")
    p.add_argument("--criterion",
                   choices=["plain", "fair_sub", "fair_div", "fair_add"])
    p.add_argument("--features-per-split", dest="features_per_split",
                   type=_features_arg)
    p.add_argument("--no-bootstrap", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("flip", help="repair a forest by flipping leaves")
    p.add_argument("--forest", required=True)
    add_data_args(p)
    p.add_argument("--strategy", required=True, choices=sorted(STRATEGY_NAMES))
    p.add_argument("--epsilon", type=float, required=True,
                   help="discrimination bound on the repair set")
    p.add_argument("--alpha", type=float, required=True,
                   help="maximum tolerated accuracy drop")
    p.add_argument("--out", required=True, help="repaired forest path")
    p.add_argument("--report", help="iteration report path "
                                    "(default: <out>.report.jsonl)")
    p.add_argument("--metrics-out", help="before/after metrics path")
    p.add_argument("--literal-signs", action="store_true",
                   help="historical leaf scoring variant (audit only)")
    p.set_defaults(func=cmd_flip)

    p = sub.add_parser("eval", help="evaluate a forest on a dataset")
    p.add_argument("--forest", required=True)
    add_data_args(p)
    p.add_argument("--split", choices=["train", "test", "full"], default="test")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("inspect", help="pretty-print a forest file")
    p.add_argument("--forest", required=True)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("experiment", help="run a (strategy x epsilon x alpha) grid")
    p.add_argument("--spec", required=True, help="experiment spec JSON file")
    p.add_argument("--out-dir",
                   help="override the output directory named in the spec file")
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UndefinedMetricError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except InternalError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 4
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
