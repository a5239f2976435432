import json
from pathlib import Path

import numpy as np
import pytest

from fairforest.cli import main


@pytest.fixture()
def toy_csv(tmp_path):
    """Small biased dataset: privileged group sees more favorable labels."""
    rng = np.random.default_rng(42)
    rows = ["num1,num2,grp,label"]
    for _ in range(240):
        group = rng.random() < 0.5
        x1 = rng.normal(loc=1.0 if group else 0.0)
        x2 = rng.normal()
        favorable = (x1 + x2 + (0.9 if group else 0.0)) > 1.2
        rows.append(f"{x1:.4f},{x2:.4f},{'m' if group else 'f'},"
                    f"{'yes' if favorable else 'no'}")
    path = tmp_path / "toy.csv"
    path.write_text("\n".join(rows) + "\n")
    schema = {
        "columns": [["num1", "numeric"], ["num2", "numeric"],
                    ["grp", "sensitive"], ["label", "label"]],
        "favorable_label_value": "yes",
        "sensitive_privileged_value": "m",
    }
    schema_path = tmp_path / "schema.json"
    schema_path.write_text(json.dumps(schema))
    return path, schema_path


def run(argv):
    return main([str(a) for a in argv])


class TestTrain:
    def test_writes_forest_and_metrics(self, toy_csv, tmp_path):
        csv, schema = toy_csv
        out = tmp_path / "f.json"
        rc = run(["train", "--data", csv, "--schema", schema, "--out", out,
                  "--trees", "5", "--depth", "3", "--seed", "7"])
        assert rc == 0
        assert out.exists()
        metrics = json.loads((tmp_path / "f.json.metrics.json").read_text())
        assert set(metrics) == {"train", "test"}
        assert 0 <= metrics["test"]["accuracy"] <= 1

    def test_rerun_byte_identical(self, toy_csv, tmp_path):
        csv, schema = toy_csv
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        args = ["train", "--data", csv, "--schema", schema,
                "--trees", "4", "--depth", "3", "--seed", "11"]
        assert run(args + ["--out", a]) == 0
        assert run(args + ["--out", b]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_missing_file_exit_2(self, toy_csv, tmp_path, capsys):
        _, schema = toy_csv
        rc = run(["train", "--data", tmp_path / "nope.csv", "--schema", schema,
                  "--out", tmp_path / "f.json"])
        assert rc == 2
        assert "nope.csv" in capsys.readouterr().err

    def test_config_file_with_flag_overrides(self, toy_csv, tmp_path):
        csv, schema = toy_csv
        config = tmp_path / "train.json"
        config.write_text(json.dumps({"n_trees": 3, "max_depth": 2, "seed": 1}))
        out = tmp_path / "f.json"
        assert run(["train", "--data", csv, "--schema", schema, "--out", out,
                    "--config", config, "--trees", "6"]) == 0
        doc = json.loads(out.read_text())
        assert len(doc["trees"]) == 6
        assert doc["metadata"]["training"]["max_depth"] == 2


@pytest.fixture()
def trained(toy_csv, tmp_path):
    csv, schema = toy_csv
    out = tmp_path / "base.json"
    run(["train", "--data", csv, "--schema", schema, "--out", out,
         "--trees", "7", "--depth", "4", "--seed", "3"])
    return csv, schema, out


class TestFlip:
    def test_flip_meets_target_on_repair_set(self, trained, tmp_path):
        csv, schema, forest = trained
        out = tmp_path / "fixed.json"
        rc = run(["flip", "--forest", forest, "--data", csv, "--schema", schema,
                  "--strategy", "lf", "--epsilon", "0.05", "--alpha", "1.0",
                  "--out", out])
        assert rc == 0
        doc = json.loads((tmp_path / "fixed.json.metrics.json").read_text())
        summary = doc["summary"]
        if summary["stop_reason"] == "disc_met":
            assert doc["repair"]["after"]["discrimination"] <= 0.05
        report_lines = (tmp_path / "fixed.json.report.jsonl").read_text().strip()
        assert json.loads(report_lines.split("\n")[-1])["type"] == "summary"

    def test_epsilon_above_baseline_means_no_flips(self, trained, tmp_path):
        csv, schema, forest = trained
        out = tmp_path / "noop.json"
        assert run(["flip", "--forest", forest, "--data", csv, "--schema", schema,
                    "--strategy", "tf", "--epsilon", "1.0", "--alpha", "1.0",
                    "--out", out]) == 0
        summary = json.loads((tmp_path / "noop.json.metrics.json").read_text())["summary"]
        assert summary["leaves_flipped"] == 0
        assert summary["stop_reason"] == "disc_met"

    def test_rerun_identical_outputs(self, trained, tmp_path):
        csv, schema, forest = trained
        args = ["flip", "--forest", forest, "--data", csv, "--schema", schema,
                "--strategy", "lf", "--epsilon", "0.02", "--alpha", "1.0"]
        assert run(args + ["--out", tmp_path / "r1.json"]) == 0
        assert run(args + ["--out", tmp_path / "r2.json"]) == 0
        assert (tmp_path / "r1.json").read_bytes() == (tmp_path / "r2.json").read_bytes()
        a = (tmp_path / "r1.json.report.jsonl").read_bytes()
        b = (tmp_path / "r2.json.report.jsonl").read_bytes()
        assert a == b

    def test_single_group_data_exit_3(self, trained, tmp_path):
        csv, schema, forest = trained
        text = Path(csv).read_text().splitlines()
        header, rows = text[0], [r for r in text[1:] if ",m," in r]
        mono = tmp_path / "mono.csv"
        mono.write_text("\n".join([header] + rows) + "\n")
        rc = run(["flip", "--forest", forest, "--data", mono, "--schema", schema,
                  "--strategy", "lf", "--epsilon", "0.05", "--alpha", "1.0",
                  "--out", tmp_path / "x.json"])
        assert rc == 3


class TestEvalInspect:
    def test_eval_json(self, trained, capsys):
        csv, schema, forest = trained
        assert run(["eval", "--forest", forest, "--data", csv,
                    "--schema", schema, "--split", "test"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert set(doc) == {"accuracy", "discrimination", "rate_s1", "rate_s0",
                            "n", "n_s1", "n_s0"}

    def test_inspect_summarizes(self, trained, capsys):
        _, _, forest = trained
        assert run(["inspect", "--forest", forest]) == 0
        out = capsys.readouterr().out
        assert "trees: 7" in out
        assert "sensitive_feature: grp" in out

    def test_bad_forest_file_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"version": 1}')
        assert run(["inspect", "--forest", bad]) == 2


class TestExperiment:
    def spec_doc(self, csv, schema, out_dir, **overrides):
        doc = {
            "name": "toy",
            "data": str(csv),
            "schema": str(schema),
            "train": {"n_trees": 5, "max_depth": 3, "seed": 2},
            "test_fraction": 0.25,
            "seed": 2,
            "epsilons": [0.02, 0.1],
            "alphas": [1.0],
            "strategies": ["tf", "lf", "lf_star"],
            "out_dir": str(out_dir),
        }
        doc.update(overrides)
        return doc

    def test_grid_outputs(self, toy_csv, tmp_path):
        csv, schema = toy_csv
        out_dir = tmp_path / "results"
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps(self.spec_doc(csv, schema, out_dir)))
        assert run(["experiment", "--spec", spec]) == 0

        table = (out_dir / "toy_table.tsv").read_text().strip().split("\n")
        assert table[0].split("\t") == [
            "strategy", "base_criterion", "epsilon", "alpha", "accu_test",
            "disc_test", "delta_accu_points", "delta_disc_points"]
        assert len(table) == 1 + 3 * 2  # strategies x epsilons

        frontier = (out_dir / "toy_frontier.csv").read_text().strip().split("\n")
        assert len(frontier) == len(table)
        cells = json.loads((out_dir / "toy_cells.json").read_text())
        assert all(c["status"] == "ok" for c in cells.values())
        # every table cell is backed by persisted forest + report files
        for cell_id in cells:
            assert (out_dir / f"{cell_id}.forest.json").exists()
            assert (out_dir / f"{cell_id}.report.jsonl").exists()
        assert (out_dir / "toy_baseline_plain.forest.json").exists()
        assert (out_dir / "toy_baseline_fair_add.forest.json").exists()

    def test_empty_strategies_rejected_before_training(self, toy_csv, tmp_path):
        csv, schema = toy_csv
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps(
            self.spec_doc(csv, schema, tmp_path / "r", strategies=[])))
        assert run(["experiment", "--spec", spec]) == 2
        assert not (tmp_path / "r").exists()

    def test_unknown_strategy_rejected(self, toy_csv, tmp_path):
        csv, schema = toy_csv
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps(
            self.spec_doc(csv, schema, tmp_path / "r", strategies=["boost"])))
        assert run(["experiment", "--spec", spec]) == 2


class TestRounding:
    def test_points_half_away_from_zero(self):
        from fairforest.cli import _round_points

        assert _round_points(0.045) == 5
        assert _round_points(-0.045) == -5
        assert _round_points(0.044) == 4
        assert _round_points(0.0) == 0
        assert _round_points(0.2) == 20
