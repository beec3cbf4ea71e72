import hashlib
import json
import os

import numpy as np
import pytest

from mcnpower import ruleset_to_json
from mcnpower.cli import main


@pytest.fixture
def ruleset_file(tmp_path, worked_example):
    path = tmp_path / "game.json"
    path.write_text(ruleset_to_json(worked_example))
    return str(path)


def _run(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def _sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


class TestExact:
    def test_shapley_values_sum_to_grand_coalition_value(self, capsys, ruleset_file):
        code, out, _ = _run(capsys, ["exact", "--in", ruleset_file, "--index", "shapley-eq2"])
        assert code == 0
        doc = json.loads(out)
        assert sum(doc["values"]) == pytest.approx(3.0, abs=1e-9)
        assert doc["kind"] == "shapley_eq2" and doc["method"] == "exact"

    def test_report_written_to_file(self, capsys, ruleset_file, tmp_path):
        out_path = tmp_path / "power.json"
        code, out, _ = _run(
            capsys,
            ["exact", "--in", ruleset_file, "--index", "banzhaf-eq1", "--out", str(out_path)],
        )
        assert code == 0 and out == ""
        doc = json.loads(out_path.read_text())
        assert doc["values"] == [2.0, 2.5, -1.5]
        assert "format_version" in doc and "config_hash" in doc


class TestApprox:
    def test_deterministic_and_worker_independent(self, capsys, ruleset_file, monkeypatch):
        args = ["approx", "--in", ruleset_file, "--index", "banzhaf",
                "--samples", "5000", "--seed", "11"]
        _, out_one, _ = _run(capsys, args)
        monkeypatch.setenv("MCNPOWER_WORKERS", "4")
        _, out_many, _ = _run(capsys, args)
        assert json.loads(out_one)["values"] == json.loads(out_many)["values"]

    def test_metadata_in_report(self, capsys, ruleset_file):
        _, out, _ = _run(capsys, ["approx", "--in", ruleset_file, "--index", "shapley",
                                  "--samples", "500", "--seed", "3"])
        doc = json.loads(out)
        assert doc["method"] == "monte_carlo"
        assert doc["samples"] == 500 and doc["seed"] == 3


class TestSamplesize:
    def test_reference_bound(self, capsys):
        code, out, _ = _run(capsys, ["samplesize", "--epsilon", "0.01", "--delta", "0.05"])
        assert code == 0
        assert json.loads(out)["k_required"] == 18445

    def test_domain_error_is_one_line_exit_one(self, capsys):
        code, _, err = _run(capsys, ["samplesize", "--epsilon", "2", "--delta", "0.05"])
        assert code == 1
        assert err.startswith("error:") and err.count("\n") == 1


class TestUsage:
    def test_no_arguments_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_unknown_flag_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["samplesize", "--epsilon", "0.1", "--delta", "0.05", "--bogus"])
        assert exc.value.code == 2

    def test_missing_input_file_is_data_error(self, capsys, tmp_path):
        code, _, err = _run(
            capsys, ["exact", "--in", str(tmp_path / "none.json"), "--index", "banzhaf-eq1"]
        )
        assert code == 1
        assert err.startswith("error:")


class TestDataCommands:
    def test_gen_label_split_train_eval_graph_chain(self, capsys, tmp_path):
        data = str(tmp_path / "data")
        code, out, _ = _run(capsys, [
            "gen", "--method", "uniform", "--k", "30", "--n", "6", "--m", "5",
            "--p", "0.5", "--weights", "uniform", "--seed", "4", "--out", data,
        ])
        assert code == 0 and json.loads(out)["k"] == 30

        code, _, _ = _run(capsys, [
            "label", "--index", "banzhaf", "--samples", "100", "--seed", "2", data,
        ])
        assert code == 0

        code, _, _ = _run(capsys, [
            "split", "--data", data, "--ratio", "0.8", "--seed", "1",
            "--train-out", str(tmp_path / "train"), "--test-out", str(tmp_path / "test"),
        ])
        assert code == 0

        model = str(tmp_path / "model")
        code, _, _ = _run(capsys, [
            "train", "--data", str(tmp_path / "train"), "--epochs", "2",
            "--batch", "16", "--seed", "0", "--out", model,
        ])
        assert code == 0

        report = tmp_path / "eval.json"
        code, _, _ = _run(capsys, [
            "eval", "--model", model, "--data", str(tmp_path / "test"),
            "--report", str(report),
        ])
        assert code == 0
        doc = json.loads(report.read_text())
        assert set(doc) >= {"mae", "mse", "per_agent_mae"}
        assert len(doc["per_agent_mae"]) == 5

        graph_report = tmp_path / "graphs.json"
        csv_path = tmp_path / "stats.csv"
        code, _, _ = _run(capsys, [
            "graph-stats", "--data", data, "--out", str(graph_report),
            "--emit-csv", str(csv_path),
        ])
        assert code == 0
        doc = json.loads(graph_report.read_text())
        assert doc["prevalence"] and doc["records"]
        header = csv_path.read_text().splitlines()[0]
        assert header.startswith("dataset,datapoint,banzhaf.mean")

    def test_no_stray_temp_files(self, capsys, tmp_path):
        data = str(tmp_path / "d")
        _run(capsys, ["gen", "--method", "coinflip", "--k", "5", "--n", "4", "--m", "4",
                      "--c", "2", "--weights", "uniform", "--seed", "0", "--out", data])
        leftovers = [f for f in os.listdir(data) if f.startswith(".tmp-")]
        assert leftovers == []

    def test_label_zero_weight_reports_datapoint(self, capsys, tmp_path):
        # hand-craft a dataset whose only rule weight is zero
        from mcnpower import GenSpec, LabeledDataset, Rule, RuleSet, encode_rulesets, save_dataset

        rs = RuleSet(m=3, rules=(Rule(0b1, 0, 0.0),))
        ds = LabeledDataset(
            spec=GenSpec(method="uniform", k=1, n=1, m=3, seed=0),
            tensor=encode_rulesets([rs]),
        )
        save_dataset(ds, str(tmp_path / "z"))
        code, _, err = _run(capsys, [
            "label", "--index", "banzhaf", "--samples", "10", "--seed", "0",
            str(tmp_path / "z"),
        ])
        assert code == 1
        assert "datapoint 0" in err


class TestPipeline:
    def _config(self, tmp_path, seed=5):
        return {
            "seed": seed,
            "stages": [
                {"stage": "gen", "method": "uniform", "k": 24, "n": 5, "m": 4,
                 "p": 0.5, "weights": "uniform", "out": "data"},
                {"stage": "label", "data": "data", "index": "banzhaf", "samples": 60},
                {"stage": "split", "data": "data", "ratio": 0.75,
                 "train_out": "train", "test_out": "test"},
                {"stage": "train", "data": "train", "epochs": 2, "batch": 8,
                 "lr": 0.001, "out": "model"},
                {"stage": "eval", "model": "model", "data": "test",
                 "report": "eval.json"},
                {"stage": "graph-stats", "data": "data", "out": "graphs.json"},
            ],
        }

    def _write(self, tmp_path, config, name="pipe.json"):
        path = tmp_path / name
        path.write_text(json.dumps(config))
        return str(path)

    def test_full_pipeline_produces_all_artifacts(self, capsys, tmp_path):
        code, _, err = _run(capsys, ["pipeline", self._write(tmp_path, self._config(tmp_path))])
        assert code == 0, err
        for artifact in ("data/meta.json", "data/tensor.bin", "data/labels.bin",
                         "train/tensor.bin", "test/tensor.bin",
                         "model/model.json", "model/weights.bin",
                         "eval.json", "graphs.json"):
            assert (tmp_path / artifact).exists(), artifact

    def test_rerun_is_byte_identical(self, capsys, tmp_path):
        for sub in ("one", "two"):
            (tmp_path / sub).mkdir()
            config = self._write(tmp_path / sub, self._config(tmp_path))
            code, _, _ = _run(capsys, ["pipeline", config])
            assert code == 0
        for artifact in ("data/tensor.bin", "data/labels.bin", "model/weights.bin"):
            assert _sha(tmp_path / "one" / artifact) == _sha(tmp_path / "two" / artifact)

    def test_unknown_stage_key_named_in_error(self, capsys, tmp_path):
        config = self._config(tmp_path)
        config["stages"][0]["bogus_knob"] = 1
        code, _, err = _run(capsys, ["pipeline", self._write(tmp_path, config)])
        assert code == 1
        assert "bogus_knob" in err

    def test_unknown_top_level_key_rejected(self, capsys, tmp_path):
        config = self._config(tmp_path)
        config["extra"] = True
        code, _, err = _run(capsys, ["pipeline", self._write(tmp_path, config)])
        assert code == 1
        assert "extra" in err

    def test_failing_stage_is_identified(self, capsys, tmp_path):
        config = {
            "seed": 1,
            "stages": [
                {"stage": "label", "data": "missing", "index": "banzhaf", "samples": 10},
            ],
        }
        code, _, err = _run(capsys, ["pipeline", self._write(tmp_path, config)])
        assert code == 1
        assert "stage 0 (label)" in err
