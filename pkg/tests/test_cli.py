import json

import pytest

from mcfrcl.cli import (compare_baseline, config_from_dict, load_config, main,
                        run, run_single, sweep_lambda)
from mcfrcl.errors import ConfigError
from mcfrcl.reporting import config_hash


def tiny_config_dict(**overrides):
    base = {
        "dataset": "synthetic",
        "synthetic": {"n_tasks": 2, "train_per_task": 48, "test_per_task": 48},
        "hidden": [8],
        "divergence": "gw",
        "lam": 0.01,
        "epochs": 1,
        "n_batch": 16,
        "n_context": 4,
        "s_batch": 2,
        "s_context": 3,
        "coreset_size": 8,
        "seed": 3,
    }
    base.update(overrides)
    return base


def _without_time(path):
    import csv
    with open(path, encoding="utf-8") as f:
        header, row = list(csv.reader(f))
    cells = dict(zip(header, row))
    cells.pop("total_time_s")
    return cells


def write_config(tmp_path, **overrides):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(tiny_config_dict(**overrides)))
    return path


class TestLoadConfig:
    def test_defaults_fill_from_empty_object(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("{}")
        config = load_config(path)
        assert config.dataset == "synthetic"
        assert config.train.lr == 0.0005
        assert config.train.beta1 == 0.9
        assert config.train.beta2 == 0.999
        assert config.train.n_batch == 128
        assert config.train.s_batch == 30
        assert config.train.s_context == 30
        assert config.train.n_context == 40

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text('{"foo": 1}')
        with pytest.raises(ConfigError, match="foo"):
            load_config(path)

    def test_unknown_nested_key_rejected(self):
        with pytest.raises(ConfigError, match="synthetic.bar"):
            config_from_dict({"synthetic": {"bar": 1}})

    def test_negative_lambda_rejected(self):
        with pytest.raises(ConfigError, match="lam"):
            config_from_dict({"lam": -1.0})

    def test_missing_dataset_files_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="missing dataset"):
            config_from_dict({"dataset": "mnist", "data_dir": str(tmp_path)})

    def test_missing_config_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "absent.json")


class TestRun:
    def test_single_run_aggregate_has_empty_std(self, tmp_path):
        config = config_from_dict(tiny_config_dict(runs=1))
        agg = run(config, tmp_path)
        assert agg["n_seeds"] == 1
        assert agg["avg_accuracy_std"] == 0.0
        assert (tmp_path / "seed-0" / "accuracy_matrix.csv").exists()

    def test_repeat_invocations_identical(self, tmp_path):
        config = config_from_dict(tiny_config_dict(runs=2))
        run(config, tmp_path / "a")
        run(config, tmp_path / "b")
        for sub in ("seed-0", "seed-1"):
            assert (tmp_path / "a" / sub / "accuracy_matrix.csv").read_bytes() \
                == (tmp_path / "b" / sub / "accuracy_matrix.csv").read_bytes()
            # summary.csv carries wall-clock time; compare everything else
            assert _without_time(tmp_path / "a" / sub / "summary.csv") \
                == _without_time(tmp_path / "b" / sub / "summary.csv")

    def test_config_echo_reproduces_report(self, tmp_path):
        config = config_from_dict(tiny_config_dict())
        report = run_single(config, config.train.seed)
        echoed = dict(report.config)
        echoed.pop("train")
        echoed.update(report.config["train"])
        rebuilt = config_from_dict(echoed)
        report2 = run_single(rebuilt, rebuilt.train.seed)
        assert report.accuracies == report2.accuracies
        assert config_hash(report.config) == config_hash(report2.config)


class TestSweepAndBaseline:
    def test_sweep_flags_best(self, tmp_path):
        config = config_from_dict(tiny_config_dict())
        rows = sweep_lambda(config, [0.001, 0.01], tmp_path)
        assert len(rows) == 2
        content = (tmp_path / "sweep.csv").read_text()
        assert content.count("\n") == 3
        assert ",1" in content  # one best flag set

    def test_baseline_lambda_zero_both_arms_identical(self, tmp_path):
        config = config_from_dict(tiny_config_dict(lam=0.0))
        delta = compare_baseline(config, tmp_path)
        assert delta["delta_avg_accuracy"] == 0.0
        assert delta["delta_bt"] == 0.0

    def test_baseline_output_contains_both_hashes(self, tmp_path):
        config = config_from_dict(tiny_config_dict())
        compare_baseline(config, tmp_path)
        content = (tmp_path / "baseline_compare.csv").read_text()
        lines = content.strip().split("\n")
        assert len(lines) == 3
        h1, h2 = lines[1].split(",")[-1], lines[2].split(",")[-1]
        assert h1 != h2  # lambda differs between arms


class TestMain:
    def test_success_exit_code(self, tmp_path):
        path = write_config(tmp_path)
        assert main(["--config", str(path), "--out", str(tmp_path / "out")]) == 0

    def test_failure_emits_machine_readable_error(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text('{"foo": 1}')
        code = main(["--config", str(path), "--out", str(tmp_path / "out")])
        assert code != 0
        err = json.loads(capsys.readouterr().err)
        assert "foo" in err["detail"]

    def test_lambda_and_seed_overrides(self, tmp_path):
        path = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["--config", str(path), "--out", str(out),
                     "--seed", "9", "--lambda", "0.5"]) == 0
        echoed = json.loads((out / "seed-0" / "config.json").read_text())
        assert echoed["train"]["lam"] == 0.5
        assert echoed["train"]["seed"] == 9
