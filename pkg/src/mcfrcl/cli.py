"""Command-line front end: JSON config, single runs, lambda sweeps, baseline
comparison, and multi-seed aggregation.

The config file is the source of truth; flags only pick the config path, the
output directory, and optional seed/lambda overrides. Example:

    mcfrcl --config experiment.json --out results/
    mcfrcl --config experiment.json --out results/ --sweep-lambda 1e-3,1e-2
    mcfrcl --config experiment.json --out results/ --baseline
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import gzip
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .bnn import Architecture
from .data import (DEFAULT_SPLIT_PAIRS, SyntheticSpec, TaskBundle,
                   load_idx_images, load_idx_labels, make_split_tasks,
                   make_synthetic_split)
from .errors import ConfigError
from .reporting import (RunReport, average_accuracy, backward_transfer,
                        config_hash, emit)
from .trainer import ContinualTrainer, TrainConfig

DATA_DIR_ENV = "MCFRCL_DATA_DIR"

IDX_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


@dataclass
class ExperimentConfig:
    dataset: str = "synthetic"
    data_dir: Optional[str] = None
    class_pairs: Sequence[Sequence[int]] = DEFAULT_SPLIT_PAIRS
    max_train_per_task: Optional[int] = None
    synthetic: Dict = field(default_factory=dict)
    hidden: Sequence[int] = (256, 256)
    runs: int = 1
    plot: bool = False
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.dataset not in ("synthetic", "mnist", "fmnist"):
            raise ConfigError(f"unknown dataset {self.dataset!r}")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")

    def resolved_data_dir(self) -> Path:
        path = self.data_dir or os.environ.get(DATA_DIR_ENV)
        if path is None:
            raise ConfigError(
                f"dataset {self.dataset!r} needs data_dir or ${DATA_DIR_ENV}")
        return Path(path)

    def as_dict(self) -> Dict:
        d = dataclasses.asdict(self)
        d["class_pairs"] = [list(p) for p in self.class_pairs]
        d["hidden"] = list(self.hidden)
        return d


_TRAIN_FIELDS = {f.name for f in dataclasses.fields(TrainConfig)}
_TOP_FIELDS = {f.name for f in dataclasses.fields(ExperimentConfig)} - {"train"}
_SYN_FIELDS = {f.name for f in dataclasses.fields(SyntheticSpec)}


def load_config(path: Path) -> ExperimentConfig:
    """Parse and validate a JSON experiment config; unknown keys are rejected."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return config_from_dict(raw)


def config_from_dict(raw: Dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    top, train = {}, {}
    for key, value in raw.items():
        if key in _TOP_FIELDS:
            top[key] = value
        elif key in _TRAIN_FIELDS:
            train[key] = value
        else:
            raise ConfigError(f"unknown config key {key!r}")
    syn = top.get("synthetic", {})
    if not isinstance(syn, dict):
        raise ConfigError("'synthetic' must be an object")
    for key in syn:
        if key not in _SYN_FIELDS:
            raise ConfigError(f"unknown config key 'synthetic.{key}'")
    config = ExperimentConfig(**top, train=TrainConfig(**train))
    if config.dataset in ("mnist", "fmnist"):
        data_dir = config.resolved_data_dir()
        for name in IDX_FILES.values():
            if not ((data_dir / name).exists()
                    or (data_dir / (name + ".gz")).exists()):
                raise ConfigError(f"missing dataset file {data_dir / name}")
    return config


# -- dataset / model construction ---------------------------------------------

def _read_idx_file(data_dir: Path, name: str) -> bytes:
    plain, gz = data_dir / name, data_dir / (name + ".gz")
    if plain.exists():
        return plain.read_bytes()
    return gzip.decompress(gz.read_bytes())


def build_tasks(config: ExperimentConfig) -> List[TaskBundle]:
    if config.dataset == "synthetic":
        return make_synthetic_split(SyntheticSpec(**config.synthetic))
    data_dir = config.resolved_data_dir()
    x_train = load_idx_images(_read_idx_file(data_dir, IDX_FILES["train_images"]))
    y_train = load_idx_labels(_read_idx_file(data_dir, IDX_FILES["train_labels"]))
    x_test = load_idx_images(_read_idx_file(data_dir, IDX_FILES["test_images"]))
    y_test = load_idx_labels(_read_idx_file(data_dir, IDX_FILES["test_labels"]))
    return make_split_tasks(x_train, y_train, x_test, y_test,
                            config.class_pairs,
                            max_train_per_task=config.max_train_per_task,
                            seed=config.train.seed)


def build_architecture(config: ExperimentConfig,
                       tasks: List[TaskBundle]) -> Architecture:
    return Architecture(
        input_dim=tasks[0].x_train.shape[1],
        hidden=list(config.hidden),
        head_sizes=[b.n_outputs for b in tasks],
        head_mode=config.train.head_mode)


# -- experiment orchestration -------------------------------------------------

def run_single(config: ExperimentConfig, seed: int,
               tasks: Optional[List[TaskBundle]] = None) -> RunReport:
    """Train all tasks sequentially under one seed and return the report."""
    tasks = tasks if tasks is not None else build_tasks(config)
    train_cfg = dataclasses.replace(config.train, seed=seed)
    trainer = ContinualTrainer(
        build_architecture(config, tasks), train_cfg)
    echo = config.as_dict()
    echo["train"]["seed"] = seed
    report = RunReport(seed=seed, config=echo)
    start = time.perf_counter()
    for bundle in tasks:
        trainer.train_task(bundle)
        report.record_stage(
            [trainer.evaluate(tasks[tau]) for tau in range(trainer.completed)])
    report.epoch_logs = trainer.epoch_logs
    report.total_time_s = time.perf_counter() - start
    return report


def aggregate(reports: List[RunReport]) -> Dict:
    """Mean and sample standard deviation of average accuracy and BT."""
    accs = [average_accuracy(r) for r in reports]
    bts = [backward_transfer(r) for r in reports] \
        if reports[0].n_stages >= 2 else []
    def stats(xs):
        if not xs:
            return None, None
        mean = float(np.mean(xs))
        std = float(np.std(xs, ddof=1)) if len(xs) > 1 else 0.0
        return mean, std
    acc_mean, acc_std = stats(accs)
    bt_mean, bt_std = stats(bts)
    return {
        "n_seeds": len(reports),
        "avg_accuracy_mean": acc_mean,
        "avg_accuracy_std": acc_std,
        "bt_mean": bt_mean,
        "bt_std": bt_std,
        "config_hash": config_hash(reports[0].config),
    }


def run(config: ExperimentConfig, out_dir: Path,
        tasks: Optional[List[TaskBundle]] = None) -> Dict:
    """Run `config.runs` seeds (base seed + i), emit per-seed reports and an
    aggregate summary under `out_dir`."""
    out_dir = Path(out_dir)
    tasks = tasks if tasks is not None else build_tasks(config)
    reports = []
    failures = []
    for i in range(config.runs):
        seed = config.train.seed + i
        try:
            report = run_single(config, seed, tasks)
        except Exception as exc:  # record, keep other seeds alive
            failures.append({"seed": seed, "error": repr(exc)})
            continue
        emit(report, out_dir / f"seed-{i}", plot=config.plot)
        reports.append(report)
    if not reports:
        raise RuntimeError(f"all seeds failed: {failures}")
    agg = aggregate(reports)
    agg["incomplete_seeds"] = failures
    with open(out_dir / "aggregate.json", "w", encoding="utf-8") as f:
        json.dump(agg, f, indent=2, sort_keys=True)
        f.write("\n")
    return agg


def sweep_lambda(config: ExperimentConfig, lambdas: Sequence[float],
                 out_dir: Path) -> List[Dict]:
    """One aggregate per lambda; the best average accuracy is flagged."""
    out_dir = Path(out_dir)
    tasks = build_tasks(config)
    rows = []
    for lam in lambdas:
        cfg = dataclasses.replace(
            config, train=dataclasses.replace(config.train, lam=lam))
        agg = run(cfg, out_dir / f"lambda-{lam:g}", tasks)
        rows.append({"lam": lam, **agg})
    best = max(range(len(rows)), key=lambda i: rows[i]["avg_accuracy_mean"])
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "sweep.csv", "w", newline="\n", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["lambda", "avg_accuracy_mean", "avg_accuracy_std",
                    "bt_mean", "bt_std", "best"])
        for i, row in enumerate(rows):
            w.writerow([repr(float(row["lam"])),
                        repr(row["avg_accuracy_mean"]),
                        repr(row["avg_accuracy_std"]),
                        "" if row["bt_mean"] is None else repr(row["bt_mean"]),
                        "" if row["bt_std"] is None else repr(row["bt_std"]),
                        int(i == best)])
    return rows


def compare_baseline(config: ExperimentConfig, out_dir: Path) -> Dict:
    """Same seeds with configured lambda vs lambda = 0 (naive fine-tuning)."""
    out_dir = Path(out_dir)
    tasks = build_tasks(config)
    regularised = run(config, out_dir / "regularised", tasks)
    base_cfg = dataclasses.replace(
        config, train=dataclasses.replace(config.train, lam=0.0))
    baseline = run(base_cfg, out_dir / "baseline", tasks)
    delta = {
        "regularised": regularised,
        "baseline": baseline,
        "delta_avg_accuracy":
            regularised["avg_accuracy_mean"] - baseline["avg_accuracy_mean"],
        "delta_bt": None if regularised["bt_mean"] is None
            else regularised["bt_mean"] - baseline["bt_mean"],
    }
    with open(out_dir / "baseline_compare.csv", "w", newline="\n",
              encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["arm", "avg_accuracy_mean", "bt_mean", "config_hash"])
        for arm, agg in (("regularised", regularised), ("baseline", baseline)):
            w.writerow([arm, repr(agg["avg_accuracy_mean"]),
                        "" if agg["bt_mean"] is None else repr(agg["bt_mean"]),
                        agg["config_hash"]])
    with open(out_dir / "baseline_compare.json", "w", encoding="utf-8") as f:
        json.dump(delta, f, indent=2, sort_keys=True)
        f.write("\n")
    return delta


# -- entry point --------------------------------------------------------------

def _parse_args(argv):
    parser = argparse.ArgumentParser(
        prog="mcfrcl",
        description="Continual learning with MC functional regularisation")
    parser.add_argument("--config", required=True, type=Path)
    parser.add_argument("--out", required=True, type=Path)
    parser.add_argument("--seed", type=int, default=None,
                        help="override the base run seed")
    parser.add_argument("--lambda", dest="lam", type=float, default=None,
                        help="override the regularisation coefficient")
    parser.add_argument("--sweep-lambda", default=None,
                        help="comma-separated lambda grid")
    parser.add_argument("--baseline", action="store_true",
                        help="also run the lambda = 0 arm and emit a delta table")
    return parser.parse_args(argv)


def main(argv=None) -> int:
    args = _parse_args(argv)
    try:
        config = load_config(args.config)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.lam is not None:
            overrides["lam"] = args.lam
        if overrides:
            config = dataclasses.replace(
                config, train=dataclasses.replace(config.train, **overrides))
        if args.sweep_lambda:
            lambdas = [float(s) for s in args.sweep_lambda.split(",") if s]
            sweep_lambda(config, lambdas, args.out)
        elif args.baseline:
            compare_baseline(config, args.out)
        else:
            run(config, args.out)
    except Exception as exc:
        json.dump({"error": type(exc).__name__, "detail": str(exc)},
                  sys.stderr, sort_keys=True)
        sys.stderr.write("\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
