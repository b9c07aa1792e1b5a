"""Run reports: accuracy matrix, average accuracy, backward transfer, emission.

Backward transfer uses the GEM-style definition
    BT = (1/(T-1)) * sum_{tau<T} (A[T][tau] - A[tau][tau]),
where A[t][tau] is the accuracy on task tau after finishing task t; negative
values mean forgetting. Accuracies are stored as fractions in [0, 1].
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

from .trainer import EpochLog


@dataclass
class RunReport:
    seed: int
    config: Dict
    # accuracies[t][tau]: accuracy on task tau after training task t (tau <= t)
    accuracies: List[List[float]] = field(default_factory=list)
    epoch_logs: List[EpochLog] = field(default_factory=list)
    total_time_s: float = 0.0

    @property
    def n_stages(self) -> int:
        return len(self.accuracies)

    def record_stage(self, row: List[float]) -> None:
        if len(row) != self.n_stages + 1:
            raise ValueError(
                f"stage {self.n_stages + 1} needs {self.n_stages + 1} "
                f"accuracies, got {len(row)}")
        if any(not 0.0 <= a <= 1.0 for a in row):
            raise ValueError("accuracies must lie in [0, 1]")
        self.accuracies.append(list(row))


def config_hash(config: Dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def _check_complete(report: RunReport) -> None:
    for t, row in enumerate(report.accuracies):
        if len(row) != t + 1:
            raise ValueError(f"incomplete accuracy matrix at stage {t + 1}")
    if not report.accuracies:
        raise ValueError("empty accuracy matrix")


def average_accuracy(report: RunReport) -> float:
    """Mean final-stage accuracy over all tasks."""
    _check_complete(report)
    last = report.accuracies[-1]
    return sum(last) / len(last)


def backward_transfer(report: RunReport) -> float:
    _check_complete(report)
    t_final = report.n_stages
    if t_final < 2:
        raise ValueError("backward transfer needs at least 2 tasks")
    last = report.accuracies[-1]
    deltas = [last[tau] - report.accuracies[tau][tau]
              for tau in range(t_final - 1)]
    return sum(deltas) / (t_final - 1)


def emit(report: RunReport, out_dir: Path,
         plot: bool = False) -> None:
    """Write accuracy_matrix.csv and summary.csv (UTF-8, LF, '.' decimals)."""
    _check_complete(report)
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "accuracy_matrix.csv", "w", newline="\n",
                  encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["stage", "task", "accuracy"])
            for t, row in enumerate(report.accuracies):
                for tau, acc in enumerate(row):
                    w.writerow([t + 1, tau + 1, repr(float(acc))])
        bt = "" if report.n_stages < 2 else repr(backward_transfer(report))
        with open(out_dir / "summary.csv", "w", newline="\n",
                  encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["avg_accuracy", "bt", "total_time_s", "config_hash"])
            w.writerow([repr(average_accuracy(report)), bt,
                        repr(float(report.total_time_s)),
                        config_hash(report.config)])
        with open(out_dir / "config.json", "w", encoding="utf-8") as f:
            json.dump(report.config, f, indent=2, sort_keys=True)
            f.write("\n")
    except OSError as exc:
        raise OSError(f"failed writing report under {out_dir}: {exc}") from exc
    if plot:
        _emit_plot(report, out_dir / "accuracy.svg")


def _emit_plot(report: RunReport, path: Path) -> None:
    import matplotlib
    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.5))
    n_tasks = report.n_stages
    for tau in range(n_tasks):
        stages = list(range(tau + 1, n_tasks + 1))
        accs = [report.accuracies[t - 1][tau] for t in stages]
        ax.plot(stages, accs, marker="o", label=f"task {tau + 1}")
    ax.set_xlabel("training stage")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0, 1.02)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
