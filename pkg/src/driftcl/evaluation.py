"""Accuracy matrix, Average Accuracy / Average Forgetting, and the experiment loop."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import TaskStream
from .errors import EvaluationError
from .nn import Model, ModelConfig, init_model, predict
from .training import TrainConfig, train_task


def evaluate(model: Model, split) -> float:
    """Fraction of correctly predicted labels; no task id is consumed."""
    if len(split.labels) == 0:
        raise EvaluationError("cannot evaluate on an empty set")
    return float(np.mean(predict(model, split.features) == split.labels))


class AccuracyMatrix:
    """Lower-triangular ``a[t][j]``: accuracy on task ``j`` after training task ``t`` (0-indexed)."""

    def __init__(self, rows=None):
        self.rows: list[list[float]] = []
        for row in rows or []:
            self.append_row(row)

    def append_row(self, row) -> None:
        row = [float(v) for v in row]
        if len(row) != len(self.rows) + 1:
            raise EvaluationError(f"row {len(self.rows)} must have {len(self.rows) + 1} entries, got {len(row)}")
        if any(not 0.0 <= v <= 1.0 for v in row):
            raise EvaluationError(f"accuracies must lie in [0, 1], got {row}")
        self.rows.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    def __getitem__(self, t: int) -> list[float]:
        return self.rows[t]

    def to_list(self) -> list[list[float]]:
        return [list(r) for r in self.rows]


def _rows(matrix) -> list:
    return matrix.rows if isinstance(matrix, AccuracyMatrix) else matrix


def _check_t(rows, t: int) -> None:
    if t < 1 or t > len(rows):
        raise EvaluationError(f"task index {t} outside the completed rows 1..{len(rows)}")
    for k in range(t):
        if len(rows[k]) < k + 1:
            raise EvaluationError(f"row {k + 1} is incomplete")


def avg_accuracy(matrix, t: int) -> float:
    """Mean accuracy over tasks ``1..t`` after training task ``t`` (1-indexed)."""
    rows = _rows(matrix)
    _check_t(rows, t)
    return float(sum(rows[t - 1][:t]) / t)


def avg_forgetting(matrix, t: int) -> float:
    """Mean over earlier tasks of (best accuracy before ``t``) minus (accuracy at ``t``).

    Negative values mean the task got better after later training.
    """
    rows = _rows(matrix)
    _check_t(rows, t)
    if t == 1:
        return 0.0
    drops = [max(rows[k][j] for k in range(j, t - 1)) - rows[t - 1][j] for j in range(t - 1)]
    return float(sum(drops) / (t - 1))


@dataclass
class TaskResult:
    task: int  # 1-indexed
    train_acc: float
    avg_acc: float
    avg_forgetting: float


@dataclass
class MetricsReport:
    strategy: str
    matrix: AccuracyMatrix
    train_acc: list[float]
    curves: list[tuple[int, int, float]] = field(default_factory=list)  # (task, epoch, test acc)
    metadata: dict = field(default_factory=dict)

    @property
    def results(self) -> list[TaskResult]:
        return [
            TaskResult(t, self.train_acc[t - 1], avg_accuracy(self.matrix, t), avg_forgetting(self.matrix, t))
            for t in range(1, len(self.matrix) + 1)
        ]

    def final(self) -> TaskResult:
        return self.results[-1]

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "matrix": self.matrix.to_list(),
            "train_acc": list(self.train_acc),
            "results": [vars(r) for r in self.results],
            "metadata": dict(self.metadata),
        }


def run_strategy(
    stream: TaskStream,
    strategy,
    train_config: TrainConfig = TrainConfig(),
    model_config: Optional[ModelConfig] = None,
    seed: int = 0,
    record_curves: bool = True,
) -> MetricsReport:
    """Train ``strategy`` over every task in order and fill the accuracy matrix.

    ``seed`` drives batch shuffling; the model is initialized from
    ``model_config.seed``.
    """
    model_config = model_config or ModelConfig(input_dim=stream.input_dim)
    model = init_model(model_config)
    matrix = AccuracyMatrix()
    train_acc: list[float] = []
    curves: list[tuple[int, int, float]] = []
    started = time.perf_counter()
    name = getattr(strategy, "name", type(strategy).__name__)

    for ti, task in enumerate(stream):
        strategy.before_task(model, task)

        def epoch_end(epoch, ti=ti, task=task):
            if record_curves:
                curves.append((ti + 1, epoch + 1, evaluate(model, task.test)))

        train_task(model, task.train, strategy, train_config, seed, ti, epoch_end, context=f"strategy {name}, ")
        strategy.after_task(model, task)
        scored = strategy.eval_model(model)
        matrix.append_row([evaluate(scored, stream[j].test) for j in range(ti + 1)])
        train_acc.append(evaluate(scored, task.train))

    return MetricsReport(
        strategy=name,
        matrix=matrix,
        train_acc=train_acc,
        curves=curves,
        metadata={"seed": seed, "wall_time_s": time.perf_counter() - started},
    )
