"""Minibatch iteration and the per-task training loop shared by harness and GDumb."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, NamedTuple, Optional

import numpy as np

from .errors import ConfigurationError, DriftCLError
from .nn import AdamState, Model, adam_step, backward
from .seeding import derive_seed


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 60
    batch_size: int = 4
    learning_rate: float = 0.001

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigurationError("epochs and batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be > 0")


class Batch(NamedTuple):
    features: np.ndarray
    targets: np.ndarray
    labels: np.ndarray
    task_id: int


def minibatch_indices(n: int, batch_size: int, seed: int) -> Iterator[np.ndarray]:
    """One epoch of shuffled index batches; the last short batch is kept."""
    order = np.random.default_rng(seed).permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def shuffle_seed(run_seed: int, task_index: int, epoch: int) -> int:
    return derive_seed(run_seed, "shuffle", task_index, epoch)


def _with_context(exc: DriftCLError, context: str) -> DriftCLError:
    wrapped = type(exc)(f"{context}: {exc}")
    wrapped.__cause__ = exc
    return wrapped


def train_task(
    model: Model,
    split,
    strategy,
    config: TrainConfig,
    run_seed: int,
    task_index: int,
    epoch_end: Optional[Callable[[int], None]] = None,
    context: str = "",
) -> None:
    """Train ``model`` in place on one task's training split.

    Each step minimizes cross-entropy plus the strategy's extra loss terms,
    passes the gradient through ``strategy.modify_gradient``, applies Adam and
    then reports the step and the batch back to the strategy. A fresh Adam
    state is used for every task.
    """
    adam = AdamState.for_model(model, config.learning_rate)
    x, y, labels = split.features, split.targets, split.labels
    for epoch in range(config.epochs):
        seed = shuffle_seed(run_seed, task_index, epoch)
        for b, idx in enumerate(minibatch_indices(len(labels), config.batch_size, seed)):
            batch = Batch(x[idx], y[idx], labels[idx], split.task_id)
            try:
                terms = strategy.loss_terms(model, batch)
                lg = backward(model, batch.features, batch.labels, terms)
                grad = strategy.modify_gradient(lg.grad, model)
                delta = adam_step(model, grad, adam)
                strategy.on_step(lg.data_grad, delta)
                strategy.on_batch(batch, model)
            except DriftCLError as exc:
                raise _with_context(exc, f"{context}task {task_index}, epoch {epoch}, batch {b}") from exc
        if epoch_end is not None:
            epoch_end(epoch)


def fit_plain(model: Model, features: np.ndarray, labels: np.ndarray, config: TrainConfig, seed: int) -> Model:
    """Plain cross-entropy training with Adam; no strategy hooks."""
    adam = AdamState.for_model(model, config.learning_rate)
    for epoch in range(config.epochs):
        for idx in minibatch_indices(len(labels), config.batch_size, shuffle_seed(seed, 0, epoch)):
            lg = backward(model, features[idx], labels[idx])
            adam_step(model, lg.grad, adam)
    return model
