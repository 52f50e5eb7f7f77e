"""Samples, task streams, target binning, CSV I/O and the synthetic drift generator.

A stream is an ordered list of tasks (regimes between system upgrades). Every
task shares one input distribution; only the mapping from monitoring
features to normalized I/O performance changes between tasks.
"""

from __future__ import annotations

import csv
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import ConfigurationError, DataError
from .seeding import derive_seed

FEATURE_COLUMNS = (
    "perc_ost_full",
    "ave_oss_cpu",
    "ave_mds_cpu",
    "num_conc_jobs",
    "fs_read_vol",
    "fs_write_vol",
    "num_mkdir_op",
    "num_rename_op",
    "num_rmdir_op",
    "num_unlink_op",
)
CSV_COLUMNS = FEATURE_COLUMNS + ("target", "task_id")

N_BINS = 10
_BIN_SLACK = 1e-9


@dataclass(frozen=True)
class Sample:
    features: np.ndarray
    target_raw: float
    label: int
    task_id: int


def bin_target(y: float, n_bins: int = N_BINS) -> int:
    """Equal-width bin of a normalized target; ``y == 1`` falls in the top bin."""
    y = float(y)
    if not math.isfinite(y) or y < -_BIN_SLACK or y > 1.0 + _BIN_SLACK:
        raise DataError(f"target {y!r} outside [0, 1]")
    y = min(max(y, 0.0), 1.0)
    return min(int(math.floor(y * n_bins)), n_bins - 1)


def bin_targets(y: np.ndarray, n_bins: int = N_BINS) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    bad = ~np.isfinite(y) | (y < -_BIN_SLACK) | (y > 1.0 + _BIN_SLACK)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise DataError(f"target {y[i]!r} at index {i} outside [0, 1]")
    y = np.clip(y, 0.0, 1.0)
    return np.minimum(np.floor(y * n_bins).astype(np.int64), n_bins - 1)


@dataclass
class Split:
    """Column-oriented batch of samples from a single task."""

    features: np.ndarray
    targets: np.ndarray
    task_id: int
    labels: np.ndarray = field(default=None)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        if self.features.ndim != 2 or self.features.shape[0] != self.targets.shape[0]:
            raise DataError(
                f"features {self.features.shape} and targets {self.targets.shape} disagree"
            )
        derived = bin_targets(self.targets)
        if self.labels is None:
            self.labels = derived
        else:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if not np.array_equal(self.labels, derived):
                raise DataError("labels do not match the binned targets")

    def __len__(self) -> int:
        return self.targets.shape[0]

    def __getitem__(self, i: int) -> Sample:
        return Sample(self.features[i], float(self.targets[i]), int(self.labels[i]), self.task_id)

    def __iter__(self) -> Iterator[Sample]:
        return (self[i] for i in range(len(self)))

    def take(self, idx) -> "Split":
        idx = np.asarray(idx, dtype=np.intp)
        return Split(self.features[idx], self.targets[idx], self.task_id, self.labels[idx])

    @classmethod
    def from_samples(cls, samples: Sequence[Sample], task_id: int | None = None) -> "Split":
        if not samples:
            raise DataError("cannot build a split from zero samples")
        tid = samples[0].task_id if task_id is None else task_id
        return cls(
            np.stack([s.features for s in samples]),
            np.array([s.target_raw for s in samples]),
            tid,
            np.array([s.label for s in samples]),
        )


@dataclass
class Task:
    task_id: int
    train: Split
    test: Split

    def __post_init__(self):
        if len(self.train) == 0 or len(self.test) == 0:
            raise DataError(f"task {self.task_id} needs non-empty train and test splits")
        for part in (self.train, self.test):
            if part.task_id != self.task_id:
                raise DataError(f"split tagged {part.task_id} placed in task {self.task_id}")


@dataclass
class TaskStream:
    tasks: list[Task]

    def __post_init__(self):
        if not self.tasks:
            raise DataError("a stream needs at least one task")
        ids = [t.task_id for t in self.tasks]
        if any(b <= a for a, b in zip(ids, ids[1:])):
            raise DataError(f"task ids must be strictly increasing, got {ids}")

    def __len__(self) -> int:
        return len(self.tasks)

    def __iter__(self) -> Iterator[Task]:
        return iter(self.tasks)

    def __getitem__(self, i: int) -> Task:
        return self.tasks[i]

    @property
    def input_dim(self) -> int:
        return self.tasks[0].train.features.shape[1]

    def prefix(self, n: int) -> "TaskStream":
        return TaskStream(self.tasks[:n])


def split(samples: Split, fraction: float, seed: int) -> tuple[Split, Split]:
    """Seeded shuffle, then the first ``round(fraction * n)`` rows become train."""
    n = len(samples)
    if not 0.0 < fraction < 1.0:
        raise DataError(f"split fraction must be in (0, 1), got {fraction}")
    if n < 2:
        raise DataError(f"task {samples.task_id}: need at least 2 samples to split, got {n}")
    n_train = min(max(int(round(fraction * n)), 1), n - 1)
    order = np.random.default_rng(seed).permutation(n)
    return samples.take(order[:n_train]), samples.take(order[n_train:])


@dataclass(frozen=True)
class DriftGenConfig:
    n_tasks: int = 3
    samples_per_task: int = 1000
    input_dim: int = 10
    drift_strength: float = 4.0
    noise_sd: float = 0.05
    seed: int = 0
    split_fraction: float = 0.8

    def __post_init__(self):
        if self.n_tasks < 2:
            raise ConfigurationError("n_tasks must be >= 2: drift needs at least one boundary")
        if self.samples_per_task < 50:
            raise ConfigurationError("samples_per_task must be >= 50")
        if self.input_dim < 2:
            raise ConfigurationError("input_dim must be >= 2 to host a rotation plane")
        if not self.drift_strength > 0:
            raise ConfigurationError("drift_strength must be > 0")
        if not self.noise_sd >= 0:
            raise ConfigurationError("noise_sd must be >= 0")
        if not 0.0 < self.split_fraction < 1.0:
            raise ConfigurationError("split_fraction must be in (0, 1)")


ROTATION_RADIANS = 2.0 * math.pi / 3.0


def task_weights(config: DriftGenConfig) -> np.ndarray:
    """Per-task weight vectors, shape ``(n_tasks, input_dim)``.

    ``w_0`` is random with norm ``drift_strength``; the rotation plane is
    spanned by ``w_0`` and a random orthogonal direction, so each step turns
    the whole vector by 120 degrees.
    """
    rng = np.random.default_rng(derive_seed(config.seed, "weights"))
    u = rng.standard_normal(config.input_dim)
    u /= np.linalg.norm(u)
    r = rng.standard_normal(config.input_dim)
    v = r - (r @ u) * u
    v /= np.linalg.norm(v)
    angles = ROTATION_RADIANS * np.arange(config.n_tasks)
    return config.drift_strength * (np.cos(angles)[:, None] * u + np.sin(angles)[:, None] * v)


def _logistic(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def generate_stream(config: DriftGenConfig) -> TaskStream:
    weights = task_weights(config)
    tasks = []
    for t in range(config.n_tasks):
        rng = np.random.default_rng(derive_seed(config.seed, "samples", t))
        x = rng.standard_normal((config.samples_per_task, config.input_dim))
        noise = rng.normal(0.0, config.noise_sd, config.samples_per_task) if config.noise_sd else 0.0
        y = np.clip(_logistic(x @ weights[t]) + noise, 0.0, 1.0)
        train, test = split(Split(x, y, t), config.split_fraction, derive_seed(config.seed, "split", t))
        tasks.append(Task(t, train, test))
    return TaskStream(tasks)


def _parse_float(text: str, row: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"row {row}, column {column!r}: non-numeric value {text!r}") from None
    if not math.isfinite(value):
        raise DataError(f"row {row}, column {column!r}: non-finite value {text!r}")
    return value


def read_rows(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Parse a monitoring CSV into (features, targets, task_ids) without splitting."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"dataset file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip().lower() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        missing = [c for c in CSV_COLUMNS if c not in header]
        if missing:
            raise DataError(f"{path}: missing column(s) {', '.join(missing)}")
        index = {c: header.index(c) for c in CSV_COLUMNS}
        feats, targets, tids = [], [], []
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < len(header):
                raise DataError(f"row {row_no}: expected {len(header)} cells, got {len(row)}")
            feats.append([_parse_float(row[index[c]], row_no, c) for c in FEATURE_COLUMNS])
            y = _parse_float(row[index["target"]], row_no, "target")
            if y < -_BIN_SLACK or y > 1.0 + _BIN_SLACK:
                raise DataError(f"row {row_no}, column 'target': {y!r} outside [0, 1]")
            targets.append(min(max(y, 0.0), 1.0))
            tid = _parse_float(row[index["task_id"]], row_no, "task_id")
            if tid != int(tid) or tid < 0:
                raise DataError(f"row {row_no}, column 'task_id': {row[index['task_id']]!r} is not a non-negative integer")
            tids.append(int(tid))
    if not targets:
        raise DataError(f"{path}: no data rows")
    return np.array(feats, dtype=np.float64), np.array(targets), np.array(tids, dtype=np.int64)


def load_csv(path, split_fraction: float = 0.8, seed: int = 0, normalize: bool = True) -> TaskStream:
    """Read a monitoring CSV and build a task stream.

    Rows are grouped by ``task_id`` (ascending) and split per task. With
    ``normalize`` the features are z-scored using statistics of the first
    task's training split only; later regimes reuse those statistics.
    """
    x, y, tids = read_rows(path)
    groups: "OrderedDict[int, np.ndarray]" = OrderedDict(
        (int(t), np.flatnonzero(tids == t)) for t in np.unique(tids)
    )
    parts = []
    for t, idx in groups.items():
        if len(idx) < 2:
            raise DataError(f"task {t} has {len(idx)} row(s); at least 2 are needed")
        parts.append(split(Split(x[idx], y[idx], t), split_fraction, derive_seed(seed, "split", t)))
    if normalize:
        first_train = parts[0][0].features
        mean = first_train.mean(axis=0)
        sd = first_train.std(axis=0)
        sd[sd == 0] = 1.0
        parts = [
            (
                Split((tr.features - mean) / sd, tr.targets, tr.task_id, tr.labels),
                Split((te.features - mean) / sd, te.targets, te.task_id, te.labels),
            )
            for tr, te in parts
        ]
    return TaskStream([Task(tr.task_id, tr, te) for tr, te in parts])


def save_csv(stream: TaskStream, path) -> None:
    """Write every sample (train rows then test rows, task by task)."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for task in stream:
            for part in (task.train, task.test):
                for feats, target in zip(part.features, part.targets):
                    writer.writerow([f"{v:.17g}" for v in feats] + [f"{target:.17g}", task.task_id])


def class_histogram(stream: TaskStream, n_bins: int = N_BINS) -> np.ndarray:
    """Label counts per task (train and test together), shape ``(n_tasks, n_bins)``."""
    return np.stack(
        [
            np.bincount(np.concatenate([t.train.labels, t.test.labels]), minlength=n_bins)
            for t in stream
        ]
    )
