"""Experiment configuration: JSON file <-> dataclasses, plus seed fan-out.

A minimal file is ``{}``; every omitted field takes its default. The full
schema, with defaults::

    {
      "dataset": {
        "csv": null,
        "generator": {"n_tasks": 3, "samples_per_task": 1000, "input_dim": 10,
                      "drift_strength": 4.0, "noise_sd": 0.05},
        "split_fraction": 0.8,
        "normalize": true
      },
      "strategy": "naive",
      "strategies": ["naive", "ewc", "si", "lwf", "agem", "gss", "gdumb"],
      "strategy_params": {"ewc": {"lam": 0.5, "mode": "separate"}, ...},
      "model": {"hidden_sizes": [400, 400, 400], "n_classes": 10},
      "train": {"epochs": 60, "batch_size": 4, "learning_rate": 0.001},
      "seed": 0,
      "output_dir": "results",
      "workers": 1
    }
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from .data import DriftGenConfig, TaskStream, generate_stream, load_csv
from .errors import ConfigurationError
from .nn import ModelConfig
from .seeding import derive_seed
from .strategies import DEFAULT_PARAMS, STRATEGIES, make_strategy
from .training import TrainConfig


def _from_dict(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigurationError(f"{where} must be an object")
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigurationError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigurationError(f"{where}: {exc}") from None


@dataclass
class GeneratorSettings:
    n_tasks: int = 3
    samples_per_task: int = 1000
    input_dim: int = 10
    drift_strength: float = 4.0
    noise_sd: float = 0.05


@dataclass
class DatasetConfig:
    csv: Optional[str] = None
    generator: GeneratorSettings = field(default_factory=GeneratorSettings)
    split_fraction: float = 0.8
    normalize: bool = True

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetConfig":
        data = dict(data)
        gen = _from_dict(GeneratorSettings, data.pop("generator", {}), "dataset.generator")
        return _from_dict(cls, dict(data, generator=gen), "dataset")


@dataclass
class ModelSettings:
    hidden_sizes: list = field(default_factory=lambda: [400, 400, 400])
    n_classes: int = 10


@dataclass
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    strategy: str = "naive"
    strategies: list = field(default_factory=lambda: list(STRATEGIES))
    strategy_params: dict = field(default_factory=lambda: copy.deepcopy(DEFAULT_PARAMS))
    model: ModelSettings = field(default_factory=ModelSettings)
    train: dict = field(default_factory=lambda: asdict(TrainConfig()))
    seed: int = 0
    output_dir: str = "results"
    workers: int = 1

    def __post_init__(self):
        for name in [self.strategy, *self.strategies]:
            if name not in STRATEGIES:
                raise ConfigurationError(f"unknown strategy {name!r}; choose from {', '.join(STRATEGIES)}")
        if not self.strategies:
            raise ConfigurationError("strategies must name at least one strategy")
        merged = copy.deepcopy(DEFAULT_PARAMS)
        for name, params in self.strategy_params.items():
            if name not in STRATEGIES:
                raise ConfigurationError(f"strategy_params names unknown strategy {name!r}")
            unknown = set(params) - set(DEFAULT_PARAMS[name])
            if unknown:
                raise ConfigurationError(f"unknown parameter(s) for {name}: {', '.join(sorted(unknown))}")
            merged[name].update(params)
        self.strategy_params = merged
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")
        self.train_config  # validates
        self.model_config(self.dataset.generator.input_dim)
        if not 0.0 < self.dataset.split_fraction < 1.0:
            raise ConfigurationError("dataset.split_fraction must be in (0, 1)")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigurationError("config root must be a JSON object")
        data = dict(data)
        if "dataset" in data:
            data["dataset"] = DatasetConfig.from_dict(data["dataset"])
        if "model" in data:
            data["model"] = _from_dict(ModelSettings, data["model"], "model")
        if "train" in data:
            train = asdict(TrainConfig())
            unknown = set(data["train"]) - set(train)
            if unknown:
                raise ConfigurationError(f"unknown key(s) in train: {', '.join(sorted(unknown))}")
            train.update(data["train"])
            data["train"] = train
        return _from_dict(cls, data, "config")

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from None
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON: {exc}") from None

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def digest(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    @property
    def train_config(self) -> TrainConfig:
        try:
            return TrainConfig(**self.train)
        except TypeError as exc:
            raise ConfigurationError(f"train: {exc}") from None

    def model_config(self, input_dim: int) -> ModelConfig:
        return ModelConfig(
            input_dim=input_dim,
            hidden_sizes=tuple(self.model.hidden_sizes),
            n_classes=self.model.n_classes,
            seed=derive_seed(self.seed, "model"),
        )

    def generator_config(self) -> DriftGenConfig:
        g = self.dataset.generator
        return DriftGenConfig(
            n_tasks=g.n_tasks,
            samples_per_task=g.samples_per_task,
            input_dim=g.input_dim,
            drift_strength=g.drift_strength,
            noise_sd=g.noise_sd,
            seed=derive_seed(self.seed, "generator"),
            split_fraction=self.dataset.split_fraction,
        )

    def build_stream(self) -> TaskStream:
        if self.dataset.csv:
            return load_csv(
                self.dataset.csv,
                split_fraction=self.dataset.split_fraction,
                seed=derive_seed(self.seed, "split"),
                normalize=self.dataset.normalize,
            )
        return generate_stream(self.generator_config())

    def build_strategy(self, name: str, input_dim: int):
        return make_strategy(
            name,
            self.strategy_params[name],
            model_config=self.model_config(input_dim),
            train_config=self.train_config,
            seed=self.seed,
        )

    @property
    def train_seed(self) -> int:
        return derive_seed(self.seed, "train")
