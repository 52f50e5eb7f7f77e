"""Continual-learning benchmark for performance models under real concept drift."""

from .data import DriftGenConfig, Sample, Split, Task, TaskStream, bin_target, generate_stream, load_csv, save_csv
from .evaluation import AccuracyMatrix, MetricsReport, avg_accuracy, avg_forgetting, evaluate, run_strategy
from .nn import ModelConfig, init_model
from .strategies import STRATEGIES, make_strategy
from .training import TrainConfig

__version__ = "0.1.0"
