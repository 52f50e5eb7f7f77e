import numpy as np
import pytest

from driftcl.data import DriftGenConfig, generate_stream
from driftcl.nn import ModelConfig
from driftcl.training import TrainConfig

# Lines collected by test_acceptance and echoed in the terminal summary.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_stream():
    return generate_stream(DriftGenConfig(n_tasks=3, samples_per_task=120, seed=3))


@pytest.fixture
def tiny_model_config():
    return ModelConfig(input_dim=10, hidden_sizes=(16, 16), n_classes=10, seed=5)


@pytest.fixture
def quick_train():
    return TrainConfig(epochs=2, batch_size=4, learning_rate=0.001)
