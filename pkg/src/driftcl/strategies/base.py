"""Lifecycle contract every continual-learning strategy follows.

The harness drives a strategy through these hooks, in this order::

    before_task
      per step: loss_terms -> backward -> modify_gradient -> Adam -> on_step -> on_batch
    after_task
    eval_model

Every hook of the base class is a no-op, which is exactly the Naive
strategy: the model is simply fine-tuned on each new regime.
"""

from __future__ import annotations

import numpy as np

from ..nn import Model


class Strategy:
    name = "base"

    def __init__(self, seed: int = 0):
        # Strategy-scoped randomness; never shared with batch shuffling or init.
        self.rng = np.random.default_rng(seed)

    def before_task(self, model: Model, task) -> None:
        pass

    def loss_terms(self, model: Model, batch) -> list:
        """Extra differentiable terms added to the data loss for this step."""
        return []

    def modify_gradient(self, gradient: np.ndarray, model: Model) -> np.ndarray:
        return gradient

    def on_step(self, data_grad: np.ndarray, param_delta: np.ndarray) -> None:
        pass

    def on_batch(self, batch, model: Model) -> None:
        pass

    def after_task(self, model: Model, task) -> None:
        pass

    def eval_model(self, model: Model) -> Model:
        return model

    def __repr__(self):
        return f"{type(self).__name__}()"


class Naive(Strategy):
    name = "naive"
