"""Memory-based strategies: A-GEM, GSS-Greedy and GDumb."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..data import Sample
from ..errors import ConfigurationError, StrategyError
from ..nn import Model, ModelConfig, backward, init_model, per_sample_grads
from ..training import TrainConfig, fit_plain
from .base import Strategy


def _stack(samples) -> tuple[np.ndarray, np.ndarray]:
    return np.stack([s.features for s in samples]), np.array([s.label for s in samples], dtype=np.int64)


# --------------------------------------------------------------------------
# A-GEM
# --------------------------------------------------------------------------


@dataclass
class AGEMState:
    memory: list = field(default_factory=list)
    patterns_per_exp: int = 2
    ref_batch_size: int = 16


def agem_project(g: np.ndarray, g_ref: np.ndarray) -> np.ndarray:
    """Project ``g`` so it no longer opposes ``g_ref``; identity when they already agree."""
    ref_sq = float(np.dot(g_ref, g_ref))
    if ref_sq == 0.0:
        return g
    dot = float(np.dot(g, g_ref))
    if dot >= 0.0:
        return g
    v = g - (dot / ref_sq) * g_ref
    # one refinement pass absorbs rounding left over from the first projection
    residual = float(np.dot(v, g_ref))
    if residual < 0.0:
        v = v - (residual / ref_sq) * g_ref
    return v


def agem_reference_gradient(state: AGEMState, model: Model, rng: np.random.Generator) -> Optional[np.ndarray]:
    if not state.memory:
        return None
    if len(state.memory) <= state.ref_batch_size:
        chosen = state.memory
    else:
        idx = rng.choice(len(state.memory), size=state.ref_batch_size, replace=False)
        chosen = [state.memory[i] for i in idx]
    x, y = _stack(chosen)
    return backward(model, x, y).data_grad


def agem_modify_gradient(state: AGEMState, g: np.ndarray, model: Model, rng: np.random.Generator) -> np.ndarray:
    g_ref = agem_reference_gradient(state, model, rng)
    if g_ref is None:
        return g
    return agem_project(g, g_ref)


def agem_after_task(state: AGEMState, task, rng: np.random.Generator) -> None:
    n = len(task.train)
    k = min(state.patterns_per_exp, n)
    if k <= 0:
        return
    for i in rng.choice(n, size=k, replace=False):
        state.memory.append(task.train[int(i)])


class AGEM(Strategy):
    name = "agem"

    def __init__(self, patterns_per_exp: int = 2, ref_batch_size: int = 16, seed: int = 0):
        super().__init__(seed)
        if patterns_per_exp < 0 or ref_batch_size < 1:
            raise ConfigurationError("A-GEM needs patterns_per_exp >= 0 and ref_batch_size >= 1")
        self.state = AGEMState(patterns_per_exp=int(patterns_per_exp), ref_batch_size=int(ref_batch_size))

    def modify_gradient(self, gradient, model):
        return agem_modify_gradient(self.state, gradient, model, self.rng)

    def after_task(self, model, task):
        agem_after_task(self.state, task, self.rng)


# --------------------------------------------------------------------------
# GSS-Greedy
# --------------------------------------------------------------------------


@dataclass
class GSSState:
    buffer: list = field(default_factory=list)  # [(Sample, score)]
    mem_size: int = 5000
    n_compare: int = 10
    similarity_threshold: float = 0.0


def _cosine_rows(g: np.ndarray, others: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(others, axis=1) * np.linalg.norm(g)
    dots = others @ g
    out = np.zeros(len(others))
    ok = norms > 0
    out[ok] = dots[ok] / norms[ok]
    return np.clip(out, -1.0, 1.0)


def gss_similarities(state: GSSState, candidate: Sample, model: Model, members: np.ndarray) -> np.ndarray:
    """Cosine similarity between the candidate's loss gradient and each chosen member's."""
    samples = [candidate] + [state.buffer[i][0] for i in members]
    x, y = _stack(samples)
    grads = per_sample_grads(model, x, y)
    return _cosine_rows(grads[0], grads[1:])


def gss_insert(state: GSSState, candidate: Sample, model: Model, rng: np.random.Generator) -> str:
    """Offer one sample to the buffer; returns ``"inserted"``, ``"replaced"`` or ``"discarded"``."""
    if state.mem_size <= 0:
        return "discarded"
    if not state.buffer:
        state.buffer.append((candidate, 0.0))
        return "inserted"
    k = min(state.n_compare, len(state.buffer))
    members = rng.choice(len(state.buffer), size=k, replace=False)
    sims = gss_similarities(state, candidate, model, members)
    best = int(np.argmax(sims))
    score = float(np.clip(sims[best] + 1.0, 0.0, 2.0))
    if len(state.buffer) < state.mem_size:
        state.buffer.append((candidate, score))
        return "inserted"
    if sims[best] < state.similarity_threshold:
        state.buffer[int(members[best])] = (candidate, score)
        return "replaced"
    return "discarded"


class GSSGreedy(Strategy):
    """Gradient-diversity buffer, replayed alongside every training batch.

    Each training sample is offered to the buffer once per task (during the
    first pass over the task); every step adds the mean cross-entropy of a
    random buffer minibatch to the loss.
    """

    name = "gss"

    def __init__(
        self,
        mem_size: int = 5000,
        n_compare: int = 10,
        similarity_threshold: float = 0.0,
        replay_batch_size: int = 4,
        seed: int = 0,
    ):
        super().__init__(seed)
        if mem_size < 0 or n_compare < 1 or replay_batch_size < 1:
            raise ConfigurationError("GSS needs mem_size >= 0, n_compare >= 1, replay_batch_size >= 1")
        self.state = GSSState(
            mem_size=int(mem_size), n_compare=int(n_compare), similarity_threshold=float(similarity_threshold)
        )
        self.replay_batch_size = int(replay_batch_size)
        self._offer_budget = 0

    def before_task(self, model, task):
        self._offer_budget = len(task.train)

    def loss_terms(self, model, batch):
        if not self.state.buffer:
            return []
        k = min(self.replay_batch_size, len(self.state.buffer))
        idx = self.rng.choice(len(self.state.buffer), size=k, replace=False)
        x, y = _stack([self.state.buffer[i][0] for i in idx])

        def term(model, cache):
            lg = backward(model, x, y)
            return lg.data_loss, lg.data_grad

        return [term]

    def on_batch(self, batch, model):
        n = min(self._offer_budget, len(batch.labels))
        for i in range(n):
            sample = Sample(batch.features[i], float(batch.targets[i]), int(batch.labels[i]), batch.task_id)
            gss_insert(self.state, sample, model, self.rng)
        self._offer_budget -= n


# --------------------------------------------------------------------------
# GDumb
# --------------------------------------------------------------------------


@dataclass
class GDumbState:
    buckets: dict = field(default_factory=dict)  # class -> [Sample]
    mem_size: int = 5000

    @property
    def total(self) -> int:
        return sum(len(b) for b in self.buckets.values())

    def samples(self) -> list:
        return [s for c in sorted(self.buckets) for s in self.buckets[c]]


def gdumb_insert(state: GDumbState, sample: Sample, rng: np.random.Generator) -> Optional[int]:
    """Store ``sample`` in its class bucket; returns the class evicted from, if any."""
    if state.mem_size <= 0:
        return None
    evicted = None
    if state.total >= state.mem_size:
        largest = max(len(b) for b in state.buckets.values())
        evicted = min(c for c, b in state.buckets.items() if len(b) == largest)
        bucket = state.buckets[evicted]
        bucket.pop(int(rng.integers(len(bucket))))
    state.buckets.setdefault(sample.label, []).append(sample)
    return evicted


def gdumb_eval_model(state: GDumbState, base_config: ModelConfig, train_config: TrainConfig, seed: int) -> Model:
    """Train a fresh model on the memory alone; the live model is not touched."""
    samples = state.samples()
    if not samples:
        raise StrategyError("GDumb cannot build an evaluation model from an empty memory")
    x, y = _stack(samples)
    model = init_model(ModelConfig(base_config.input_dim, base_config.hidden_sizes, base_config.n_classes, seed))
    return fit_plain(model, x, y, train_config, seed)


class GDumb(Strategy):
    name = "gdumb"

    def __init__(
        self,
        mem_size: int = 5000,
        model_config: Optional[ModelConfig] = None,
        train_config: Optional[TrainConfig] = None,
        eval_seed: int = 0,
        seed: int = 0,
    ):
        super().__init__(seed)
        if mem_size < 0:
            raise ConfigurationError("GDumb needs mem_size >= 0")
        self.state = GDumbState(mem_size=int(mem_size))
        self.model_config = model_config or ModelConfig()
        self.train_config = train_config or TrainConfig()
        self.eval_seed = int(eval_seed)

    def before_task(self, model, task):
        for sample in task.train:
            gdumb_insert(self.state, sample, self.rng)

    def eval_model(self, model):
        if self.state.mem_size == 0:
            # a disabled memory degenerates to evaluating the live model
            return model
        return gdumb_eval_model(self.state, self.model_config, self.train_config, self.eval_seed)
