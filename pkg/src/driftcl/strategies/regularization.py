"""Regularization strategies: EWC, Synaptic Intelligence and Learning without Forgetting."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import ConfigurationError, NumericError, StrategyError
from ..nn import Model, backprop, forward, log_softmax, per_sample_grads, softmax
from .base import Strategy


def _check_len(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape != b.shape:
        raise StrategyError(f"{what}: length mismatch {a.shape} vs {b.shape}")


# --------------------------------------------------------------------------
# EWC
# --------------------------------------------------------------------------


@dataclass
class EWCState:
    anchors: list = field(default_factory=list)  # [(theta_star, fisher_diag)]
    lam: float = 0.5
    mode: str = "separate"


def ewc_penalty(state: EWCState, params: np.ndarray) -> float:
    total = 0.0
    for theta_star, fisher in state.anchors:
        _check_len(params, theta_star, "ewc_penalty")
        diff = params - theta_star
        total += 0.5 * state.lam * float(np.dot(fisher, diff * diff))
    return total


def ewc_penalty_grad(state: EWCState, params: np.ndarray) -> np.ndarray:
    grad = np.zeros_like(params)
    for theta_star, fisher in state.anchors:
        _check_len(params, theta_star, "ewc_penalty_grad")
        grad += state.lam * fisher * (params - theta_star)
    return grad


def compute_fisher_diag(model: Model, split, chunk: int = 64) -> np.ndarray:
    """Empirical Fisher diagonal: mean squared per-sample log-likelihood gradient at the true label."""
    n = len(split.labels)
    if n == 0:
        raise StrategyError("Fisher estimate needs at least one sample")
    acc = np.zeros(model.n_params)
    for start in range(0, n, chunk):
        g = per_sample_grads(model, split.features[start : start + chunk], split.labels[start : start + chunk])
        acc += np.einsum("ij,ij->j", g, g)
    fisher = acc / n
    if not np.isfinite(fisher).all():
        raise NumericError("non-finite Fisher diagonal")
    return fisher


class EWC(Strategy):
    name = "ewc"

    def __init__(self, lam: float = 0.5, mode: str = "separate", seed: int = 0):
        super().__init__(seed)
        if mode != "separate":
            raise ConfigurationError(f"unsupported EWC mode {mode!r}; only 'separate' is implemented")
        if lam < 0:
            raise ConfigurationError("EWC lambda must be >= 0")
        self.state = EWCState(lam=float(lam), mode=mode)

    def loss_terms(self, model, batch):
        if not self.state.anchors:
            return []

        def term(model, cache):
            return ewc_penalty(self.state, model.params), ewc_penalty_grad(self.state, model.params)

        return [term]

    def after_task(self, model, task):
        fisher = compute_fisher_diag(model, task.train)
        self.state.anchors.append((model.params.copy(), fisher))


# --------------------------------------------------------------------------
# Synaptic Intelligence
# --------------------------------------------------------------------------


@dataclass
class SIState:
    omega_acc: Optional[np.ndarray] = None
    big_omega: Optional[np.ndarray] = None
    theta_task_start: Optional[np.ndarray] = None
    c: float = 1.0
    xi: float = 1e-7
    consolidated: bool = False

    def start(self, params: np.ndarray) -> None:
        if self.theta_task_start is None:
            self.theta_task_start = params.copy()
            self.big_omega = np.zeros_like(params)
        self.omega_acc = np.zeros_like(params)


def si_on_step(state: SIState, grad_data_term: np.ndarray, param_delta: np.ndarray) -> None:
    _check_len(grad_data_term, param_delta, "si_on_step")
    _check_len(state.omega_acc, param_delta, "si_on_step")
    state.omega_acc -= grad_data_term * param_delta


def si_consolidate(state: SIState, theta_end: np.ndarray) -> None:
    _check_len(theta_end, state.theta_task_start, "si_consolidate")
    drift = theta_end - state.theta_task_start
    state.big_omega += np.maximum(state.omega_acc, 0.0) / (drift * drift + state.xi)
    state.omega_acc = np.zeros_like(theta_end)
    state.theta_task_start = theta_end.copy()
    state.consolidated = True


def si_penalty(state: SIState, params: np.ndarray) -> float:
    if state.big_omega is None:
        return 0.0
    _check_len(params, state.theta_task_start, "si_penalty")
    diff = params - state.theta_task_start
    return state.c * float(np.dot(state.big_omega, diff * diff))


def si_penalty_grad(state: SIState, params: np.ndarray) -> np.ndarray:
    if state.big_omega is None:
        return np.zeros_like(params)
    return 2.0 * state.c * state.big_omega * (params - state.theta_task_start)


class SynapticIntelligence(Strategy):
    name = "si"

    def __init__(self, c: float = 1.0, xi: float = 1e-7, seed: int = 0):
        super().__init__(seed)
        if c < 0 or xi <= 0:
            raise ConfigurationError("SI needs c >= 0 and xi > 0")
        self.state = SIState(c=float(c), xi=float(xi))

    def before_task(self, model, task):
        self.state.start(model.params)

    def loss_terms(self, model, batch):
        if not self.state.consolidated:
            return []

        def term(model, cache):
            return si_penalty(self.state, model.params), si_penalty_grad(self.state, model.params)

        return [term]

    def on_step(self, data_grad, param_delta):
        si_on_step(self.state, data_grad, param_delta)

    def after_task(self, model, task):
        si_consolidate(self.state, model.params)


# --------------------------------------------------------------------------
# Learning without Forgetting
# --------------------------------------------------------------------------


@dataclass
class LwFState:
    teacher: Optional[Model] = None
    alpha: float = 1.0
    temperature: float = 2.0


def lwf_loss_and_dlogits(state: LwFState, inputs, current_logits: np.ndarray):
    """Distillation value ``alpha * T^2 * mean KL(teacher_T || student_T)`` and its logit gradient."""
    if state.teacher is None:
        return 0.0, np.zeros_like(current_logits)
    teacher_logits = forward(state.teacher, inputs)
    if teacher_logits.shape != current_logits.shape:
        raise StrategyError(f"lwf: teacher logits {teacher_logits.shape} vs current {current_logits.shape}")
    t = state.temperature
    log_p = log_softmax(teacher_logits / t)
    log_q = log_softmax(current_logits / t)
    p = np.exp(log_p)
    batch = current_logits.shape[0]
    kl = float(np.sum(p * (log_p - log_q))) / batch
    value = state.alpha * t * t * kl
    dlogits = state.alpha * t * (softmax(current_logits / t) - p) / batch
    return value, dlogits


def lwf_loss(state: LwFState, inputs, current_logits: np.ndarray) -> float:
    return lwf_loss_and_dlogits(state, inputs, current_logits)[0]


class LwF(Strategy):
    name = "lwf"

    def __init__(self, alpha: float = 1.0, temperature: float = 2.0, seed: int = 0):
        super().__init__(seed)
        if alpha < 0 or temperature <= 0:
            raise ConfigurationError("LwF needs alpha >= 0 and temperature > 0")
        self.state = LwFState(alpha=float(alpha), temperature=float(temperature))

    def loss_terms(self, model, batch):
        if self.state.teacher is None:
            return []

        def term(model, cache):
            value, dlogits = lwf_loss_and_dlogits(self.state, cache.acts[0], cache.logits)
            return value, backprop(model, cache, dlogits)

        return [term]

    def after_task(self, model, task):
        self.state.teacher = model.copy()
