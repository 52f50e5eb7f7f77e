"""Continual-learning strategies and a name-based factory."""

from __future__ import annotations

from typing import Optional

from ..errors import ConfigurationError
from ..nn import ModelConfig
from ..seeding import derive_seed
from ..training import TrainConfig
from .base import Naive, Strategy
from .regularization import (
    EWC,
    EWCState,
    LwF,
    LwFState,
    SIState,
    SynapticIntelligence,
    compute_fisher_diag,
    ewc_penalty,
    ewc_penalty_grad,
    lwf_loss,
    lwf_loss_and_dlogits,
    si_consolidate,
    si_on_step,
    si_penalty,
    si_penalty_grad,
)
from .rehearsal import (
    AGEM,
    AGEMState,
    GDumb,
    GDumbState,
    GSSGreedy,
    GSSState,
    agem_after_task,
    agem_modify_gradient,
    agem_project,
    gdumb_eval_model,
    gdumb_insert,
    gss_insert,
)

STRATEGIES = {
    "naive": Naive,
    "ewc": EWC,
    "si": SynapticIntelligence,
    "lwf": LwF,
    "agem": AGEM,
    "gss": GSSGreedy,
    "gdumb": GDumb,
}

# Defaults follow the published hyperparameter table; the remaining knobs are
# engine choices (A-GEM reference batch, GSS comparison count/threshold).
DEFAULT_PARAMS = {
    "naive": {},
    "ewc": {"lam": 0.5, "mode": "separate"},
    "si": {"c": 1.0, "xi": 1e-7},
    "lwf": {"alpha": 1.0, "temperature": 2.0},
    "agem": {"patterns_per_exp": 2, "ref_batch_size": 16},
    "gss": {"mem_size": 5000, "n_compare": 10, "similarity_threshold": 0.0, "replay_batch_size": 4},
    "gdumb": {"mem_size": 5000},
}


def make_strategy(
    name: str,
    params: Optional[dict] = None,
    *,
    model_config: Optional[ModelConfig] = None,
    train_config: Optional[TrainConfig] = None,
    seed: int = 0,
) -> Strategy:
    """Build a strategy by name; ``seed`` is the run's master seed."""
    if name not in STRATEGIES:
        raise ConfigurationError(f"unknown strategy {name!r}; choose from {', '.join(STRATEGIES)}")
    merged = dict(DEFAULT_PARAMS[name])
    unknown = set(params or {}) - set(merged)
    if unknown:
        raise ConfigurationError(f"unknown parameter(s) for {name}: {', '.join(sorted(unknown))}")
    merged.update(params or {})
    kwargs = dict(merged, seed=derive_seed(seed, "strategy"))
    if name == "gdumb":
        kwargs.update(
            model_config=model_config,
            train_config=train_config,
            eval_seed=derive_seed(seed, "gdumb_eval"),
        )
    return STRATEGIES[name](**kwargs)


__all__ = [
    "STRATEGIES",
    "DEFAULT_PARAMS",
    "make_strategy",
    "Strategy",
    "Naive",
    "EWC",
    "EWCState",
    "SynapticIntelligence",
    "SIState",
    "LwF",
    "LwFState",
    "AGEM",
    "AGEMState",
    "GSSGreedy",
    "GSSState",
    "GDumb",
    "GDumbState",
    "compute_fisher_diag",
    "ewc_penalty",
    "ewc_penalty_grad",
    "si_on_step",
    "si_consolidate",
    "si_penalty",
    "si_penalty_grad",
    "lwf_loss",
    "lwf_loss_and_dlogits",
    "agem_project",
    "agem_modify_gradient",
    "agem_after_task",
    "gss_insert",
    "gdumb_insert",
    "gdumb_eval_model",
]
