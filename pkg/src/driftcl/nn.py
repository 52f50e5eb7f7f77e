"""Small numpy MLP classifier with exact reverse-mode gradients and Adam.

All parameters live in one contiguous float64 vector; the per-layer weight
and bias arrays are views into it. That makes the flat-vector algebra used by
the regularization and gradient-projection strategies free: a gradient is
just another vector with the same layout.

Layer ``i`` computes ``a_{i+1} = relu(a_i @ W_i.T + b_i)`` with ``W_i`` of
shape ``(out, in)``; the last layer has no activation and yields logits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, DataError, NumericError

__all__ = [
    "ModelConfig",
    "LayerSpec",
    "FlatParams",
    "Model",
    "Forward",
    "LossGrad",
    "AdamState",
    "init_model",
    "flatten",
    "unflatten",
    "forward",
    "forward_cache",
    "backprop",
    "log_softmax",
    "softmax",
    "loss_ce",
    "ce_loss_and_dlogits",
    "backward",
    "per_sample_grads",
    "adam_step",
    "predict",
]


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int = 10
    hidden_sizes: tuple[int, ...] = (400, 400, 400)
    n_classes: int = 10
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if not self.hidden_sizes:
            raise ConfigurationError("hidden_sizes must contain at least one layer")
        dims = (self.input_dim, *self.hidden_sizes, self.n_classes)
        if any(int(d) < 1 for d in dims):
            raise ConfigurationError(f"all layer dimensions must be >= 1, got {dims}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_sizes, self.n_classes)


@dataclass(frozen=True)
class LayerSpec:
    """Placement of one dense layer inside the flat parameter vector."""

    rows: int  # fan_out
    cols: int  # fan_in
    offset: int

    @property
    def size(self) -> int:
        return self.rows * self.cols + self.rows

    @property
    def weight_slice(self) -> slice:
        return slice(self.offset, self.offset + self.rows * self.cols)

    @property
    def bias_slice(self) -> slice:
        start = self.offset + self.rows * self.cols
        return slice(start, start + self.rows)


def _layout_for(dims: Sequence[int]) -> tuple[LayerSpec, ...]:
    specs = []
    offset = 0
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        spec = LayerSpec(rows=int(fan_out), cols=int(fan_in), offset=offset)
        specs.append(spec)
        offset += spec.size
    return tuple(specs)


def _layout_size(layout: Sequence[LayerSpec]) -> int:
    return sum(spec.size for spec in layout)


@dataclass
class FlatParams:
    values: np.ndarray
    layout: tuple[LayerSpec, ...]

    def __post_init__(self):
        if self.values.ndim != 1 or self.values.shape[0] != _layout_size(self.layout):
            raise DataError(
                f"flat vector of length {self.values.shape} does not match layout "
                f"size {_layout_size(self.layout)}"
            )


class Model:
    """Feed-forward ReLU classifier backed by a single flat parameter vector."""

    activation = "relu"

    def __init__(self, params: np.ndarray, layout: tuple[LayerSpec, ...]):
        self.params = params
        self.layout = layout
        self.weights = [params[s.weight_slice].reshape(s.rows, s.cols) for s in layout]
        self.biases = [params[s.bias_slice] for s in layout]

    @property
    def n_params(self) -> int:
        return self.params.shape[0]

    @property
    def input_dim(self) -> int:
        return self.layout[0].cols

    @property
    def n_classes(self) -> int:
        return self.layout[-1].rows

    def copy(self) -> "Model":
        return Model(self.params.copy(), self.layout)

    def zeros_like_params(self) -> np.ndarray:
        return np.zeros_like(self.params)

    def __repr__(self):
        dims = [self.layout[0].cols] + [s.rows for s in self.layout]
        return f"Model(dims={dims}, n_params={self.n_params})"


def init_model(config: ModelConfig) -> Model:
    """Glorot-uniform weights drawn layer by layer from ``config.seed``; zero biases."""
    layout = _layout_for(config.dims)
    params = np.zeros(_layout_size(layout), dtype=np.float64)
    rng = np.random.default_rng(int(config.seed))
    for spec in layout:
        limit = math.sqrt(6.0 / (spec.rows + spec.cols))
        params[spec.weight_slice] = rng.uniform(-limit, limit, size=spec.rows * spec.cols)
    return Model(params, layout)


def flatten(model: Model) -> FlatParams:
    return FlatParams(model.params.copy(), model.layout)


def unflatten(flat: FlatParams) -> Model:
    return Model(np.array(flat.values, dtype=np.float64, copy=True), flat.layout)


@dataclass
class Forward:
    """Activations kept from a forward pass; ``acts[i]`` is the input of layer ``i``."""

    acts: list[np.ndarray]
    logits: np.ndarray


def _as_batch(model: Model, inputs) -> np.ndarray:
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise DataError(f"expected inputs of shape (batch, {model.input_dim}), got {x.shape}")
    if not np.isfinite(x).all():
        raise DataError("inputs contain non-finite values")
    return x


def forward_cache(model: Model, inputs) -> Forward:
    x = _as_batch(model, inputs)
    acts = [x]
    h = x
    last = len(model.layout) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        with np.errstate(over="ignore", invalid="ignore"):
            z = h @ w.T + b
        if not np.isfinite(z).all():
            raise NumericError(f"non-finite activations in layer {i}")
        if i < last:
            h = np.maximum(z, 0.0)
            acts.append(h)
        else:
            h = z
    return Forward(acts=acts, logits=h)


def forward(model: Model, inputs) -> np.ndarray:
    return forward_cache(model, inputs).logits


def backprop(model: Model, cache: Forward, dlogits: np.ndarray) -> np.ndarray:
    """Pull ``dL/dlogits`` back to a flat gradient over every parameter."""
    grad = np.empty_like(model.params)
    delta = dlogits
    for i in range(len(model.layout) - 1, -1, -1):
        spec = model.layout[i]
        a_in = cache.acts[i]
        grad[spec.weight_slice] = (delta.T @ a_in).ravel()
        grad[spec.bias_slice] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i]) * (a_in > 0.0)
            if not np.isfinite(delta).all():
                raise NumericError(f"non-finite gradient flowing into layer {i - 1}")
    return grad


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _check_labels(labels, n_classes: int, batch: int) -> np.ndarray:
    y = np.asarray(labels)
    if y.shape != (batch,):
        raise DataError(f"expected {batch} labels, got shape {y.shape}")
    if y.size and (y.min() < 0 or y.max() >= n_classes):
        raise DataError(f"labels must lie in [0, {n_classes}), got range [{y.min()}, {y.max()}]")
    return y.astype(np.intp, copy=False)


def loss_ce(logits: np.ndarray, labels) -> float:
    """Mean softmax cross-entropy."""
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    y = _check_labels(labels, logits.shape[1], logits.shape[0])
    logp = log_softmax(logits)
    return float(-logp[np.arange(len(y)), y].mean())


def ce_loss_and_dlogits(logits: np.ndarray, labels, reduce_mean: bool = True):
    y = _check_labels(labels, logits.shape[1], logits.shape[0])
    logp = log_softmax(logits)
    rows = np.arange(len(y))
    per_sample = -logp[rows, y]
    dlogits = np.exp(logp)
    dlogits[rows, y] -= 1.0
    if reduce_mean:
        return float(per_sample.mean()), dlogits / len(y)
    return per_sample, dlogits


# A loss term receives the model and the forward cache of the current batch
# and returns (value, flat gradient).
LossTerm = Callable[[Model, Forward], "tuple[float, np.ndarray]"]


@dataclass
class LossGrad:
    loss: float
    data_loss: float
    grad: np.ndarray
    data_grad: np.ndarray
    term_values: list[float] = field(default_factory=list)


def backward(model: Model, inputs, labels, terms: Sequence[LossTerm] = ()) -> LossGrad:
    """Gradient of mean cross-entropy plus every extra term, in flat layout."""
    cache = forward_cache(model, inputs)
    data_loss, dlogits = ce_loss_and_dlogits(cache.logits, labels)
    data_grad = backprop(model, cache, dlogits)
    grad = data_grad
    total = data_loss
    values = []
    for term in terms:
        value, term_grad = term(model, cache)
        if term_grad.shape != data_grad.shape:
            raise NumericError("loss term gradient does not match the parameter layout")
        grad = grad + term_grad
        total += value
        values.append(value)
    if not np.isfinite(grad).all():
        raise NumericError("non-finite total gradient")
    return LossGrad(loss=total, data_loss=data_loss, grad=grad, data_grad=data_grad, term_values=values)


def per_sample_grads(model: Model, inputs, labels) -> np.ndarray:
    """Cross-entropy gradient of each sample separately, shape ``(n, n_params)``."""
    cache = forward_cache(model, inputs)
    _, delta = ce_loss_and_dlogits(cache.logits, labels, reduce_mean=False)
    n = delta.shape[0]
    out = np.empty((n, model.n_params), dtype=np.float64)
    for i in range(len(model.layout) - 1, -1, -1):
        spec = model.layout[i]
        a_in = cache.acts[i]
        out[:, spec.weight_slice] = np.einsum("bo,bi->boi", delta, a_in).reshape(n, -1)
        out[:, spec.bias_slice] = delta
        if i > 0:
            delta = (delta @ model.weights[i]) * (a_in > 0.0)
    return out


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_model(cls, model: Model, learning_rate: float = 0.001, **kwargs) -> "AdamState":
        return cls(
            m=np.zeros(model.n_params),
            v=np.zeros(model.n_params),
            learning_rate=learning_rate,
            **kwargs,
        )


def adam_step(model: Model, gradient: np.ndarray, state: AdamState) -> np.ndarray:
    """Apply one bias-corrected Adam update in place.

    Returns the realized parameter change (new minus old), which is what the
    path-integral importance of SI needs.
    """
    g = np.asarray(gradient, dtype=np.float64)
    if g.shape != model.params.shape:
        raise NumericError(f"gradient length {g.shape} != parameter length {model.params.shape}")
    if not np.isfinite(g).all():
        raise NumericError("non-finite gradient; Adam step not applied")
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * g
    v = state.beta2 * state.v + (1.0 - state.beta2) * (g * g)
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new = model.params - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    if not np.isfinite(new).all():
        raise NumericError("Adam update produced non-finite parameters; step not applied")
    delta = new - model.params
    model.params[:] = new
    state.m, state.v, state.t = m, v, t
    return delta


def predict(model: Model, inputs) -> np.ndarray:
    # np.argmax returns the first maximum, so ties go to the lowest class index.
    return np.argmax(forward(model, inputs), axis=1)
