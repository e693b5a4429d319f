"""Flat parameter vectors and the small differentiable models that consume them.

Every model is described by a :class:`ModelSpec` and stores all of its weights
in a single 1-D float64 array. Layers are packed in order as ``W`` (row-major,
``fan_in x fan_out``) followed by ``b``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ParamVector = np.ndarray

KINDS = ("linear_softmax", "mlp")


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    input_dim: int
    num_classes: int = 10
    hidden_dims: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        if self.input_dim < 1 or self.num_classes < 2:
            raise ValueError("input_dim must be >= 1 and num_classes >= 2")
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.kind == "linear_softmax" and self.hidden_dims:
            raise ValueError("linear_softmax takes no hidden_dims")
        if any(h < 1 for h in self.hidden_dims):
            raise ValueError("hidden_dims entries must be positive")

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        sizes = [self.input_dim, *self.hidden_dims, self.num_classes]
        return list(zip(sizes[:-1], sizes[1:]))

    @property
    def num_params(self) -> int:
        return sum(i * o + o for i, o in self.layer_dims)


def parameter_count(spec: ModelSpec) -> int:
    return spec.num_params


@dataclass(frozen=True)
class MiniBatch:
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if labels.ndim != 1 or labels.shape[0] != features.shape[0]:
            raise ValueError(
                f"features has {features.shape[0]} rows but labels has {labels.shape[0]} entries"
            )
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.labels.shape[0]


def _unpack(spec: ModelSpec, params: ParamVector) -> list[tuple[np.ndarray, np.ndarray]]:
    params = np.asarray(params)
    if params.ndim != 1 or params.shape[0] != spec.num_params:
        raise ValueError(
            f"parameter vector has length {params.shape[0] if params.ndim == 1 else params.shape}, "
            f"model expects {spec.num_params}"
        )
    layers = []
    offset = 0
    for fan_in, fan_out in spec.layer_dims:
        w = params[offset : offset + fan_in * fan_out].reshape(fan_in, fan_out)
        offset += fan_in * fan_out
        b = params[offset : offset + fan_out]
        offset += fan_out
        layers.append((w, b))
    return layers


def _check_batch(spec: ModelSpec, batch: MiniBatch) -> None:
    if len(batch) == 0:
        raise ValueError("empty batch")
    if batch.features.shape[1] != spec.input_dim:
        raise ValueError(
            f"batch has {batch.features.shape[1]} features, model expects {spec.input_dim}"
        )
    labels = batch.labels
    if labels.min() < 0 or labels.max() >= spec.num_classes:
        raise ValueError(f"label out of range [0, {spec.num_classes})")


def init_params(spec: ModelSpec, seed: int) -> ParamVector:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    rng = np.random.default_rng(seed)
    chunks = []
    for fan_in, fan_out in spec.layer_dims:
        bound = 1.0 / np.sqrt(fan_in)
        chunks.append(rng.uniform(-bound, bound, size=fan_in * fan_out))
        chunks.append(np.zeros(fan_out))
    return np.concatenate(chunks)


def _forward(layers, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    # hidden activations are tanh so the loss is smooth everywhere
    activations = [x]
    h = x
    for w, b in layers[:-1]:
        h = np.tanh(h @ w + b)
        activations.append(h)
    w, b = layers[-1]
    return h @ w + b, activations


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def logits(spec: ModelSpec, params: ParamVector, features: np.ndarray) -> np.ndarray:
    out, _ = _forward(_unpack(spec, params), np.asarray(features, dtype=np.float64))
    return out


def loss_and_gradient(
    spec: ModelSpec, params: ParamVector, batch: MiniBatch
) -> tuple[float, ParamVector]:
    """Mean cross-entropy over ``batch`` and its gradient w.r.t. ``params``."""
    layers = _unpack(spec, params)
    _check_batch(spec, batch)
    n = len(batch)
    out, activations = _forward(layers, batch.features)
    log_probs = _log_softmax(out)
    rows = np.arange(n)
    loss = -log_probs[rows, batch.labels].mean()

    delta = np.exp(log_probs)
    delta[rows, batch.labels] -= 1.0
    delta /= n

    grads = []
    for depth in range(len(layers) - 1, -1, -1):
        w, _ = layers[depth]
        a = activations[depth]
        grads.append((a.T @ delta, delta.sum(axis=0)))
        if depth > 0:
            delta = (delta @ w.T) * (1.0 - a * a)
    grads.reverse()
    flat = np.concatenate([np.concatenate([gw.ravel(), gb]) for gw, gb in grads])
    return float(loss), flat


def predict(spec: ModelSpec, params: ParamVector, features: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. ties go to the lowest class index
    return np.argmax(logits(spec, params, features), axis=1)


def predict_accuracy(spec: ModelSpec, params: ParamVector, data: MiniBatch) -> float:
    _check_batch(spec, data)
    return float(np.mean(predict(spec, params, data.features) == data.labels))
