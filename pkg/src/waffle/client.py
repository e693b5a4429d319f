"""One agent's local round: K (optionally drift-corrected) SGD steps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import AgentDataBundle
from .params import MiniBatch, ModelSpec, ParamVector, loss_and_gradient


@dataclass
class AgentUpdate:
    delta_y: ParamVector
    delta_c: ParamVector
    num_samples: int


@dataclass
class ClientState:
    """Mutable per-agent state; owned by exactly one worker during a round."""

    data: AgentDataBundle
    model: ModelSpec
    rng: np.random.Generator
    local_control: ParamVector = field(default=None)

    def __post_init__(self):
        if self.local_control is None:
            self.local_control = np.zeros(self.model.num_params)
        elif self.local_control.shape != (self.model.num_params,):
            raise ValueError("local_control length must equal the model parameter count")

    @classmethod
    def create(cls, data: AgentDataBundle, model: ModelSpec, seed) -> "ClientState":
        return cls(data=data, model=model, rng=np.random.default_rng(seed))

    @property
    def train_size(self) -> int:
        return len(self.data.train)

    def steps_per_epoch(self, batch_size: int) -> int:
        return math.ceil(self.train_size / batch_size)


def _batches(state: ClientState, batch_size: int):
    """Endless stream of mini-batches, reshuffled at the start of every pass."""
    train = state.data.train
    n = len(train)
    while True:
        order = state.rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            yield MiniBatch(train.features[idx], train.labels[idx])


def local_round(
    state: ClientState,
    x: ParamVector,
    c: ParamVector,
    K: int,
    eta_l: float,
    batch_size: int,
    corrected: bool = True,
) -> AgentUpdate:
    """Run ``K`` local steps from the broadcast model ``x``.

    With ``corrected`` each step follows ``y -= eta_l * (g - c_i + c)`` and
    the local control variate is replaced by
    ``c_i+ = c_i - c + (x - y) / (K * eta_l)``. Without it this is plain SGD
    and ``delta_c`` is zero.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if eta_l <= 0:
        raise ValueError("eta_l must be > 0")
    if batch_size < 1 or batch_size > state.train_size:
        raise ValueError(
            f"batch_size {batch_size} exceeds train size {state.train_size}"
            if batch_size > state.train_size
            else "batch_size must be >= 1"
        )
    if not (x.shape == c.shape == state.local_control.shape):
        raise ValueError("x, c and c_i must have the same length")

    # computed once so that c == c_i gives an exactly zero correction
    correction = c - state.local_control if corrected else None
    y = x.copy()
    stream = _batches(state, batch_size)
    for _ in range(K):
        _, g = loss_and_gradient(state.model, y, next(stream))
        if corrected:
            g = g + correction
        y = y - eta_l * g

    delta_y = y - x
    if corrected:
        c_plus = state.local_control - c + (x - y) / (K * eta_l)
        delta_c = c_plus - state.local_control
        state.local_control = c_plus
    else:
        delta_c = np.zeros_like(x)
    return AgentUpdate(delta_y=delta_y, delta_c=delta_c, num_samples=state.train_size)


def reset_control(state: ClientState) -> None:
    state.local_control = np.zeros_like(state.local_control)
