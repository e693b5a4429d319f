"""Per-round aggregation weights from update distances to Alice.

Agents whose update lies close to Alice's get a larger share. Two schedules
control how personal the round is: ``omega`` places Alice's own pseudo
distance between 0 and the closest other agent, ``psi`` is the inclusion
threshold. Both decay from ~1 (global training) toward 0 (local training).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

CUTOFF_FRACTION = 0.95
DEFAULT_DELTA_OMEGA = 3.2


@dataclass(frozen=True)
class Schedule:
    kind: str = "sigmoid"
    delta_omega: float = DEFAULT_DELTA_OMEGA
    total_rounds: int = 100
    value: float = 1.0
    table: tuple[float, ...] = ()
    offset: int = 0

    def __post_init__(self):
        if self.kind not in ("sigmoid", "constant", "custom_table"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "sigmoid" and self.delta_omega <= 0:
            raise ValueError("delta_omega must be > 0")
        if self.kind == "constant" and not 0.0 < self.value <= 1.0:
            raise ValueError("constant schedule value must lie in (0, 1]")
        if self.kind == "custom_table":
            object.__setattr__(self, "table", tuple(float(v) for v in self.table))
            if len(self.table) < self.total_rounds:
                raise ValueError("custom_table needs one value per round")
            if any(not 0.0 < v <= 1.0 for v in self.table):
                raise ValueError("custom_table values must lie in (0, 1]")

    @classmethod
    def constant(cls, value: float = 1.0, total_rounds: int = 100) -> "Schedule":
        return cls(kind="constant", value=value, total_rounds=total_rounds)


def schedule_value(s: Schedule, r: int) -> float:
    if s.kind == "constant":
        return s.value
    if s.kind == "custom_table":
        return s.table[r - 1]
    z = s.delta_omega * ((r + s.offset) / (s.total_rounds / 2) - 1.0)
    # split on sign to keep exp from overflowing for steep slopes
    if z >= 0:
        e = math.exp(-z)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(z))


@dataclass
class WeightState:
    alpha_prev1: np.ndarray
    alpha_prev2: np.ndarray

    @classmethod
    def uniform(cls, n: int) -> "WeightState":
        return cls(np.full(n, 1.0 / n), np.full(n, 1.0 / n))


@dataclass
class WeightOutput:
    alpha_smoothed: np.ndarray
    alpha_raw: np.ndarray
    distances: np.ndarray
    d_alice: float
    d_min: float
    d_max: float
    raw_scores: np.ndarray = field(repr=False, default=None)


def pairwise_distances(updates: Sequence, alice: int) -> np.ndarray:
    """Euclidean distance of every agent's ``delta_y`` to Alice's."""
    vecs = [np.asarray(getattr(u, "delta_y", u)) for u in updates]
    ref = vecs[alice]
    for i, v in enumerate(vecs):
        if v.shape != ref.shape:
            raise ValueError(f"update {i} has shape {v.shape}, Alice's has {ref.shape}")
    return np.array([float(np.linalg.norm(v - ref)) for v in vecs])


def raw_scores(distances: np.ndarray, alice: int, omega: float, psi: float):
    """Un-normalised weights before the cutoff; returns ``(scores, d_alice, dm, dM)``."""
    d = np.array(distances, dtype=np.float64)
    others = np.delete(d, alice)
    d_max = float(others.max())
    d_min = float(others.min())
    spread = (d_max - d_min) / d_max if d_max > 0 else 0.0
    d_alice = d_min * (1.0 - spread * (1.0 - omega))
    d[alice] = d_alice
    # after the assignment above min_i d_i == d_alice
    denom = d_max - d_alice
    if denom > 0:
        scores = np.maximum(psi - (d - d_alice) / denom, 0.0)
    else:
        scores = np.full(d.shape, max(psi, 0.0))
    return scores, d_alice, d_min, d_max


def calc_weights(
    distances: Sequence[float],
    alice: int,
    r: int,
    R: int,
    omega: float,
    psi: float,
    state: WeightState,
) -> WeightOutput:
    d = np.asarray(distances, dtype=np.float64)
    n = d.shape[0]
    if n < 2:
        raise ValueError("need at least two agents")
    if state.alpha_prev1.shape != (n,) or state.alpha_prev2.shape != (n,):
        raise ValueError("weight history length does not match the number of agents")

    scores, d_alice, d_min, d_max = raw_scores(d, alice, omega, psi)
    alpha0 = scores.copy()
    if r >= CUTOFF_FRACTION * R or alpha0.sum() <= 0:
        alpha0 = np.zeros(n)
        alpha0[alice] = 1.0
    alpha0 = alpha0 / alpha0.sum()

    prev1, prev2 = state.alpha_prev1, state.alpha_prev2
    # anchored form of (prev2 + prev1 + alpha0) / 3, exact when all three agree
    smoothed = np.maximum(prev1 + ((prev2 - prev1) + (alpha0 - prev1)) / 3.0, 0.0)

    state.alpha_prev2 = prev1
    state.alpha_prev1 = alpha0

    out_d = d.copy()
    out_d[alice] = d_alice
    return WeightOutput(
        alpha_smoothed=smoothed,
        alpha_raw=alpha0,
        distances=out_d,
        d_alice=d_alice,
        d_min=d_min,
        d_max=d_max,
        raw_scores=scores,
    )
