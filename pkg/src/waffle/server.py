"""Round orchestration for Local, FedAvg, SCAFFOLD and WAFFLE."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .client import AgentUpdate, ClientState, local_round
from .config import ExperimentConfig
from .data import (
    AgentDataBundle,
    PartitionSpec,
    build_partition,
    generate_synthetic,
    load_idx,
    required_per_class,
)
from .params import ModelSpec, ParamVector, init_params, predict_accuracy
from .weights import Schedule, WeightState, calc_weights, pairwise_distances, schedule_value

log = logging.getLogger(__name__)

# algorithm -> (all agents train, drift-corrected local steps, distance-based weights)
ALGORITHM_TRAITS = {
    "local": (False, False, False),
    "fedavg": (True, False, False),
    "scaffold": (True, True, False),
    "waffle": (True, True, True),
    "waffle_nocv": (True, False, True),
}

# SeedSequence tags for the independent per-experiment streams
_DATA, _PARTITION, _INIT, _AGENT = 0, 1, 2, 3


@dataclass
class ServerState:
    x: ParamVector
    c: ParamVector
    algorithm: str
    eta_g: float = 1.0
    alice: int = 0
    schedule: Schedule = field(default_factory=Schedule)
    weight_state: WeightState | None = None
    round: int = 0
    best: float = float("-inf")
    # fixed aggregation weights that bypass the distance rule (reduction tests)
    weight_override: np.ndarray | None = None
    control_update: str = "reweighted"
    prev_weights: np.ndarray | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHM_TRAITS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.x.shape != self.c.shape:
            raise ValueError("x and c must have the same length")
        if self.eta_g <= 0:
            raise ValueError("eta_g must be > 0")


@dataclass(frozen=True)
class RoundConfig:
    total_rounds: int
    eta_l: float = 0.1
    batch_size: int = 32
    local_steps: int = 0  # 0: one epoch over the agent's train split
    workers: int = 1


@dataclass
class RoundRecord:
    round: int
    weights: np.ndarray
    distances: np.ndarray
    alice_test_accuracy: float
    best_so_far: float
    wall_time: float = 0.0


def aggregate(
    updates: list[AgentUpdate], weights: np.ndarray
) -> tuple[ParamVector, ParamVector]:
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (len(updates),):
        raise ValueError(f"{len(updates)} updates but {weights.shape[0]} weights")
    if not updates:
        raise ValueError("nothing to aggregate")
    dim = updates[0].delta_y.shape
    delta_x = np.zeros(dim)
    delta_c = np.zeros(dim)
    for w, u in zip(weights, updates):
        if u.delta_y.shape != dim or u.delta_c.shape != dim:
            raise ValueError("update lengths differ")
        delta_x += w * u.delta_y
        delta_c += w * u.delta_c
    return delta_x, delta_c


def _steps(client: ClientState, cfg: RoundConfig) -> int:
    return cfg.local_steps or client.steps_per_epoch(cfg.batch_size)


def _train_all(server: ServerState, clients, cfg: RoundConfig, corrected: bool):
    def work(client):
        return local_round(
            client, server.x, server.c, _steps(client, cfg), cfg.eta_l, cfg.batch_size, corrected
        )

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(work, clients))
    return [work(cl) for cl in clients]


def run_round(server: ServerState, clients: list[ClientState], cfg: RoundConfig) -> RoundRecord:
    if server.round >= cfg.total_rounds:
        raise ValueError(f"round {server.round} already reached the limit {cfg.total_rounds}")
    start = time.perf_counter()
    r = server.round + 1
    n = len(clients)
    alice = server.alice
    everyone, corrected, weighted = ALGORITHM_TRAITS[server.algorithm]

    if not everyone:
        client = clients[alice]
        upd = local_round(
            client, server.x, server.c, _steps(client, cfg), cfg.eta_l, cfg.batch_size, False
        )
        server.x = server.x + upd.delta_y
        weights = np.zeros(n)
        weights[alice] = 1.0
        distances = np.zeros(n)
    else:
        old_controls = [cl.local_control for cl in clients]
        updates = _train_all(server, clients, cfg, corrected)
        distances = pairwise_distances(updates, alice)
        if server.weight_override is not None:
            weights = np.asarray(server.weight_override, dtype=np.float64)
        elif weighted:
            if server.weight_state is None:
                server.weight_state = WeightState.uniform(n)
            level = schedule_value(server.schedule, r)
            out = calc_weights(
                distances, alice, r, cfg.total_rounds, level, level, server.weight_state
            )
            weights = out.alpha_smoothed
            distances = out.distances
        else:
            weights = np.full(n, 1.0 / n)
        delta_x, delta_c = aggregate(updates, weights)
        server.x = server.x + server.eta_g * delta_x
        if corrected:
            server.c = server.c + delta_c
            if server.control_update == "reweighted" and server.prev_weights is not None:
                shift = weights - server.prev_weights
                for s_i, c_i in zip(shift, old_controls):
                    server.c = server.c + s_i * c_i
        server.prev_weights = weights

    server.round = r
    test = clients[alice].data.test
    acc = predict_accuracy(clients[alice].model, server.x, test.as_batch())
    server.best = max(server.best, acc)
    return RoundRecord(
        round=r,
        weights=weights,
        distances=distances,
        alice_test_accuracy=acc,
        best_so_far=server.best,
        wall_time=time.perf_counter() - start,
    )


def seed_for(master_seed: int, *path: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([master_seed, *path])


def build_dataset(cfg: ExperimentConfig, spec: PartitionSpec):
    if cfg.dataset == "idx_mnist":
        return load_idx(cfg.images_path, cfg.labels_path)
    per_class = cfg.per_class or required_per_class(spec)
    return generate_synthetic(
        num_classes=10,
        input_dim=cfg.input_dim,
        per_class=per_class,
        spread=cfg.spread,
        seed=seed_for(cfg.master_seed, _DATA),
    )


def partition_spec(cfg: ExperimentConfig, alice_index: int | None = None) -> PartitionSpec:
    common = dict(
        num_agents=cfg.num_agents,
        alice_index=cfg.alice_index if alice_index is None else alice_index,
        seed=int(seed_for(cfg.master_seed, _PARTITION).generate_state(1)[0]),
        samples_per_agent=cfg.samples_per_agent,
        test_fraction=cfg.test_fraction,
    )
    if isinstance(cfg.distribution, str):
        return PartitionSpec.named(cfg.distribution, **common)
    return PartitionSpec(proportions=cfg.distribution, **common)


def model_spec(cfg: ExperimentConfig, input_dim: int) -> ModelSpec:
    return ModelSpec(cfg.model_kind, input_dim, 10, cfg.hidden_dims)


@dataclass
class Experiment:
    cfg: ExperimentConfig
    bundles: list[AgentDataBundle]
    server: ServerState
    clients: list[ClientState]
    round_cfg: RoundConfig

    def run(self) -> list[RoundRecord]:
        records = []
        for _ in range(self.round_cfg.total_rounds):
            rec = run_round(self.server, self.clients, self.round_cfg)
            log.debug("round %d acc=%.4f", rec.round, rec.alice_test_accuracy)
            records.append(rec)
        return records


def build_experiment(
    cfg: ExperimentConfig,
    bundles: list[AgentDataBundle] | None = None,
    alice_index: int | None = None,
) -> Experiment:
    alice = cfg.alice_index if alice_index is None else alice_index
    if bundles is None:
        spec = partition_spec(cfg)
        bundles = build_partition(build_dataset(cfg, spec), spec)
    model = model_spec(cfg, bundles[0].train.features.shape[1])
    clients = [
        ClientState.create(b, model, seed_for(cfg.master_seed, _AGENT, i))
        for i, b in enumerate(bundles)
    ]
    x0 = init_params(model, seed_for(cfg.master_seed, _INIT))
    schedule = Schedule(
        kind=cfg.schedule,
        delta_omega=cfg.delta_omega,
        total_rounds=max(cfg.rounds, 1),
        value=cfg.schedule_value,
        offset=cfg.schedule_offset,
    )
    server = ServerState(
        x=x0,
        c=np.zeros_like(x0),
        algorithm=cfg.algorithm,
        eta_g=cfg.eta_g,
        alice=alice,
        schedule=schedule,
        weight_state=WeightState.uniform(len(clients)),
        control_update=cfg.control_update,
    )
    round_cfg = RoundConfig(
        total_rounds=cfg.rounds,
        eta_l=cfg.eta_l,
        batch_size=cfg.batch_size,
        local_steps=cfg.local_steps,
        workers=cfg.workers,
    )
    return Experiment(cfg, bundles, server, clients, round_cfg)


def run_experiment(cfg: ExperimentConfig) -> list[RoundRecord]:
    return build_experiment(cfg).run()


def run_multi_alice(cfg: ExperimentConfig, alices=None) -> dict[int, list[RoundRecord]]:
    """Personalise for several agents in turn over one shared partition.

    The data partition keeps ``cfg.alice_index`` as the unshifted agent, so
    under concept shift other requesters see their own relabelled task.
    """
    spec = partition_spec(cfg)
    bundles = build_partition(build_dataset(cfg, spec), spec)
    alices = range(cfg.num_agents) if alices is None else alices
    return {a: build_experiment(cfg, bundles, alice_index=a).run() for a in alices}
