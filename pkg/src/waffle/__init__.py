"""Weighted-averaging personalised federated learning on top of SCAFFOLD."""

from .client import AgentUpdate, ClientState, local_round, reset_control
from .config import ExperimentConfig, parse_config
from .data import (
    AgentDataBundle,
    LabeledDataset,
    PartitionSpec,
    apply_concept_shift,
    generate_synthetic,
    load_idx,
    partition_by_shift,
)
from .params import MiniBatch, ModelSpec, init_params, loss_and_gradient, predict_accuracy
from .server import RoundRecord, ServerState, aggregate, run_experiment, run_round
from .weights import Schedule, WeightState, calc_weights, pairwise_distances, schedule_value

__all__ = [
    "AgentDataBundle",
    "AgentUpdate",
    "ClientState",
    "ExperimentConfig",
    "LabeledDataset",
    "MiniBatch",
    "ModelSpec",
    "PartitionSpec",
    "RoundRecord",
    "Schedule",
    "ServerState",
    "WeightState",
    "aggregate",
    "apply_concept_shift",
    "calc_weights",
    "generate_synthetic",
    "init_params",
    "load_idx",
    "local_round",
    "loss_and_gradient",
    "pairwise_distances",
    "parse_config",
    "partition_by_shift",
    "predict_accuracy",
    "reset_control",
    "run_experiment",
    "run_round",
    "schedule_value",
]
