"""A learning dispatcher for the pickup-and-delivery environment server.

Talks the line-delimited JSON protocol only; the environment package is
never imported.  The pieces: a protocol client, an attention policy
with relation-aware biases and informative priors, and a PPO trainer.
"""

from .baseline import prior_joint_action, run_prior_episode
from .client import DEFAULT_SERVER_COMMAND, EnvClient, open_endpoint, parse_endpoint
from .features import DenseInputs, EntitySet, entity_sequence, featurize, relation_tensors
from .model import (
    DecodeResult,
    DispatchPolicy,
    JointAction,
    ModelConfig,
    rel_aware_attention,
    sample_index,
)
from .obs import DEFER, EpisodeContext, Observation, ProtocolError, StepReply
from .ppo import (
    PPOConfig,
    RolloutBuffer,
    TrainingError,
    compute_gae,
    lr_schedule,
    ppo_losses,
    td_targets,
)
from .priors import DEFAULT_PRIOR, PriorConfig, destination_weights, vehicle_choice_weights
from .trainer import (
    ConfigError,
    TrainConfig,
    collect_episode,
    evaluate,
    load_checkpoint,
    policy_from_checkpoint,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_PRIOR",
    "DEFAULT_SERVER_COMMAND",
    "DEFER",
    "ConfigError",
    "DecodeResult",
    "DenseInputs",
    "DispatchPolicy",
    "EntitySet",
    "EnvClient",
    "EpisodeContext",
    "JointAction",
    "ModelConfig",
    "Observation",
    "PPOConfig",
    "PriorConfig",
    "ProtocolError",
    "RolloutBuffer",
    "StepReply",
    "TrainConfig",
    "TrainingError",
    "collect_episode",
    "compute_gae",
    "destination_weights",
    "entity_sequence",
    "evaluate",
    "featurize",
    "load_checkpoint",
    "lr_schedule",
    "open_endpoint",
    "parse_endpoint",
    "policy_from_checkpoint",
    "ppo_losses",
    "prior_joint_action",
    "rel_aware_attention",
    "relation_tensors",
    "run_prior_episode",
    "sample_index",
    "td_targets",
    "train",
    "vehicle_choice_weights",
]
