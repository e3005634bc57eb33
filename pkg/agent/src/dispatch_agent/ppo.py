"""Proximal policy optimization over decoded joint actions.

Rollouts store, per environment step, the observation, the joint action,
its log probability and the value estimate at collection time.
Advantages come from generalized advantage estimation computed strictly
within each episode; critic targets are one-step TD values built from
the collection-time value estimates, bootstrapping zero past the final
step.  The update re-decodes each stored action with the current
parameters (the `forced` path of the policy) to get fresh log
probabilities, then applies the clipped surrogate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .model import DispatchPolicy, JointAction
from .obs import EpisodeContext, Observation


class TrainingError(RuntimeError):
    """A numeric invariant broke; aborting beats training on garbage."""


@dataclass
class PPOConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.99
    clip_epsilon: float = 0.2
    critic_coefficient: float = 1.0
    ppo_epochs: int = 1
    normalize_advantages: bool = True

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if not 0.0 < self.gae_lambda <= 1.0:
            raise ValueError("gae_lambda must lie in (0, 1]")
        if not self.clip_epsilon > 0.0:
            raise ValueError("clip_epsilon must be positive")
        if self.critic_coefficient < 0.0:
            raise ValueError("critic_coefficient must not be negative")
        if self.ppo_epochs < 1:
            raise ValueError("ppo_epochs must be at least 1")


def compute_gae(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    gamma: float,
    lam: float,
) -> np.ndarray:
    """Generalized advantage estimation over one trajectory.

    `values` must carry one trailing entry: the bootstrap value of the
    state after the last transition.  A True in `dones` cuts both the
    bootstrap and the recursion, so nothing leaks across episode ends.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    if len(values) != len(rewards) + 1:
        raise ValueError("values must be one longer than rewards")
    if len(dones) != len(rewards):
        raise ValueError("dones must match rewards in length")
    advantages = np.zeros(len(rewards))
    carry = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        alive = 0.0 if dones[t] else 1.0
        delta = rewards[t] + gamma * values[t + 1] * alive - values[t]
        carry = delta + gamma * lam * alive * carry
        advantages[t] = carry
    return advantages


def td_targets(
    rewards: np.ndarray, values: np.ndarray, dones: np.ndarray, gamma: float
) -> np.ndarray:
    """One-step critic targets r_t + gamma V(s_{t+1}), masked at ends."""
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    if len(values) != len(rewards) + 1:
        raise ValueError("values must be one longer than rewards")
    return rewards + gamma * values[1:] * ~dones


def lr_schedule(step: int | float, total_steps: int, target_lr: float) -> float:
    """Linear warmup to the target over the first quarter of training,
    then linear decay back to zero at the end."""
    if total_steps <= 0:
        raise ValueError("total_steps must be positive")
    s = min(max(float(step), 0.0), float(total_steps))
    warmup = total_steps / 4.0
    if s <= warmup:
        return target_lr * s / warmup
    return target_lr * (total_steps - s) / (total_steps - warmup)


@dataclass
class Transition:
    context: EpisodeContext
    observation: Observation
    action: JointAction
    log_probability: float
    value: float
    reward: float
    done: bool


@dataclass
class EpisodeRollout:
    transitions: list[Transition]
    total_reward: float

    def __len__(self) -> int:
        return len(self.transitions)


@dataclass
class Sample:
    """One flattened training example after advantage estimation."""

    context: EpisodeContext
    observation: Observation
    action: JointAction
    log_probability: float
    advantage: float
    td_target: float


@dataclass
class RolloutBuffer:
    episodes: list[EpisodeRollout] = field(default_factory=list)

    def add(self, episode: EpisodeRollout) -> None:
        self.episodes.append(episode)

    def step_count(self) -> int:
        return sum(len(ep) for ep in self.episodes)

    def samples(self, config: PPOConfig) -> list[Sample]:
        """Estimate advantages per episode and flatten.

        The value of the state after the final transition is taken as
        zero; the terminal flag masks it out anyway on full episodes.
        """
        out: list[Sample] = []
        for ep in self.episodes:
            if not ep.transitions:
                continue
            rewards = np.array([tr.reward for tr in ep.transitions])
            dones = np.array([tr.done for tr in ep.transitions])
            values = np.array([tr.value for tr in ep.transitions] + [0.0])
            adv = compute_gae(rewards, values, dones, config.gamma, config.gae_lambda)
            targets = td_targets(rewards, values, dones, config.gamma)
            for tr, a, g in zip(ep.transitions, adv, targets):
                out.append(
                    Sample(
                        tr.context,
                        tr.observation,
                        tr.action,
                        tr.log_probability,
                        float(a),
                        float(g),
                    )
                )
        return out


def ppo_losses(
    minibatch: list[Sample], policy: DispatchPolicy, config: PPOConfig
) -> dict[str, torch.Tensor]:
    """Clipped-surrogate actor loss plus squared-error critic loss.

    Returns actor_loss, critic_loss and total_loss as scalars still
    attached to the graph; total_loss is what gets minimized.  Any
    non-finite value raises TrainingError rather than poisoning the
    optimizer state.
    """
    if not minibatch:
        raise ValueError("empty minibatch")
    new_logps = []
    new_values = []
    for sample in minibatch:
        embeddings = policy.embed(sample.context, sample.observation)
        decode = policy.decode_joint_action(
            embeddings, sample.observation, sample.context, forced=sample.action
        )
        new_logps.append(decode.log_probability)
        new_values.append(policy.value_estimate(embeddings[-1]))
    new_logp = torch.stack(new_logps)
    value = torch.stack(new_values)
    dtype = value.dtype

    old_logp = torch.tensor([s.log_probability for s in minibatch], dtype=dtype)
    advantages = torch.tensor([s.advantage for s in minibatch], dtype=dtype)
    targets = torch.tensor([s.td_target for s in minibatch], dtype=dtype)
    if config.normalize_advantages and len(minibatch) > 1:
        advantages = (advantages - advantages.mean()) / (advantages.std() + 1e-8)

    ratio = torch.exp(new_logp - old_logp)
    clipped = torch.clamp(ratio, 1.0 - config.clip_epsilon, 1.0 + config.clip_epsilon)
    surrogate = torch.minimum(ratio * advantages, clipped * advantages)
    actor_loss = -surrogate.mean()
    critic_loss = ((value - targets) ** 2).mean()
    total_loss = actor_loss + config.critic_coefficient * critic_loss

    losses = {
        "actor_loss": actor_loss,
        "critic_loss": critic_loss,
        "total_loss": total_loss,
    }
    for name, tensor in losses.items():
        if not torch.isfinite(tensor):
            raise TrainingError(
                f"{name} is not finite ({float(tensor.detach())!r}); "
                f"ratio range [{float(ratio.detach().min())!r}, {float(ratio.detach().max())!r}]"
            )
    return losses
