"""The training loop: collect, estimate advantages, update, validate.

Every iteration plays a fixed number of complete episodes with the
current policy (sampling), flattens them into advantage-weighted
samples, and runs minibatch PPO epochs over a deterministic shuffle.
The learning rate follows the warmup/decay schedule indexed by
cumulative environment steps.

Randomness is functionally derived from the one master seed: episode
seeds, per-episode sampling streams, validation streams and shuffle
order are all computed from (seed, purpose, iteration, slot) tuples, so
a resumed run only needs the counters stored in the checkpoint to
continue on the exact same sequence.

Validation replays a fixed seed set by sampling with per-seed derived
streams; identical parameters therefore score identically, and
checkpoints stay comparable.  The best checkpoint is the one with the
highest validation mean objective.
"""

from __future__ import annotations

import csv
import threading
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from .client import EnvClient, open_endpoint, parse_endpoint
from .model import DispatchPolicy, ModelConfig
from .ppo import (
    EpisodeRollout,
    PPOConfig,
    RolloutBuffer,
    TrainingError,
    Transition,
    lr_schedule,
    ppo_losses,
)
from .priors import PriorConfig

CHECKPOINT_VERSION = 1

METRIC_COLUMNS = [
    "iteration",
    "env_steps",
    "mean_reward",
    "actor_loss",
    "critic_loss",
    "total_loss",
    "lr",
    "val_obj",
    "val_comp",
]


class ConfigError(ValueError):
    """Bad invocation or configuration input."""


@dataclass
class TrainConfig:
    seed: int = 0
    total_steps: int = 16_000
    rollout_episodes: int = 4
    minibatch_size: int = 256
    target_lr: float = 1e-4
    validation_episodes: int = 4
    validation_interval: int = 1
    validation_seed_base: int = 10_000
    workers: int = 1
    model: ModelConfig = field(default_factory=ModelConfig)
    ppo: PPOConfig = field(default_factory=PPOConfig)
    prior: PriorConfig = field(default_factory=PriorConfig)

    def __post_init__(self):
        if self.total_steps < 1:
            raise ConfigError("total_steps must be positive")
        if self.rollout_episodes < 1:
            raise ConfigError("rollout_episodes must be positive")
        if self.minibatch_size < 1:
            raise ConfigError("minibatch_size must be positive")
        if self.target_lr < 0:
            raise ConfigError("target_lr must not be negative")
        if self.validation_episodes < 1:
            raise ConfigError("validation_episodes must be positive")
        if self.validation_interval < 1:
            raise ConfigError("validation_interval must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be positive")


def collect_episode(
    client: EnvClient,
    scenario,
    seed: int,
    policy: DispatchPolicy,
    rng: np.random.Generator,
) -> EpisodeRollout:
    """Play one episode to the horizon, sampling the policy."""
    ctx, obs = client.reset(scenario, seed)
    transitions: list[Transition] = []
    total = 0.0
    done = False
    while not done:
        with torch.no_grad():
            decode, value = policy.act(ctx, obs, mode="sample", rng=rng)
        reply = client.step(decode.request_actions, decode.vehicle_actions)
        transitions.append(
            Transition(
                ctx,
                obs,
                decode.action,
                float(decode.log_probability),
                float(value),
                reply.reward,
                reply.done,
            )
        )
        total += reply.reward
        obs = reply.observation
        done = reply.done
    return EpisodeRollout(transitions, total)


def evaluate(
    policy: DispatchPolicy,
    client: EnvClient,
    scenario,
    seeds,
    master_seed: int,
) -> tuple[float, float]:
    """Mean objective and completion over sampled validation episodes.

    Each seed gets a sampling stream derived from (master_seed, 41,
    seed) only, with no iteration in the mix: evaluating unchanged
    parameters twice gives bit-identical numbers.
    """
    objectives = []
    completions = []
    with torch.no_grad():
        for s in seeds:
            rng = np.random.default_rng(np.random.SeedSequence([master_seed, 41, int(s)]))
            ctx, obs = client.reset(scenario, int(s))
            objective = 0.0
            done = False
            while not done:
                decode, _ = policy.act(ctx, obs, mode="sample", rng=rng)
                reply = client.step(decode.request_actions, decode.vehicle_actions)
                objective += reply.reward
                obs = reply.observation
                done = reply.done
            objectives.append(objective)
            completions.append(obs.completion_rate())
    return float(np.mean(objectives)), float(np.mean(completions))


def save_checkpoint(
    path: Path,
    policy: DispatchPolicy,
    optimizer: torch.optim.Optimizer,
    config: TrainConfig,
    iteration: int,
    env_steps: int,
    best_objective: float,
) -> None:
    payload = {
        "version": CHECKPOINT_VERSION,
        "model_config": asdict(config.model),
        "prior_config": asdict(config.prior),
        "model_state": policy.state_dict(),
        "optimizer_state": optimizer.state_dict(),
        "iteration": iteration,
        "env_steps": env_steps,
        "best_objective": best_objective,
    }
    tmp = path.with_name(path.name + ".tmp")
    torch.save(payload, tmp)
    tmp.replace(path)


def load_checkpoint(path: Path) -> dict:
    payload = torch.load(path)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ConfigError(f"unsupported checkpoint version in {path}")
    return payload


def policy_from_checkpoint(payload: dict) -> DispatchPolicy:
    policy = DispatchPolicy(
        ModelConfig(**payload["model_config"]), PriorConfig(**payload["prior_config"])
    )
    policy.load_state_dict(payload["model_state"])
    return policy


def _collect_iteration(policy, clients, scenario, seeds, rngs):
    """Run the iteration's episodes, slot-partitioned across clients.

    With several clients each worker thread owns its own connection and
    walks its arithmetic slice of the slots; results land by slot, so
    the outcome does not depend on thread timing.
    """
    results: list[EpisodeRollout | None] = [None] * len(seeds)
    if len(clients) == 1:
        for slot in range(len(seeds)):
            results[slot] = collect_episode(clients[0], scenario, seeds[slot], policy, rngs[slot])
        return results
    errors: list[BaseException] = []

    def work(w: int) -> None:
        try:
            for slot in range(w, len(seeds), len(clients)):
                results[slot] = collect_episode(
                    clients[w], scenario, seeds[slot], policy, rngs[slot]
                )
        except BaseException as exc:
            errors.append(exc)

    threads = [threading.Thread(target=work, args=(w,)) for w in range(len(clients))]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if errors:
        raise errors[0]
    return results


def train(
    config: TrainConfig,
    scenario,
    endpoint: str = "stdio",
    out_dir: str | Path = "runs/train",
    resume: bool = False,
    server_command: str | None = None,
) -> dict:
    """Run the loop until the step budget is spent; returns a summary.

    Writes metrics.csv (append-only), last.pt after every iteration and
    best.pt whenever validation improves.  `resume` picks counters,
    parameters and optimizer state back up from last.pt; the stored
    model and prior configuration win over the invocation's.
    """
    try:
        kind, _ = parse_endpoint(endpoint)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if kind == "stdio" and config.workers > 1:
        raise ConfigError("a stdio endpoint cannot feed more than one worker")

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics_path = out / "metrics.csv"
    last_path = out / "last.pt"
    best_path = out / "best.pt"

    torch.manual_seed(config.seed)
    policy = DispatchPolicy(config.model, config.prior)
    optimizer = torch.optim.Adam(policy.parameters(), lr=config.target_lr)
    iteration = 0
    env_steps = 0
    best_objective = float("-inf")

    if resume:
        if not last_path.exists():
            raise ConfigError(f"no checkpoint to resume from in {out}")
        payload = load_checkpoint(last_path)
        policy = policy_from_checkpoint(payload)
        optimizer = torch.optim.Adam(policy.parameters(), lr=config.target_lr)
        optimizer.load_state_dict(payload["optimizer_state"])
        iteration = int(payload["iteration"])
        env_steps = int(payload["env_steps"])
        best_objective = float(payload["best_objective"])

    val_seeds = list(
        range(config.validation_seed_base, config.validation_seed_base + config.validation_episodes)
    )
    n_clients = config.workers if kind == "tcp" else 1
    clients = []
    try:
        for _ in range(n_clients):
            clients.append(EnvClient(open_endpoint(endpoint, server_command)))

        write_header = not metrics_path.exists() or metrics_path.stat().st_size == 0
        with metrics_path.open("a", newline="") as fh:
            writer = csv.writer(fh)
            if write_header:
                writer.writerow(METRIC_COLUMNS)
                fh.flush()

            def write_row(mean_reward=None, losses=None, lr=None, val=None):
                row = [iteration, env_steps]
                row.append("" if mean_reward is None else mean_reward)
                for name in ("actor_loss", "critic_loss", "total_loss"):
                    row.append("" if losses is None else losses[name])
                row.append("" if lr is None else lr)
                row.append("" if val is None else val[0])
                row.append("" if val is None else val[1])
                writer.writerow(row)
                fh.flush()

            def maybe_best(val):
                nonlocal best_objective
                if val is not None and val[0] > best_objective:
                    best_objective = val[0]
                    save_checkpoint(
                        best_path, policy, optimizer, config, iteration, env_steps, best_objective
                    )

            if iteration == 0:
                val = evaluate(policy, clients[0], scenario, val_seeds, config.seed)
                maybe_best(val)
                write_row(val=val)

            while env_steps < config.total_steps:
                iteration += 1
                n = config.rollout_episodes
                seeds = [config.seed + iteration * n + slot for slot in range(n)]
                rngs = [
                    np.random.default_rng(
                        np.random.SeedSequence([config.seed, 13, iteration, slot])
                    )
                    for slot in range(n)
                ]
                episodes = _collect_iteration(policy, clients, scenario, seeds, rngs)
                buffer = RolloutBuffer(list(episodes))
                env_steps += buffer.step_count()
                samples = buffer.samples(config.ppo)
                if not samples:
                    raise TrainingError("collected an iteration with no transitions")

                lr = lr_schedule(env_steps, config.total_steps, config.target_lr)
                for group in optimizer.param_groups:
                    group["lr"] = lr
                shuffle_rng = np.random.default_rng(
                    np.random.SeedSequence([config.seed, 900_001, iteration])
                )
                collected = []
                for _ in range(config.ppo.ppo_epochs):
                    order = shuffle_rng.permutation(len(samples))
                    for start in range(0, len(samples), config.minibatch_size):
                        chunk = order[start : start + config.minibatch_size]
                        minibatch = [samples[i] for i in chunk]
                        losses = ppo_losses(minibatch, policy, config.ppo)
                        optimizer.zero_grad()
                        losses["total_loss"].backward()
                        optimizer.step()
                        collected.append({k: float(v.detach()) for k, v in losses.items()})

                mean_reward = float(np.mean([ep.total_reward for ep in episodes]))
                mean_losses = {
                    name: float(np.mean([entry[name] for entry in collected]))
                    for name in ("actor_loss", "critic_loss", "total_loss")
                }
                val = None
                if iteration % config.validation_interval == 0 or env_steps >= config.total_steps:
                    val = evaluate(policy, clients[0], scenario, val_seeds, config.seed)
                maybe_best(val)
                save_checkpoint(
                    last_path, policy, optimizer, config, iteration, env_steps, best_objective
                )
                write_row(mean_reward=mean_reward, losses=mean_losses, lr=lr, val=val)
    finally:
        for client in clients:
            client.close()

    return {
        "iterations": iteration,
        "env_steps": env_steps,
        "best_objective": best_objective,
        "metrics": str(metrics_path),
        "last_checkpoint": str(last_path),
        "best_checkpoint": str(best_path),
    }
