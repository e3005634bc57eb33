"""The dispatch policy network.

A Transformer encoder embeds every entity in the current slice; each
attention matrix carries an additive pairwise bias built from entity
relations (request lifecycle state, destination membership, travel
distances).  A Transformer decoder then emits one action per decidable
request and vehicle autoregressively: the growing token sequence
alternates entity and chosen action, and a pointer score against the
candidate embeddings gives the decoded distribution.  That distribution
is multiplied by the feasibility mask and the informative priors, then
renormalized; the joint log probability is the sum of per-step logs.

Capacity is enforced across the slice: volume committed to a vehicle by
an earlier request decision shrinks both the mask and the prior that
later requests see.  Vehicle destination steps can optionally avoid
stations an earlier vehicle already chose, falling back to the unmasked
distribution if that would leave nothing to pick.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .features import (
    KIND_DEFER,
    KIND_REQUEST,
    KIND_STATION,
    KIND_VEHICLE,
    REL_DISTANCE,
    RELATION_CATEGORIES,
    DenseInputs,
    EntitySet,
    entity_sequence,
    featurize,
    relation_tensors,
)
from .obs import DEFER, EpisodeContext, Observation
from .priors import DEFAULT_PRIOR, PriorConfig, destination_weights, vehicle_choice_weights


@dataclass
class ModelConfig:
    """Architecture knobs plus the ablation switches.

    `use_relations` off zeroes the attention bias everywhere;
    `use_priors` off replaces every prior with ones so the fused
    distribution is the decoded one.  `mask_conflicts` steers later
    vehicles away from stations already chosen this slice.
    """

    hidden_size: int = 128
    heads: int = 2
    encoder_layers: int = 6
    decoder_layers: int = 2
    feedforward_size: int | None = None
    max_positions: int = 512
    use_relations: bool = True
    use_priors: bool = True
    mask_conflicts: bool = True

    def __post_init__(self):
        if self.hidden_size <= 0 or self.heads <= 0:
            raise ValueError("hidden size and head count must be positive")
        if self.hidden_size % self.heads != 0:
            raise ValueError("hidden size must divide evenly across heads")
        if self.feedforward_size is None:
            self.feedforward_size = 4 * self.hidden_size


@dataclass
class JointAction:
    """Chosen per-request vehicle (or DEFER) and per-vehicle station."""

    request_actions: dict[int, int]
    vehicle_actions: dict[int, int]


@dataclass
class DecodeStep:
    """One autoregressive decision, with its fused probability."""

    entity: str
    index: int
    chosen: int
    probability: float
    distribution: np.ndarray | None = None


@dataclass
class DecodeResult:
    request_actions: dict[int, int]
    vehicle_actions: dict[int, int]
    log_probability: torch.Tensor
    steps: list[DecodeStep]

    @property
    def action(self) -> JointAction:
        return JointAction(self.request_actions, self.vehicle_actions)


def sample_index(probabilities: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw.  Entries with zero mass are never returned:
    they occupy a flat stretch of the cumulative sum, and a strictly
    interior uniform draw cannot land on a flat stretch."""
    p = np.asarray(probabilities, dtype=np.float64)
    total = p.sum()
    if not total > 0:
        raise ValueError("no probability mass to sample from")
    u = rng.random() * total
    idx = int(np.searchsorted(np.cumsum(p), u, side="right"))
    if idx >= len(p):
        idx = len(p) - 1
    while idx > 0 and p[idx] == 0.0:
        idx -= 1
    return idx


def rel_aware_attention(
    q: torch.Tensor, k: torch.Tensor, v: torch.Tensor, r: torch.Tensor
) -> torch.Tensor:
    """softmax((q kᵀ + r) / sqrt(d_k)) v, with r shared across heads.

    q, k, v are (heads, n, d_k); r is (n_q, n_k) and broadcasts over the
    head axis.
    """
    if q.shape[-1] != k.shape[-1] or k.shape[-2] != v.shape[-2]:
        raise ValueError("attention shapes disagree")
    scores = q @ k.transpose(-2, -1)
    if r.shape[-2:] != scores.shape[-2:]:
        raise ValueError("relation bias shape disagrees with attention scores")
    scores = (scores + r) / math.sqrt(q.shape[-1])
    return torch.softmax(scores, dim=-1) @ v


class RelationEmbedding(nn.Module):
    """Maps relation codes to real biases.

    Category codes index one learnable scalar each; distance codes route
    the cell value through one shared linear map.  Code 0 is a hard
    zero.  Everything starts at zero, so an untrained model behaves like
    a plain Transformer.
    """

    def __init__(self):
        super().__init__()
        self.category = nn.Parameter(torch.zeros(RELATION_CATEGORIES))
        self.distance_weight = nn.Parameter(torch.zeros(1))
        self.distance_bias = nn.Parameter(torch.zeros(1))

    def forward(self, codes: torch.Tensor, values: torch.Tensor) -> torch.Tensor:
        zero = self.category.new_zeros(1)
        table = torch.cat([zero, self.category, zero])
        r = table[codes]
        linear = self.distance_weight * values.to(self.category.dtype) + self.distance_bias
        return torch.where(codes == REL_DISTANCE, linear, r)


class MultiheadRelAttention(nn.Module):
    def __init__(self, hidden_size: int, heads: int):
        super().__init__()
        self.heads = heads
        self.head_dim = hidden_size // heads
        self.q_proj = nn.Linear(hidden_size, hidden_size)
        self.k_proj = nn.Linear(hidden_size, hidden_size)
        self.v_proj = nn.Linear(hidden_size, hidden_size)
        self.out_proj = nn.Linear(hidden_size, hidden_size)

    def forward(
        self, query: torch.Tensor, memory: torch.Tensor, rel: torch.Tensor | None
    ) -> torch.Tensor:
        n_q, n_k = query.shape[0], memory.shape[0]
        q = self.q_proj(query).view(n_q, self.heads, self.head_dim).transpose(0, 1)
        k = self.k_proj(memory).view(n_k, self.heads, self.head_dim).transpose(0, 1)
        v = self.v_proj(memory).view(n_k, self.heads, self.head_dim).transpose(0, 1)
        if rel is None:
            rel = query.new_zeros((n_q, n_k))
        out = rel_aware_attention(q, k, v, rel)
        return self.out_proj(out.transpose(0, 1).reshape(n_q, -1))


class EncoderLayer(nn.Module):
    def __init__(self, hidden_size: int, heads: int, feedforward_size: int):
        super().__init__()
        self.attn = MultiheadRelAttention(hidden_size, heads)
        self.ffw = nn.Sequential(
            nn.Linear(hidden_size, feedforward_size),
            nn.ReLU(),
            nn.Linear(feedforward_size, hidden_size),
        )
        self.norm1 = nn.LayerNorm(hidden_size)
        self.norm2 = nn.LayerNorm(hidden_size)

    def forward(self, x: torch.Tensor, rel: torch.Tensor | None) -> torch.Tensor:
        x = self.norm1(x + self.attn(x, x, rel))
        return self.norm2(x + self.ffw(x))


class DecoderLayer(nn.Module):
    def __init__(self, hidden_size: int, heads: int, feedforward_size: int):
        super().__init__()
        self.self_attn = MultiheadRelAttention(hidden_size, heads)
        self.cross_attn = MultiheadRelAttention(hidden_size, heads)
        self.ffw = nn.Sequential(
            nn.Linear(hidden_size, feedforward_size),
            nn.ReLU(),
            nn.Linear(feedforward_size, hidden_size),
        )
        self.norm1 = nn.LayerNorm(hidden_size)
        self.norm2 = nn.LayerNorm(hidden_size)
        self.norm3 = nn.LayerNorm(hidden_size)

    def forward(
        self,
        x: torch.Tensor,
        memory: torch.Tensor,
        rel_self: torch.Tensor | None,
        rel_cross: torch.Tensor | None,
    ) -> torch.Tensor:
        x = self.norm1(x + self.self_attn(x, x, rel_self))
        x = self.norm2(x + self.cross_attn(x, memory, rel_cross))
        return self.norm3(x + self.ffw(x))


class DispatchPolicy(nn.Module):
    """Encoder, decoder, priors and value head behind one act() call."""

    def __init__(self, config: ModelConfig | None = None, prior: PriorConfig = DEFAULT_PRIOR):
        super().__init__()
        self.config = config if config is not None else ModelConfig()
        self.prior = prior
        hs = self.config.hidden_size
        ffw = self.config.feedforward_size
        self.request_proj = nn.Linear(2, hs, bias=False)
        self.vehicle_proj = nn.Linear(3, hs, bias=False)
        self.station_proj = nn.Linear(2, hs, bias=False)
        self.global_proj = nn.Linear(2, hs, bias=False)
        self.relations = RelationEmbedding()
        self.encoder = nn.ModuleList(
            EncoderLayer(hs, self.config.heads, ffw) for _ in range(self.config.encoder_layers)
        )
        self.decoder = nn.ModuleList(
            DecoderLayer(hs, self.config.heads, ffw) for _ in range(self.config.decoder_layers)
        )
        self.positions = nn.Embedding(self.config.max_positions, hs)
        nn.init.normal_(self.positions.weight, std=0.02)
        self.defer_token = nn.Parameter(torch.randn(hs) * 0.02)
        self.value_head = nn.Sequential(nn.Linear(hs, hs), nn.Tanh(), nn.Linear(hs, 1))

    @property
    def dtype(self) -> torch.dtype:
        return self.defer_token.dtype

    def relation_matrix(
        self, query: EntitySet, keys: EntitySet, obs: Observation, ctx: EpisodeContext
    ) -> torch.Tensor:
        codes, values = relation_tensors(query, keys, obs, ctx)
        return self.relations(
            torch.as_tensor(codes), torch.as_tensor(values, dtype=self.dtype)
        )

    def encode(
        self, dense: DenseInputs, relations: torch.Tensor | None, ctx: EpisodeContext
    ) -> torch.Tensor:
        """Project raw features and run the encoder stack.

        The only conditioning applied to the raw scalars happens here:
        distance columns are divided by the mean network distance, the
        time slot by the horizon.
        """
        vehicles = dense.vehicles.copy()
        mean_e = ctx.mean_distance()
        if mean_e > 0:
            vehicles[:, 2] /= mean_e
        global_info = dense.global_info.copy()
        global_info[0] /= ctx.horizon
        to = lambda a: torch.as_tensor(a, dtype=self.dtype)
        x = torch.cat(
            [
                self.request_proj(to(dense.requests)),
                self.vehicle_proj(to(vehicles)),
                self.station_proj(to(dense.stations)),
                self.global_proj(to(global_info).unsqueeze(0)),
            ]
        )
        for layer in self.encoder:
            x = layer(x, relations)
        return x

    def embed(self, ctx: EpisodeContext, obs: Observation) -> torch.Tensor:
        """Featurize and encode one observation end to end."""
        dense = featurize(obs)
        entities = entity_sequence(obs)
        rel = (
            self.relation_matrix(entities, entities, obs, ctx)
            if self.config.use_relations
            else None
        )
        return self.encode(dense, rel, ctx)

    def value_estimate(self, global_embedding: torch.Tensor) -> torch.Tensor:
        return self.value_head(global_embedding).squeeze(-1)

    def decode_joint_action(
        self,
        embeddings: torch.Tensor,
        obs: Observation,
        ctx: EpisodeContext,
        mode: str = "sample",
        rng: np.random.Generator | None = None,
        forced: JointAction | None = None,
        record_distributions: bool = False,
    ) -> DecodeResult:
        """Decode one joint action; see the module docstring for the scheme.

        `forced` replays a stored action instead of choosing, which is
        how updates recompute the log probability of rollout decisions.
        """
        if mode not in ("sample", "greedy"):
            raise ValueError(f"unknown decode mode {mode!r}")
        if mode == "sample" and rng is None and forced is None:
            raise ValueError("sample mode needs an rng")
        n_vehicles = len(obs.vehicles)
        n_stations = ctx.station_count
        n_requests = len(obs.requests)
        memory_entities = entity_sequence(obs)

        committed = [0] * n_vehicles
        onboard_now: list[set[int]] = [set() for _ in range(n_vehicles)]
        claimed: set[int] = set()
        chosen_stations: set[int] = set()
        seq: list[tuple[int, int]] = []
        request_actions: dict[int, int] = {}
        vehicle_actions: dict[int, int] = {}
        steps: list[DecodeStep] = []
        log_probability = embeddings.new_zeros(())

        def token_embedding(kind: int, index: int) -> torch.Tensor:
            if kind == KIND_REQUEST:
                return embeddings[index]
            if kind == KIND_VEHICLE:
                return embeddings[n_requests + index]
            if kind == KIND_STATION:
                return embeddings[n_requests + n_vehicles + index]
            return self.defer_token

        def last_hidden() -> torch.Tensor:
            if len(seq) > self.config.max_positions:
                raise RuntimeError(
                    f"decode sequence length {len(seq)} exceeds max_positions"
                )
            tokens = torch.stack([token_embedding(kind, i) for kind, i in seq])
            tokens = tokens + self.positions(torch.arange(len(seq)))
            seq_set = EntitySet.from_pairs(seq)
            rel_self = rel_cross = None
            if self.config.use_relations:
                rel_self = self.relation_matrix(seq_set, seq_set, obs, ctx)
                rel_cross = self.relation_matrix(seq_set, memory_entities, obs, ctx)
            x = tokens
            for layer in self.decoder:
                x = layer(x, embeddings, rel_self, rel_cross)
            return x[-1]

        def pick(fused: torch.Tensor, forced_choice: int | None):
            total = fused.sum()
            if not total.item() > 0:
                raise RuntimeError("fused action distribution has no mass")
            probs = fused / total
            flat = probs.detach().cpu().numpy().astype(np.float64)
            if forced_choice is not None:
                if not 0 <= forced_choice < len(flat) or flat[forced_choice] == 0.0:
                    raise RuntimeError(
                        f"forced action {forced_choice} has no probability mass"
                    )
                choice = forced_choice
            elif mode == "greedy":
                choice = int(np.argmax(flat))
            else:
                choice = sample_index(flat, rng)
            return choice, probs[choice], (flat if record_distributions else None)

        scale = 1.0 / math.sqrt(self.config.hidden_size)
        vehicle_rows = embeddings[n_requests : n_requests + n_vehicles]
        station_rows = embeddings[n_requests + n_vehicles : n_requests + n_vehicles + n_stations]

        for m in obs.decidable_requests():
            req = obs.request_by_id(m)
            seq.append((KIND_REQUEST, obs.request_position(m)))
            h = last_hidden()
            keys = torch.cat([vehicle_rows, self.defer_token.unsqueeze(0)])
            dec = torch.softmax(keys @ h * scale, dim=0)
            mask = obs.request_masks[m].copy()
            for k in range(n_vehicles):
                if mask[k] and obs.vehicles[k].space - committed[k] < req.volume:
                    mask[k] = False
            if self.config.use_priors:
                pri = vehicle_choice_weights(obs, req, self.prior, committed)
            else:
                pri = np.ones(n_vehicles + 1)
            fused = (
                dec
                * torch.as_tensor(mask, dtype=dec.dtype)
                * torch.as_tensor(pri, dtype=dec.dtype)
            )
            forced_choice = None
            if forced is not None:
                if m not in forced.request_actions:
                    raise ValueError(f"forced action misses request {m}")
                wire = forced.request_actions[m]
                forced_choice = n_vehicles if wire == DEFER else wire
            choice, prob, dist = pick(fused, forced_choice)
            if choice == n_vehicles:
                request_actions[m] = DEFER
                seq.append((KIND_DEFER, 0))
            else:
                request_actions[m] = choice
                committed[choice] += req.volume
                onboard_now[choice].add(m)
                claimed.add(m)
                seq.append((KIND_VEHICLE, choice))
            log_probability = log_probability + torch.log(prob)
            steps.append(DecodeStep("request", m, choice, float(prob.detach()), dist))

        for k in obs.decidable_vehicles():
            seq.append((KIND_VEHICLE, k))
            h = last_hidden()
            dec = torch.softmax(station_rows @ h * scale, dim=0)
            mask = obs.vehicle_masks[k]
            if self.config.use_priors:
                pri = destination_weights(obs, ctx, k, self.prior, onboard_now[k], claimed)
            else:
                pri = np.ones(n_stations)
            fused = (
                dec
                * torch.as_tensor(mask, dtype=dec.dtype)
                * torch.as_tensor(pri, dtype=dec.dtype)
            )
            if self.config.mask_conflicts and chosen_stations:
                keep = np.ones(n_stations)
                keep[sorted(chosen_stations)] = 0.0
                spread = fused * torch.as_tensor(keep, dtype=dec.dtype)
                if spread.sum().item() > 0:
                    fused = spread
            forced_choice = None
            if forced is not None:
                if k not in forced.vehicle_actions:
                    raise ValueError(f"forced action misses vehicle {k}")
                forced_choice = forced.vehicle_actions[k]
            choice, prob, dist = pick(fused, forced_choice)
            vehicle_actions[k] = choice
            chosen_stations.add(choice)
            seq.append((KIND_STATION, choice))
            log_probability = log_probability + torch.log(prob)
            steps.append(DecodeStep("vehicle", k, choice, float(prob.detach()), dist))

        return DecodeResult(request_actions, vehicle_actions, log_probability, steps)

    def act(
        self,
        ctx: EpisodeContext,
        obs: Observation,
        mode: str = "sample",
        rng: np.random.Generator | None = None,
        forced: JointAction | None = None,
    ) -> tuple[DecodeResult, torch.Tensor]:
        """Embed, decode and value one observation."""
        embeddings = self.embed(ctx, obs)
        decode = self.decode_joint_action(embeddings, obs, ctx, mode, rng, forced)
        return decode, self.value_estimate(embeddings[-1])
