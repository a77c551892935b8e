"""Federated averaging harness: client sharding, seeded per-round sampling,
local training, and sample-count-weighted aggregation.

Aggregation always consumes client results in client-id order, so the global
model is bit-identical no matter how client updates were scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import DatasetSplit
from .params import ParameterSet
from .tensor import Tensor
from .training import TrainConfig, train_model

SALT_PARTITION = 0xFA27
SALT_SAMPLE = 0x5E1E

PARTITION_POLICIES = ("by_user", "iid_shards")


@dataclass
class FedConfig:
    num_clients: int = 100
    sample_ratio: float = 0.1
    rounds: int = 5
    local_epochs: int = 1
    seed: int = 0
    partition: str = "by_user"

    def __post_init__(self):
        if not (0.0 < self.sample_ratio <= 1.0):
            raise ValueError(f"sample_ratio must be in (0, 1], got {self.sample_ratio}")
        if self.partition not in PARTITION_POLICIES:
            raise ValueError(f"unknown partition policy {self.partition!r}")
        if self.clients_per_round < 1:
            raise ValueError("clients_per_round rounds to zero; raise sample_ratio")

    @property
    def clients_per_round(self) -> int:
        return int(round(self.num_clients * self.sample_ratio))

    def to_dict(self) -> dict:
        return {"num_clients": self.num_clients, "sample_ratio": self.sample_ratio,
                "rounds": self.rounds, "local_epochs": self.local_epochs,
                "seed": self.seed, "partition": self.partition}


@dataclass
class ClientShard:
    client_id: str
    samples: list
    labels: list

    @property
    def sample_count(self) -> int:
        return len(self.samples)


@dataclass
class RoundReport:
    round_index: int
    selected: list[str]
    client_losses: dict[str, float]
    client_counts: dict[str, int]
    global_accuracy: float

    def to_dict(self) -> dict:
        return {"round": self.round_index, "selected": self.selected,
                "client_losses": self.client_losses, "client_counts": self.client_counts,
                "global_accuracy": self.global_accuracy}


def partition(split: DatasetSplit, policy: str, num_clients: int, seed: int) -> list[ClientShard]:
    """Disjoint, covering shards of the train split.

    by_user keeps whole users together (users round-robined by descending
    sample count); iid_shards shuffles samples and chunks them. A single
    client always receives the train split in its original order.
    """
    if policy not in PARTITION_POLICIES:
        raise ValueError(f"unknown partition policy {policy!r}")
    if num_clients < 1:
        raise ValueError("num_clients must be >= 1")
    train = split.train
    labels = [split.label(s) for s in train]
    width = len(str(max(num_clients - 1, 1)))

    def shard(cid: int, idx) -> ClientShard:
        return ClientShard(f"c{cid:0{width}d}", [train[i] for i in idx],
                           [labels[i] for i in idx])

    if num_clients == 1:
        return [shard(0, range(len(train)))]
    if policy == "by_user":
        counts = {u: 0 for u in split.users}
        for s in train:
            counts[s.user_id] += 1
        if num_clients > len(split.users):
            raise ValueError(
                f"by_user partition: {num_clients} clients but only {len(split.users)} users")
        ordered_users = sorted(split.users, key=lambda u: (-counts[u], u))
        assignment = {u: k % num_clients for k, u in enumerate(ordered_users)}
        buckets: list[list[int]] = [[] for _ in range(num_clients)]
        for i, s in enumerate(train):
            buckets[assignment[s.user_id]].append(i)
        return [shard(c, b) for c, b in enumerate(buckets)]
    # iid_shards
    if num_clients > len(train):
        raise ValueError(f"iid_shards partition: {num_clients} clients but only "
                         f"{len(train)} train samples")
    rng = np.random.default_rng([seed, SALT_PARTITION])
    perm = rng.permutation(len(train))
    return [shard(c, chunk) for c, chunk in enumerate(np.array_split(perm, num_clients))]


def client_update(global_params: ParameterSet, model_cfg, shard: ClientShard,
                  local_epochs: int, tcfg: TrainConfig,
                  epoch_offset: int = 0) -> tuple[ParameterSet, int, float]:
    """Train a private copy of the global weights on one shard; the global
    weights are untouched. Returns (weights, sample_count, final local loss)."""
    from .model import DualChannelModel

    if shard.sample_count == 0:
        raise ValueError(f"client {shard.client_id}: empty shard")
    local = DualChannelModel(model_cfg, global_params.copy())
    losses = train_model(local, shard.samples, shard.labels, tcfg,
                         epochs=local_epochs, epoch_offset=epoch_offset)
    return local.params, shard.sample_count, (losses[-1] if losses else float("nan"))


def fedavg_aggregate(updates: list[tuple[str, ParameterSet, int]]) -> ParameterSet:
    """Sample-count-weighted mean, accumulated in client-id order."""
    if not updates:
        raise ValueError("fedavg_aggregate: no client updates")
    updates = sorted(updates, key=lambda u: u[0])
    total = sum(count for _, _, count in updates)
    if total <= 0:
        raise ValueError("fedavg_aggregate: total sample count is zero")
    names = updates[0][1].names()
    for cid, params, _ in updates:
        if params.names() != names:
            raise ValueError(f"fedavg_aggregate: client {cid} parameter names differ")
    out = ParameterSet()
    for name in names:
        ref_shape = updates[0][1][name].data.shape
        acc = np.zeros(ref_shape)
        for cid, params, count in updates:
            if params[name].data.shape != ref_shape:
                raise ValueError(
                    f"fedavg_aggregate: client {cid} shape {params[name].data.shape} != {ref_shape} for {name}")
            acc += (count / total) * params[name].data
        out.add(name, Tensor(acc, requires_grad=True))
    return out


def run_rounds(fed: FedConfig, model, split: DatasetSplit,
               tcfg: TrainConfig) -> list[RoundReport]:
    """FedAvg rounds over a shared global model (mutated in place): sample
    clients without replacement, train locally, aggregate, evaluate on test."""
    from .evaluation import evaluate_identification

    shards = partition(split, fed.partition, fed.num_clients, fed.seed)
    reports: list[RoundReport] = []
    for r in range(fed.rounds):
        rng = np.random.default_rng([fed.seed, SALT_SAMPLE, r])
        chosen = sorted(rng.choice(fed.num_clients, size=fed.clients_per_round, replace=False))
        updates = []
        losses: dict[str, float] = {}
        counts: dict[str, int] = {}
        for c in chosen:
            shard = shards[c]
            weights, count, loss = client_update(
                model.params, model.cfg, shard, fed.local_epochs, tcfg,
                epoch_offset=r * fed.local_epochs)
            updates.append((shard.client_id, weights, count))
            losses[shard.client_id] = loss
            counts[shard.client_id] = count
        model.params = fedavg_aggregate(updates)
        acc = evaluate_identification(model, split.test, split.user_index).accuracy
        reports.append(RoundReport(r, [shards[c].client_id for c in chosen],
                                   losses, counts, acc))
    return reports


def write_round_reports(reports: list[RoundReport], path) -> None:
    """One JSON object per line, appended in round order."""
    import json

    with open(path, "w", encoding="utf-8") as fh:
        for report in reports:
            fh.write(json.dumps(report.to_dict(), sort_keys=True) + "\n")
