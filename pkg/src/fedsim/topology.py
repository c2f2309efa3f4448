"""Edge ecosystem construction: K heterogeneous worker nodes.

Compute power and bandwidth are drawn per node from Normal distributions
clipped at a positive floor; data volume comes from the partitioner.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .dataset import DataShard, Dataset, PartitionSpec, partition
from .seeding import derive_seed


@dataclass
class WorkerNode:
    """A virtual edge device.

    `power` is in operations/second, `bandwidth` in bytes/second, volume in
    samples.  `alive` is the only mutable field; the fault machinery toggles
    it between rounds.
    """

    id: int
    shard: DataShard
    power: float
    bandwidth: float
    alive: bool = True

    @property
    def volume(self) -> int:
        return self.shard.n_k


@dataclass(frozen=True)
class NormalDist:
    mean: float
    std: float
    floor: float

    def __post_init__(self) -> None:
        if self.mean <= 0 or self.floor <= 0:
            raise ValueError("mean and floor must be positive")
        if self.std < 0:
            raise ValueError("std must be >= 0")


@dataclass(frozen=True)
class EcosystemSpec:
    k: int
    power_dist: NormalDist
    bandwidth_dist: NormalDist
    partition: PartitionSpec = field(
        default_factory=lambda: PartitionSpec(kind="uniform-iid")
    )
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k <= 0:
            raise ValueError("K must be positive")


def _draw(dist: NormalDist, k: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.maximum(rng.normal(dist.mean, dist.std, k), dist.floor)


def build_ecosystem(dataset: Dataset, spec: EcosystemSpec) -> list[WorkerNode]:
    """Partition the dataset and attach per-node power/bandwidth draws."""
    shards = partition(dataset, spec.k, spec.partition)
    power = _draw(spec.power_dist, spec.k, derive_seed(spec.seed, "power"))
    bandwidth = _draw(spec.bandwidth_dist, spec.k, derive_seed(spec.seed, "bandwidth"))
    return [
        WorkerNode(id=i, shard=shards[i], power=float(power[i]), bandwidth=float(bandwidth[i]))
        for i in range(spec.k)
    ]


def ecosystem_to_csv(nodes: list[WorkerNode], path: str) -> None:
    """Audit dump: id, volume, power, bandwidth per node."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["id", "volume", "power", "bandwidth"])
        for node in nodes:
            writer.writerow([node.id, node.volume, repr(node.power), repr(node.bandwidth)])
