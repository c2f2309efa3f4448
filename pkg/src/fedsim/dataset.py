"""Dataset loading, synthesis, and partitioning across worker nodes.

Supports the IDX binary format (MNIST-style) and a synthetic Gaussian-blob
generator used by the desk-scale experiments.  Partitioning assigns every
sample to exactly one worker shard under one of three policies: equal split,
Normal-distributed shard volumes, or class-exclusive placement.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, IdxConsistencyError, IdxFormatError
from .seeding import derive_seed

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801

PARTITION_KINDS = ("uniform-iid", "normal-volume-iid", "exclusive-class")


@dataclass(frozen=True)
class Sample:
    """One labelled example; features live in [0, 1]."""

    features: np.ndarray
    label: int


@dataclass(frozen=True)
class Dataset:
    """A labelled dataset held as dense arrays.

    `features` is (n, dim) float64 with values in [0, 1]; `labels` is (n,)
    int64 with every entry < n_classes.
    """

    features: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self) -> None:
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D array")
        if len(self.features) != len(self.labels):
            raise ValueError("features and labels length mismatch")
        if len(self.labels) and int(self.labels.max()) >= self.n_classes:
            raise ValueError("label out of range for n_classes")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def sample(self, i: int) -> Sample:
        return Sample(self.features[i], int(self.labels[i]))

    def subset(self, indices: np.ndarray) -> "Dataset":
        return Dataset(self.features[indices], self.labels[indices], self.n_classes)


@dataclass(frozen=True)
class DataShard:
    """The slice of a dataset owned by one worker node.

    `indices` are positions into the source dataset, kept for audit; the
    feature/label arrays are materialized copies in index order.
    """

    owner: int
    indices: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    n_classes: int

    @property
    def n_k(self) -> int:
        return len(self.indices)

    def as_dataset(self) -> Dataset:
        return Dataset(self.features, self.labels, self.n_classes)


@dataclass(frozen=True)
class PartitionSpec:
    kind: str
    mu_frac: float = 0.0
    sigma_frac: float = 0.0
    exclusive_map: dict[int, frozenset[int]] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in PARTITION_KINDS:
            raise ConfigError(f"partition.kind must be one of {PARTITION_KINDS}, got {self.kind!r}")
        if self.kind == "normal-volume-iid":
            if self.mu_frac <= 0:
                raise ConfigError("partition.mu_frac must be > 0")
            if self.sigma_frac < 0:
                raise ConfigError("partition.sigma_frac must be >= 0")


def _read_be_u32(f, path: str) -> int:
    raw = f.read(4)
    if len(raw) != 4:
        raise IdxFormatError(f"{path}: truncated header")
    return struct.unpack(">I", raw)[0]


def load_idx(images_path: str, labels_path: str) -> Dataset:
    """Load an IDX image/label file pair into a Dataset.

    Pixels are scaled to [0, 1]; sample order follows the file. Raises
    IdxFormatError on a bad magic number and IdxConsistencyError when the
    image and label counts disagree.
    """
    with open(images_path, "rb") as f:
        magic = _read_be_u32(f, images_path)
        if magic != IDX_IMAGE_MAGIC:
            raise IdxFormatError(
                f"{images_path}: bad magic 0x{magic:08x}, expected 0x{IDX_IMAGE_MAGIC:08x}"
            )
        n_images = _read_be_u32(f, images_path)
        rows = _read_be_u32(f, images_path)
        cols = _read_be_u32(f, images_path)
        pixels = np.frombuffer(f.read(), dtype=np.uint8)
    if len(pixels) != n_images * rows * cols:
        raise IdxFormatError(f"{images_path}: pixel payload does not match header counts")

    with open(labels_path, "rb") as f:
        magic = _read_be_u32(f, labels_path)
        if magic != IDX_LABEL_MAGIC:
            raise IdxFormatError(
                f"{labels_path}: bad magic 0x{magic:08x}, expected 0x{IDX_LABEL_MAGIC:08x}"
            )
        n_labels = _read_be_u32(f, labels_path)
        labels = np.frombuffer(f.read(), dtype=np.uint8)
    if len(labels) != n_labels:
        raise IdxFormatError(f"{labels_path}: label payload does not match header count")

    if n_images != n_labels:
        raise IdxConsistencyError(
            f"{images_path} has {n_images} images but {labels_path} has {n_labels} labels"
        )

    features = pixels.reshape(n_images, rows * cols).astype(np.float64) / 255.0
    n_classes = int(labels.max()) + 1 if n_labels else 0
    return Dataset(features, labels.astype(np.int64), n_classes)


def _class_centers(n_classes: int, dim: int) -> np.ndarray:
    # Centers depend only on (n_classes, dim), never on the sample seed, so
    # independently seeded draws (train/test splits) share the same geometry.
    rng = np.random.default_rng(derive_seed(0xB10B5, n_classes, dim))
    centers: list[np.ndarray] = []
    min_dist = 0.5
    while len(centers) < n_classes:
        candidate = rng.uniform(0.2, 0.8, dim)
        if all(np.linalg.norm(candidate - c) >= min_dist for c in centers):
            centers.append(candidate)
        else:
            min_dist *= 0.98
    return np.stack(centers)


def synth_blobs(
    n_classes: int, n_per_class: int, dim: int, spread: float, seed: int
) -> Dataset:
    """Generate isotropic Gaussian blobs, one cluster per class.

    Samples are clipped into [0, 1]; the draw is deterministic per seed.
    """
    if n_classes <= 0 or n_per_class <= 0 or dim <= 0:
        raise ValueError("n_classes, n_per_class, and dim must be positive")
    if spread <= 0:
        raise ValueError("spread must be positive")
    centers = _class_centers(n_classes, dim)
    rng = np.random.default_rng(seed)
    features = np.empty((n_classes * n_per_class, dim))
    labels = np.empty(n_classes * n_per_class, dtype=np.int64)
    for c in range(n_classes):
        lo, hi = c * n_per_class, (c + 1) * n_per_class
        features[lo:hi] = rng.normal(centers[c], spread, (n_per_class, dim))
        labels[lo:hi] = c
    np.clip(features, 0.0, 1.0, out=features)
    return Dataset(features, labels, n_classes)


def _largest_remainder(targets: np.ndarray, total: int) -> np.ndarray:
    """Round positive real targets to integers summing to `total`."""
    scaled = targets * (total / targets.sum())
    counts = np.floor(scaled).astype(np.int64)
    remainder = total - int(counts.sum())
    order = np.argsort(-(scaled - counts), kind="stable")
    counts[order[:remainder]] += 1
    # Renormalization can push a clipped draw below one sample; steal from
    # the largest shards to restore the floor.
    while (counts == 0).any():
        counts[int(np.argmax(counts == 0))] += 1
        counts[int(np.argmax(counts))] -= 1
    return counts


def _shard_sizes(n: int, k: int, spec: PartitionSpec) -> np.ndarray:
    if spec.kind == "uniform-iid":
        sizes = np.full(k, n // k, dtype=np.int64)
        sizes[: n % k] += 1
        return sizes
    rng = np.random.default_rng(spec.seed)
    draws = rng.normal(spec.mu_frac, spec.sigma_frac, k) * n
    draws = np.maximum(draws, 1.0)
    return _largest_remainder(draws, n)


def _stratified_order(labels: np.ndarray, n_classes: int, classes: list[int] | None = None) -> list[int]:
    """Interleave sample indices class by class for IID-mixture dealing."""
    wanted = range(n_classes) if classes is None else classes
    per_class = [np.flatnonzero(labels == c).tolist() for c in wanted]
    order: list[int] = []
    longest = max((len(p) for p in per_class), default=0)
    for i in range(longest):
        for p in per_class:
            if i < len(p):
                order.append(p[i])
    return order


def _deal(order: list[int], capacities: np.ndarray) -> list[list[int]]:
    """Deal indices round-robin over shards, skipping full ones."""
    k = len(capacities)
    shards: list[list[int]] = [[] for _ in range(k)]
    remaining = capacities.copy()
    node = 0
    for idx in order:
        while remaining[node % k] == 0:
            node += 1
        shards[node % k].append(idx)
        remaining[node % k] -= 1
        node += 1
    return shards


def partition(dataset: Dataset, k: int, spec: PartitionSpec) -> list[DataShard]:
    """Split a dataset into k disjoint shards that exhaust it.

    Non-exclusive kinds deal a class-stratified stream into shards sized by
    the spec, giving every shard an IID class mixture.  Exclusive-class specs
    confine mapped classes to their mapped nodes and spread everything else
    evenly; volume targets are ignored for that kind.
    """
    if k <= 0:
        raise ValueError("K must be positive")
    if k > len(dataset):
        raise ValueError(f"K={k} exceeds dataset size {len(dataset)}")

    for cls, owners in spec.exclusive_map.items():
        if cls >= dataset.n_classes:
            raise ConfigError(f"exclusive_map class {cls} >= n_classes {dataset.n_classes}")
        for owner in owners:
            if owner >= k or owner < 0:
                raise ConfigError(f"exclusive_map node id {owner} outside [0, {k})")

    if spec.kind == "exclusive-class" and spec.exclusive_map:
        assigned: list[list[int]] = [[] for _ in range(k)]
        mapped_classes = sorted(spec.exclusive_map)
        for cls in mapped_classes:
            owners = sorted(spec.exclusive_map[cls])
            cls_indices = np.flatnonzero(dataset.labels == cls)
            for i, idx in enumerate(cls_indices):
                assigned[owners[i % len(owners)]].append(int(idx))
        free_classes = [c for c in range(dataset.n_classes) if c not in spec.exclusive_map]
        order = _stratified_order(dataset.labels, dataset.n_classes, free_classes)
        for i, idx in enumerate(order):
            assigned[i % k].append(idx)
    else:
        sizes = _shard_sizes(len(dataset), k, spec)
        order = _stratified_order(dataset.labels, dataset.n_classes)
        assigned = _deal(order, sizes)

    shards = []
    for owner, idx_list in enumerate(assigned):
        indices = np.array(sorted(idx_list), dtype=np.int64)
        shards.append(
            DataShard(
                owner=owner,
                indices=indices,
                features=dataset.features[indices],
                labels=dataset.labels[indices],
                n_classes=dataset.n_classes,
            )
        )
    return shards


def shards_to_csv(shards: list[DataShard], path: str) -> None:
    """Audit dump: one row per (node_id, sample_index, label)."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["node_id", "sample_index", "label"])
        for shard in shards:
            for idx, label in zip(shard.indices, shard.labels):
                writer.writerow([shard.owner, int(idx), int(label)])
