"""A small from-scratch learner: multinomial logistic regression or MLP.

Forward/backward passes are plain numpy in float64.  The loss is softmax
cross-entropy; hidden layers use relu or tanh.  Weights travel as one flat
vector plus per-layer shape metadata so aggregation is a vector average and
the serialized byte size doubles as the model-transmission cost.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import EmptyShardError, ShapeMismatchError

ACTIVATIONS = ("relu", "tanh")
BYTES_PER_VALUE = 8


@dataclass(frozen=True)
class ModelSpec:
    """Layer widths (input, hidden..., output) and the hidden activation."""

    layer_sizes: tuple[int, ...]
    activation: str = "relu"

    def __post_init__(self) -> None:
        if len(self.layer_sizes) < 2:
            raise ValueError("need at least input and output layers")
        if any(s <= 0 for s in self.layer_sizes):
            raise ValueError("layer sizes must be positive")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")

    @property
    def layer_shapes(self) -> tuple[tuple[int, int, int], ...]:
        """Per-layer (rows, cols, bias_len) for the weight matrices."""
        sizes = self.layer_sizes
        return tuple((sizes[i], sizes[i + 1], sizes[i + 1]) for i in range(len(sizes) - 1))

    @property
    def n_params(self) -> int:
        return sum(r * c + b for r, c, b in self.layer_shapes)


@dataclass(frozen=True)
class ModelWeights:
    """Flat float64 parameter vector plus layer-shape metadata."""

    values: np.ndarray
    shapes: tuple[tuple[int, int, int], ...]

    def __post_init__(self) -> None:
        expected = sum(r * c + b for r, c, b in self.shapes)
        if len(self.values) != expected:
            raise ShapeMismatchError(
                f"flat vector has {len(self.values)} values, shapes require {expected}"
            )

    def layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Read-only (W, b) views into the flat vector."""
        out = []
        offset = 0
        for rows, cols, bias in self.shapes:
            w = self.values[offset : offset + rows * cols].reshape(rows, cols)
            offset += rows * cols
            b = self.values[offset : offset + bias]
            offset += bias
            out.append((w, b))
        return out

    def to_bytes(self) -> bytes:
        """Little-endian blob: 4-byte header length, JSON shapes, raw values."""
        header = json.dumps({"shapes": [list(s) for s in self.shapes]}).encode()
        body = np.ascontiguousarray(self.values, dtype="<f8").tobytes()
        return len(header).to_bytes(4, "little") + header + body

    @classmethod
    def from_bytes(cls, blob: bytes) -> "ModelWeights":
        header_len = int.from_bytes(blob[:4], "little")
        header = json.loads(blob[4 : 4 + header_len])
        shapes = tuple(tuple(s) for s in header["shapes"])
        values = np.frombuffer(blob[4 + header_len :], dtype="<f8").astype(np.float64)
        return cls(values, shapes)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float
    epochs: int
    batch_size: int
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.epochs <= 0 or self.batch_size <= 0:
            raise ValueError("epochs and batch_size must be positive")


def init_weights(spec: ModelSpec, seed: int) -> ModelWeights:
    """Fan-in-scaled uniform init; biases zero; deterministic per seed."""
    rng = np.random.default_rng(seed)
    chunks = []
    for rows, cols, bias in spec.layer_shapes:
        bound = 1.0 / np.sqrt(rows)
        chunks.append(rng.uniform(-bound, bound, rows * cols))
        chunks.append(np.zeros(bias))
    return ModelWeights(np.concatenate(chunks), spec.layer_shapes)


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _forward(w: ModelWeights, x: np.ndarray, activation: str) -> tuple[list[np.ndarray], np.ndarray]:
    """Returns hidden activations (input first) and output probabilities."""
    layers = w.layers()
    acts = [x]
    h = x
    for wmat, b in layers[:-1]:
        h = _activate(h @ wmat + b, activation)
        acts.append(h)
    wmat, b = layers[-1]
    logits = h @ wmat + b
    logits = logits - logits.max(axis=1, keepdims=True)
    exps = np.exp(logits)
    probs = exps / exps.sum(axis=1, keepdims=True)
    return acts, probs


def _check_dim(w: ModelWeights, features: np.ndarray) -> None:
    if features.shape[1] != w.shapes[0][0]:
        raise ShapeMismatchError(
            f"features have dim {features.shape[1]}, model expects {w.shapes[0][0]}"
        )


def loss_and_grad(
    w: ModelWeights, features: np.ndarray, labels: np.ndarray, activation: str = "relu"
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its gradient as a flat vector."""
    _check_dim(w, features)
    n = len(features)
    acts, probs = _forward(w, features, activation)
    loss = float(-np.log(probs[np.arange(n), labels] + 1e-300).mean())

    layers = w.layers()
    delta = probs.copy()
    delta[np.arange(n), labels] -= 1.0
    delta /= n

    grads: list[np.ndarray] = []
    for i in range(len(layers) - 1, -1, -1):
        wmat, _ = layers[i]
        grad_w = acts[i].T @ delta
        grad_b = delta.sum(axis=0)
        grads.append(grad_b)
        grads.append(grad_w.ravel())
        if i > 0:
            delta = delta @ wmat.T
            if activation == "relu":
                delta = delta * (acts[i] > 0)
            else:
                delta = delta * (1.0 - acts[i] ** 2)
    flat = np.concatenate(grads[::-1])
    return loss, flat


def client_update(
    w: ModelWeights, shard, cfg: TrainConfig, activation: str = "relu"
) -> ModelWeights:
    """Local multi-epoch mini-batch SGD starting from w; w itself untouched."""
    if shard.n_k == 0:
        raise EmptyShardError(f"node {shard.owner} has no data")
    _check_dim(w, shard.features)
    rng = np.random.default_rng(cfg.seed)
    values = w.values.copy()
    current = ModelWeights(values, w.shapes)
    n = shard.n_k
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = perm[start : start + cfg.batch_size]
            _, grad = loss_and_grad(current, shard.features[batch], shard.labels[batch], activation)
            values = values - cfg.learning_rate * grad
            current = ModelWeights(values, w.shapes)
    return current


def evaluate(w: ModelWeights, data, activation: str = "relu") -> tuple[float, float]:
    """Mean cross-entropy and top-1 accuracy; argmax ties go to the lowest class."""
    if len(data.features) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    _check_dim(w, data.features)
    n = len(data.features)
    _, probs = _forward(w, data.features, activation)
    loss = float(-np.log(probs[np.arange(n), data.labels] + 1e-300).mean())
    predictions = probs.argmax(axis=1)
    accuracy = float((predictions == data.labels).mean())
    return loss, accuracy


def model_constants(spec: ModelSpec) -> tuple[int, int]:
    """Per-model cost constants (bytes): serialized size and memory footprint.

    The first is the exact length of the serialized weight blob, which is
    what a worker transmits each round.  The second charges the parameters
    plus the widest single activation at batch size 1.
    """
    zero = ModelWeights(np.zeros(spec.n_params), spec.layer_shapes)
    serialized_size = len(zero.to_bytes())
    memory = BYTES_PER_VALUE * (spec.n_params + max(spec.layer_sizes))
    return serialized_size, memory
