"""Simulated clock: per-node round times and round-duration composition.

A node's round time is its local compute time (epochs x per-sample cost x
volume / power) plus the time to transmit the serialized model over its
bandwidth.  A round with failures lasts until the timeout window T has
expired and any replacement dispatch has returned; replacement work is
strictly sequential after T.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .learner import TrainConfig
from .topology import WorkerNode


@dataclass(frozen=True)
class TimingModel:
    compute_cost_per_sample_epoch: float  # operations
    model_bytes: float
    timeout_s: float

    def __post_init__(self) -> None:
        if min(self.compute_cost_per_sample_epoch, self.model_bytes, self.timeout_s) <= 0:
            raise ValueError("timing parameters must be positive")


def node_round_time(node: WorkerNode, tm: TimingModel, cfg: TrainConfig) -> float:
    """Seconds for one node to train locally and upload its model."""
    compute = cfg.epochs * tm.compute_cost_per_sample_epoch * node.volume / node.power
    transmit = tm.model_bytes / node.bandwidth
    return compute + transmit


def round_duration(
    times_primary: list[float],
    failed_any: bool,
    timeout_s: float,
    times_replacement: list[float],
) -> float:
    """Wall-clock length of one round; max of an empty list counts as 0."""
    primary = max(times_primary, default=0.0)
    if not failed_any:
        return primary
    replacement = max(times_replacement, default=0.0)
    return max(primary, timeout_s + replacement)


def default_timeout(nodes: list[WorkerNode], tm_cost: float, model_bytes: float, cfg: TrainConfig) -> float:
    """95th percentile of healthy node round times, the default for T."""
    probe = TimingModel(tm_cost, model_bytes, timeout_s=1.0)
    times = [node_round_time(n, probe, cfg) for n in nodes]
    return float(np.percentile(times, 95))
