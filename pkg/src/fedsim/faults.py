"""Fault planning and injection for worker nodes.

Failures are planned against the currently selected set: a seeded uniform
subset of eta disconnects at a given round.  Permanent failures never
recover; transient ones last a single round.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .topology import WorkerNode

FAILURE_MODES = ("permanent", "transient-one-round")


@dataclass(frozen=True)
class FailureSchedule:
    """Which node ids fail at which round."""

    entries: dict[int, frozenset[int]] = field(default_factory=dict)
    mode: str = "permanent"
    fraction: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in FAILURE_MODES:
            raise ValueError(f"mode must be one of {FAILURE_MODES}")
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError("fraction must be in [0, 1]")

    def failing_at(self, round_idx: int) -> frozenset[int]:
        return self.entries.get(round_idx, frozenset())

    def scheduled_before(self, round_idx: int) -> set[int]:
        out: set[int] = set()
        for r, ids in self.entries.items():
            if r < round_idx:
                out |= ids
        return out


def plan_failures(
    eta: tuple[int, ...] | list[int],
    fraction: float,
    round_idx: int,
    seed: int,
    mode: str = "permanent",
) -> FailureSchedule:
    """Schedule floor(fraction * |eta|) distinct members of eta at one round."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must be in [0, 1]")
    count = int(fraction * len(eta))
    if count == 0:
        return FailureSchedule(entries={}, mode=mode, fraction=fraction, seed=seed)
    rng = np.random.default_rng(seed)
    chosen = rng.choice(np.array(sorted(eta)), size=count, replace=False)
    return FailureSchedule(
        entries={round_idx: frozenset(int(i) for i in chosen)},
        mode=mode,
        fraction=fraction,
        seed=seed,
    )


def apply_failures(nodes: list[WorkerNode], schedule: FailureSchedule, round_idx: int) -> None:
    """Toggle alive flags for this round; mutates the node list in place."""
    failing = schedule.failing_at(round_idx)
    revived = (
        schedule.scheduled_before(round_idx) - failing
        if schedule.mode == "transient-one-round"
        else set()
    )
    for node in nodes:
        if node.id in failing:
            node.alive = False
        elif node.id in revived:
            node.alive = True


def schedule_to_csv(schedule: FailureSchedule, path: str) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["round", "node_id", "mode"])
        for round_idx in sorted(schedule.entries):
            for node_id in sorted(schedule.entries[round_idx]):
                writer.writerow([round_idx, node_id, schedule.mode])


def schedule_from_csv(path: str) -> FailureSchedule:
    entries: dict[int, set[int]] = {}
    mode = "permanent"
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        for row in reader:
            entries.setdefault(int(row["round"]), set()).add(int(row["node_id"]))
            mode = row["mode"]
    return FailureSchedule(
        entries={r: frozenset(ids) for r, ids in entries.items()}, mode=mode
    )
