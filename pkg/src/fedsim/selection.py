"""Worker selection: score-based ranking plus the naive baselines.

The selection score for a node combines its transmission cost, its compute
cost, and an inverse-volume factor:

    S = (alpha / B + kappa * V / P) * (1 / V)

with alpha the serialized model size and kappa the model memory requirement,
both in bytes.  Higher S ranks higher; the top fraction W of alive nodes is
selected each round.  Zero-volume nodes have no defined score and rank last.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import EmptyEcosystemError, ScoreUndefinedError
from .topology import WorkerNode

STRATEGY_KINDS = ("s-based", "random", "top-volume", "top-power", "top-bandwidth")


@dataclass(frozen=True)
class ScoreParams:
    alpha: float
    kappa: float

    def __post_init__(self) -> None:
        if self.alpha <= 0 or self.kappa <= 0:
            raise ValueError("alpha and kappa must be positive")


@dataclass(frozen=True)
class SelectionStrategy:
    kind: str
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"strategy kind must be one of {STRATEGY_KINDS}")


@dataclass(frozen=True)
class SelectionOutcome:
    """Selected ids in rank order, with scores for every scorable node."""

    eta: tuple[int, ...]
    scores: dict[int, float]
    m: int
    w_fraction: float


def selection_score(node: WorkerNode, p: ScoreParams) -> float:
    """Per-node selection score; undefined for zero-volume nodes."""
    if node.volume == 0:
        raise ScoreUndefinedError(f"node {node.id} has zero volume")
    return (p.alpha / node.bandwidth + p.kappa * node.volume / node.power) / node.volume


def _score_map(nodes: list[WorkerNode], p: ScoreParams) -> dict[int, float]:
    return {n.id: selection_score(n, p) for n in nodes if n.volume > 0}


def _ranked_ids(nodes: list[WorkerNode], strategy: SelectionStrategy, p: ScoreParams) -> list[int]:
    """All alive node ids in rank order for the given strategy."""
    if strategy.kind == "random":
        ids = np.array(sorted(n.id for n in nodes))
        rng = np.random.default_rng(strategy.seed)
        return [int(i) for i in rng.permutation(ids)]
    if strategy.kind == "s-based":
        scored = [n for n in nodes if n.volume > 0]
        unscored = [n for n in nodes if n.volume == 0]
        ranked = sorted(scored, key=lambda n: (-selection_score(n, p), n.id))
        ranked += sorted(unscored, key=lambda n: n.id)
        return [n.id for n in ranked]
    attr = {"top-volume": "volume", "top-power": "power", "top-bandwidth": "bandwidth"}[
        strategy.kind
    ]
    return [n.id for n in sorted(nodes, key=lambda n: (-getattr(n, attr), n.id))]


def select_top(
    nodes: list[WorkerNode],
    w_fraction: float,
    strategy: SelectionStrategy,
    p: ScoreParams,
) -> SelectionOutcome:
    """Select the top fraction of alive nodes; m = max(floor(W*K), 1)."""
    if not 0 < w_fraction <= 1:
        raise ValueError("w_fraction must be in (0, 1]")
    alive = [n for n in nodes if n.alive]
    if not alive:
        raise EmptyEcosystemError("no alive nodes to select from")
    m = max(int(w_fraction * len(alive)), 1)
    ranked = _ranked_ids(alive, strategy, p)
    return SelectionOutcome(
        eta=tuple(ranked[:m]),
        scores=_score_map(alive, p),
        m=m,
        w_fraction=w_fraction,
    )


def select_replacements(
    nodes: list[WorkerNode],
    exclude: set[int],
    count: int,
    strategy: SelectionStrategy,
    p: ScoreParams,
) -> list[int]:
    """Highest-ranked alive nodes outside `exclude`, at most `count` of them.

    When fewer remain than requested, all of them are returned.
    """
    pool = [n for n in nodes if n.alive and n.id not in exclude]
    if not pool or count <= 0:
        return []
    ranked = _ranked_ids(pool, strategy, p)
    return ranked[:count]


def outcome_to_csv(outcomes: list[tuple[int, SelectionOutcome]], path: str) -> None:
    """Audit dump: (round, node_id, score, rank, selected) rows."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["round", "node_id", "score", "rank", "selected"])
        for round_idx, outcome in outcomes:
            for rank, node_id in enumerate(outcome.eta, start=1):
                score = outcome.scores.get(node_id)
                writer.writerow(
                    [round_idx, node_id, "" if score is None else repr(score), rank, 1]
                )
