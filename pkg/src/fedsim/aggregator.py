"""Global training loop: weighted averaging, timeout-based fault mitigation,
and convergence detection.

Two round variants share one engine.  The fault-mitigating variant detects
workers that miss the timeout, backfills them with the next-best non-selected
nodes, and aggregates everything received; the failure-ignoring baseline
simply drops the missing workers.  With an empty failure schedule the two are
bit-for-bit identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import Dataset
from .errors import EmptyShardError, NoUpdatesError, RoundFailedError, ShapeMismatchError
from .faults import FailureSchedule, apply_failures, plan_failures
from .learner import (
    ModelSpec,
    ModelWeights,
    TrainConfig,
    client_update,
    evaluate,
    init_weights,
    model_constants,
)
from .seeding import derive_seed
from .selection import ScoreParams, SelectionOutcome, SelectionStrategy, select_replacements, select_top
from .simclock import TimingModel, default_timeout, node_round_time, round_duration
from .topology import EcosystemSpec, WorkerNode, build_ecosystem

ALGORITHMS = ("fedfm", "fedavg-ignore")

# Default operations per sample per epoch, charged per byte of model memory:
# 6 ops for every 8-byte parameter/activation unit (forward + backward).
DEFAULT_OPS_PER_MEMORY_BYTE = 0.75


@dataclass(frozen=True)
class ConvergenceCriteria:
    loss_threshold: float = 0.15
    stability_window: int = 5
    stability_epsilon: float = 1e-3
    max_rounds: int = 40

    def __post_init__(self) -> None:
        if self.stability_window < 2:
            raise ValueError("stability_window must be >= 2")
        if self.stability_epsilon <= 0 or self.loss_threshold <= 0:
            raise ValueError("epsilon and loss_threshold must be positive")
        if self.max_rounds <= 0:
            raise ValueError("max_rounds must be positive")


@dataclass(frozen=True)
class AggregatorConfig:
    """Per-round knobs shared by both algorithm variants."""

    train: TrainConfig
    w_fraction: float
    score: ScoreParams
    activation: str = "relu"
    master_seed: int = 0


@dataclass
class RoundState:
    """One round's record: starting weights, selections, failures, responses."""

    t: int
    omega: ModelWeights
    outcome: SelectionOutcome | None = None
    failed: tuple[int, ...] = ()
    replacements: tuple[int, ...] = ()
    responders: dict[int, tuple[int, ModelWeights]] = field(default_factory=dict)
    omega_next: ModelWeights | None = None
    weighted_loss: float = float("nan")
    duration_s: float = 0.0


@dataclass(frozen=True)
class RoundLog:
    round: int
    algorithm: str
    selected: tuple[int, ...]
    failed: tuple[int, ...]
    replacements: tuple[int, ...]
    responders: tuple[int, ...]
    weighted_loss: float
    duration_s: float
    cumulative_s: float
    test_accuracy: float


@dataclass(frozen=True)
class ExperimentResult:
    rounds: tuple[RoundLog, ...]
    convergence_time_s: float
    accuracy: float
    converged_at: int | None
    reason: str  # threshold-stable | plateau-high-loss | max-rounds


@dataclass(frozen=True)
class FailurePlan:
    fraction: float = 0.0
    round: int = 2
    mode: str = "permanent"


@dataclass(frozen=True)
class Scenario:
    """Fully resolved ingredients for one experiment run."""

    train: Dataset
    test: Dataset
    ecosystem: EcosystemSpec
    model: ModelSpec
    train_cfg: TrainConfig
    w_fraction: float
    strategy: SelectionStrategy
    criteria: ConvergenceCriteria
    failures: FailurePlan
    algorithm: str
    master_seed: int
    score: ScoreParams | None = None  # default: model constants
    compute_cost_per_sample_epoch: float | None = None  # default: from memory bytes
    timeout_s: float | None = None  # default: p95 of healthy round times


def fedavg_aggregate(updates: list[tuple[int, ModelWeights]]) -> ModelWeights:
    """Data-size-weighted mean of local weights: sum (n_k / n) * w_k."""
    if not updates:
        raise NoUpdatesError("no updates to aggregate")
    shapes = updates[0][1].shapes
    for _, w in updates:
        if w.shapes != shapes:
            raise ShapeMismatchError("updates have differing layer shapes")
    total = sum(n_k for n_k, _ in updates)
    if total <= 0:
        raise NoUpdatesError("total sample count is zero")
    acc = np.zeros_like(updates[0][1].values)
    for n_k, w in updates:
        acc += (n_k / total) * w.values
    return ModelWeights(acc, shapes)


def strategy_for_round(strategy: SelectionStrategy, round_idx: int) -> SelectionStrategy:
    """Random selection re-draws every round from a per-round child seed."""
    if strategy.kind != "random":
        return strategy
    return replace(strategy, seed=derive_seed(strategy.seed, "round", round_idx))


def _run_round(
    state: RoundState,
    nodes: list[WorkerNode],
    cfg: AggregatorConfig,
    timing: TimingModel,
    strategy: SelectionStrategy,
    schedule: FailureSchedule,
    mitigate: bool,
) -> RoundState:
    t = state.t
    outcome = select_top(nodes, cfg.w_fraction, strategy_for_round(strategy, t), cfg.score)
    apply_failures(nodes, schedule, t)

    failing_now = schedule.failing_at(t)
    failed = tuple(k for k in outcome.eta if k in failing_now)
    survivors = [k for k in outcome.eta if k not in failing_now]

    by_id = {n.id: n for n in nodes}
    responders: dict[int, tuple[int, ModelWeights]] = {}
    losses: dict[int, float] = {}
    times_primary: list[float] = []
    times_replacement: list[float] = []

    def dispatch(node_id: int, times: list[float]) -> None:
        node = by_id[node_id]
        seed = derive_seed(cfg.master_seed, "client", t, node_id)
        try:
            w_k = client_update(
                state.omega, node.shard, replace(cfg.train, seed=seed), cfg.activation
            )
        except EmptyShardError:
            # An empty shard answers immediately with nothing to average.
            return
        responders[node_id] = (node.volume, w_k)
        losses[node_id] = evaluate(w_k, node.shard.as_dataset(), cfg.activation)[0]
        times.append(node_round_time(node, timing, cfg.train))

    for node_id in survivors:
        dispatch(node_id, times_primary)

    replacements: tuple[int, ...] = ()
    if mitigate and failed and outcome.m > 1:
        replacement_ids = select_replacements(
            nodes,
            exclude=set(outcome.eta),
            count=len(failed),
            strategy=strategy_for_round(strategy, t),
            p=cfg.score,
        )
        for node_id in replacement_ids:
            dispatch(node_id, times_replacement)
        replacements = tuple(replacement_ids)

    if not responders:
        raise RoundFailedError(f"round {t}: zero responders after replacement phase")

    ordered = sorted(responders)
    updates = [responders[k] for k in ordered]
    omega_next = fedavg_aggregate(updates)
    total = sum(n for n, _ in updates)
    weighted_loss = sum(responders[k][0] * losses[k] for k in ordered) / total

    state.outcome = outcome
    state.failed = failed
    state.replacements = replacements
    state.responders = responders
    state.omega_next = omega_next
    state.weighted_loss = weighted_loss
    state.duration_s = round_duration(
        times_primary, bool(failed), timing.timeout_s, times_replacement
    )
    return state


def run_round_fedfm(
    state: RoundState,
    nodes: list[WorkerNode],
    cfg: AggregatorConfig,
    timing: TimingModel,
    strategy: SelectionStrategy,
    schedule: FailureSchedule,
) -> RoundState:
    """One fault-mitigating round: timeout detection plus backfill dispatch."""
    return _run_round(state, nodes, cfg, timing, strategy, schedule, mitigate=True)


def run_round_fedavg_ignore(
    state: RoundState,
    nodes: list[WorkerNode],
    cfg: AggregatorConfig,
    timing: TimingModel,
    strategy: SelectionStrategy,
    schedule: FailureSchedule,
) -> RoundState:
    """One baseline round: failed workers are dropped, no replacements."""
    return _run_round(state, nodes, cfg, timing, strategy, schedule, mitigate=False)


def detect_convergence(
    loss_series: list[float], crit: ConvergenceCriteria
) -> tuple[int, str] | None:
    """First round whose trailing window is flat, with the plateau verdict.

    Returns (1-indexed round, reason) where reason is threshold-stable when
    the plateau sits at or below the loss threshold, else plateau-high-loss.
    """
    w = crit.stability_window
    for r in range(w, len(loss_series) + 1):
        window = loss_series[r - w : r]
        if max(window) - min(window) <= crit.stability_epsilon:
            plateau = sum(window) / w
            reason = "threshold-stable" if plateau <= crit.loss_threshold else "plateau-high-loss"
            return r, reason
    return None


def resolve_timing(scenario: Scenario, nodes: list[WorkerNode]) -> TimingModel:
    """Fill in derived timing defaults: cost from model memory, T from p95."""
    alpha, kappa = model_constants(scenario.model)
    cost = scenario.compute_cost_per_sample_epoch
    if cost is None:
        cost = DEFAULT_OPS_PER_MEMORY_BYTE * kappa
    timeout = scenario.timeout_s
    if timeout is None:
        timeout = default_timeout(nodes, cost, alpha, scenario.train_cfg)
    return TimingModel(cost, alpha, timeout)


def resolve_score(scenario: Scenario) -> ScoreParams:
    if scenario.score is not None:
        return scenario.score
    alpha, kappa = model_constants(scenario.model)
    return ScoreParams(alpha=alpha, kappa=kappa)


def plan_scenario_failures(
    nodes: list[WorkerNode], scenario: Scenario, t: int
) -> FailureSchedule:
    """Plan the scenario's failures against the set selected at round t."""
    score = resolve_score(scenario)
    outcome = select_top(nodes, scenario.w_fraction, strategy_for_round(scenario.strategy, t), score)
    return plan_failures(
        outcome.eta,
        scenario.failures.fraction,
        t,
        derive_seed(scenario.master_seed, "failures"),
        scenario.failures.mode,
    )


def preview_failures(scenario: Scenario) -> FailureSchedule:
    """The schedule run_experiment will apply, computed on a fresh ecosystem.

    Valid when no failures occur before the scenario's failure round, which
    holds for single-event plans.
    """
    nodes = build_ecosystem(scenario.train, scenario.ecosystem)
    return plan_scenario_failures(nodes, scenario, scenario.failures.round)


def run_experiment(scenario: Scenario) -> ExperimentResult:
    """Run rounds until the loss series stabilizes or max_rounds is hit."""
    if scenario.algorithm not in ALGORITHMS:
        raise ValueError(f"algorithm must be one of {ALGORITHMS}")
    master = scenario.master_seed
    nodes = build_ecosystem(scenario.train, scenario.ecosystem)
    timing = resolve_timing(scenario, nodes)
    cfg = AggregatorConfig(
        train=scenario.train_cfg,
        w_fraction=scenario.w_fraction,
        score=resolve_score(scenario),
        activation=scenario.model.activation,
        master_seed=master,
    )
    omega = init_weights(scenario.model, derive_seed(master, "init"))
    run_round = run_round_fedfm if scenario.algorithm == "fedfm" else run_round_fedavg_ignore

    schedule = FailureSchedule()
    logs: list[RoundLog] = []
    losses: list[float] = []
    cumulative = 0.0
    converged: tuple[int, str] | None = None

    for t in range(1, scenario.criteria.max_rounds + 1):
        if scenario.failures.fraction > 0 and t == scenario.failures.round:
            schedule = plan_scenario_failures(nodes, scenario, t)
        state = run_round(RoundState(t=t, omega=omega), nodes, cfg, timing, scenario.strategy, schedule)
        omega = state.omega_next
        cumulative += state.duration_s
        _, accuracy = evaluate(omega, scenario.test, cfg.activation)
        losses.append(state.weighted_loss)
        logs.append(
            RoundLog(
                round=t,
                algorithm=scenario.algorithm,
                selected=state.outcome.eta,
                failed=state.failed,
                replacements=state.replacements,
                responders=tuple(sorted(state.responders)),
                weighted_loss=state.weighted_loss,
                duration_s=state.duration_s,
                cumulative_s=cumulative,
                test_accuracy=accuracy,
            )
        )
        converged = detect_convergence(losses, scenario.criteria)
        if converged is not None:
            break

    return ExperimentResult(
        rounds=tuple(logs),
        convergence_time_s=cumulative,
        accuracy=logs[-1].test_accuracy,
        converged_at=converged[0] if converged else None,
        reason=converged[1] if converged else "max-rounds",
    )
