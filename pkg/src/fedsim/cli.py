"""Command-line front end for the simulator.

Subcommands map to the experiment families: a single scenario, the worker
fraction sweep, the selection-strategy comparison, the failure-fraction sweep,
the equal-contributor failure comparison, and the fault-mitigation comparison.
Every run writes per-seed round logs, per-point summaries, a resolved config
echo, and rendered figures under the output directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

from . import figures
from .aggregator import ExperimentResult, preview_failures, run_experiment
from .config import (
    DEFAULTS,
    apply_overrides,
    build_scenario,
    deep_update,
    echo_json,
    resolve_config,
)
from .errors import ConfigError, FedsimError, RoundFailedError
from .metrics import SweepResult, emit_csv, series_to_csv, summarize

ROUNDS_HEADER = [
    "round",
    "algorithm",
    "selected",
    "failed",
    "replacements",
    "responders",
    "weighted_loss",
    "duration_s",
    "cumulative_C_s",
]

FAMILY_PRESETS: dict[str, dict] = {
    "experiment": {},
    "sweep-fraction": {},
    "compare-strategies": {},
    "sweep-failures": {
        "algorithm": "fedavg-ignore",
        "ecosystem": {"partition": {"kind": "uniform-iid"}},
    },
    "fail-vs-nofail": {
        "algorithm": "fedavg-ignore",
        "selection": {"strategy": "top-power"},
        "ecosystem": {"partition": {"kind": "uniform-iid"}},
        "failures": {"round": 1},
    },
    "mitigation": {},
}


def _ids(values) -> str:
    return ";".join(str(v) for v in values)


def write_rounds_csv(result: ExperimentResult, path: Path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(ROUNDS_HEADER)
        for log in result.rounds:
            writer.writerow(
                [
                    log.round,
                    log.algorithm,
                    _ids(log.selected),
                    _ids(log.failed),
                    _ids(log.replacements),
                    _ids(log.responders),
                    repr(log.weighted_loss),
                    repr(log.duration_s),
                    repr(log.cumulative_s),
                ]
            )


def accuracy_series(result: ExperimentResult) -> list[tuple[float, float]]:
    return [(log.cumulative_s, log.test_accuracy) for log in result.rounds]


def run_point(cfg: dict, point_dir: Path, label: str, algorithm: str | None = None) -> list[ExperimentResult]:
    """Run one axis point over all seeds and write its outputs."""
    point_dir.mkdir(parents=True, exist_ok=True)
    echoed = dict(cfg)
    if algorithm is not None:
        echoed = deep_update(cfg, {"algorithm": algorithm})
    (point_dir / "config.echo.json").write_text(echo_json(echoed))
    results = []
    for seed in cfg["seeds"]:
        result = run_experiment(build_scenario(cfg, seed, algorithm))
        seed_dir = point_dir / f"seed-{seed}"
        seed_dir.mkdir(exist_ok=True)
        write_rounds_csv(result, seed_dir / "rounds.csv")
        series_to_csv(
            accuracy_series(result),
            str(seed_dir / "accuracy_vs_time.csv"),
            ("cumulative_s", "test_accuracy"),
        )
        results.append(result)
    emit_csv(summarize({label: results}, axis="point"), str(point_dir / "summary.csv"))
    return results


def _echo_top(cfg: dict, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.echo.json").write_text(echo_json(cfg))


def family_experiment(cfg: dict, out: Path) -> str:
    _echo_top(cfg, out)
    results = run_point(cfg, out, label=cfg["algorithm"])
    sweep = summarize({cfg["algorithm"]: results}, axis="algorithm")
    point = sweep.points[0]
    return (
        f"experiment[{cfg['algorithm']}]: {len(results)} seed(s), "
        f"mean C {point.mean_c:.3f}s, mean A {point.mean_a:.4f} -> {out}"
    )


def family_sweep_fraction(cfg: dict, out: Path) -> str:
    _echo_top(cfg, out)
    groups: dict[str, list[ExperimentResult]] = {}
    for w in cfg["sweep"]["w_fractions"]:
        point_cfg = deep_update(cfg, {"selection": {"w_fraction": w}})
        groups[str(w)] = run_point(point_cfg, out / f"w={w}", label=str(w))
    sweep = summarize(groups, axis="worker_fraction")
    emit_csv(sweep, str(out / "summary.csv"))
    figures.fraction_sweep_figure(sweep, str(out / "fraction_sweep.png"))
    return f"sweep-fraction: {len(groups)} points x {len(cfg['seeds'])} seed(s) -> {out}"


def family_compare_strategies(cfg: dict, out: Path) -> str:
    _echo_top(cfg, out)
    groups: dict[str, list[ExperimentResult]] = {}
    for strategy in ("s-based", "random", "top-volume", "top-power", "top-bandwidth"):
        point_cfg = deep_update(cfg, {"selection": {"strategy": strategy}})
        groups[strategy] = run_point(point_cfg, out / f"strategy={strategy}", label=strategy)
    sweep = summarize(groups, axis="strategy")
    emit_csv(sweep, str(out / "summary.csv"))
    figures.strategy_figure(sweep, str(out / "strategy_compare.png"))
    return f"compare-strategies: 5 strategies x {len(cfg['seeds'])} seed(s) -> {out}"


def family_sweep_failures(cfg: dict, out: Path) -> str:
    _echo_top(cfg, out)
    groups: dict[str, list[ExperimentResult]] = {}
    for f in cfg["sweep"]["failure_fractions"]:
        point_cfg = deep_update(cfg, {"failures": {"fraction": f}})
        groups[str(f)] = run_point(point_cfg, out / f"f={f}", label=str(f))
    sweep = summarize(groups, axis="failure_fraction")
    emit_csv(sweep, str(out / "summary.csv"))
    figures.failure_sweep_figure(sweep, str(out / "failure_sweep.png"))
    return f"sweep-failures: {len(groups)} points x {len(cfg['seeds'])} seed(s) -> {out}"


def smallest_k_for_contributors(n: int, w: float) -> int:
    """Smallest ecosystem size whose selected set has exactly n members."""
    k = max(n, math.ceil(n / w))
    while int(w * k) != n:
        k += 1
        if k > 100 * n:
            raise ConfigError(f"no ecosystem size gives {n} contributors at W={w}")
    return k


def fail_scenario_config(cfg: dict, n: int) -> dict:
    """Failure-case config: a larger selected set whittled down to n members.

    The samples of one crucial class are placed exclusively on the nodes that
    the failure plan will disconnect, so losing them removes that class from
    training entirely.
    """
    k2 = cfg["sweep"]["k_fail_scenario"]
    w = cfg["selection"]["w_fraction"]
    m2 = max(int(w * k2), 1)
    nu = m2 - n
    if nu < 0:
        raise ConfigError(
            f"sweep.contributing_counts: {n} exceeds the selected set size {m2} of the failure scenario"
        )
    # +0.5 keeps floor(fraction * m2) == nu despite float rounding
    fraction = (nu + 0.5) / m2 if nu else 0.0
    base = deep_update(
        cfg,
        {"ecosystem": {"k": k2}, "failures": {"fraction": fraction}},
    )
    if nu == 0:
        return base
    crucial = cfg["sweep"]["crucial_class"]
    per_seed_maps = []
    for seed in cfg["seeds"]:
        schedule = preview_failures(build_scenario(base, seed))
        victims = sorted(schedule.failing_at(base["failures"]["round"]))
        per_seed_maps.append(victims)
    # The exclusive map is per-seed; run_point below consumes one config per
    # seed, so stash the victim lists for the caller.
    base["_victims_per_seed"] = per_seed_maps  # stripped before validation
    base["_crucial_class"] = crucial
    return base


def run_fail_point(base: dict, point_dir: Path, label: str) -> list[ExperimentResult]:
    """Like run_point, but with a per-seed exclusive-class map."""
    victims_per_seed = base.pop("_victims_per_seed", None)
    crucial = base.pop("_crucial_class", None)
    if victims_per_seed is None:
        return run_point(base, point_dir, label)
    point_dir.mkdir(parents=True, exist_ok=True)
    (point_dir / "config.echo.json").write_text(echo_json(base))
    results = []
    for seed, victims in zip(base["seeds"], victims_per_seed):
        seed_cfg = deep_update(
            base,
            {"ecosystem": {"partition": {"kind": "exclusive-class", "exclusive_map": {str(crucial): victims}}}},
        )
        seed_cfg["seeds"] = [seed]
        seed_dir = point_dir / f"seed-{seed}"
        seed_dir.mkdir(exist_ok=True)
        (seed_dir / "config.echo.json").write_text(echo_json(seed_cfg))
        result = run_experiment(build_scenario(seed_cfg, seed))
        write_rounds_csv(result, seed_dir / "rounds.csv")
        series_to_csv(
            accuracy_series(result),
            str(seed_dir / "accuracy_vs_time.csv"),
            ("cumulative_s", "test_accuracy"),
        )
        results.append(result)
    emit_csv(summarize({label: results}, axis="point"), str(point_dir / "summary.csv"))
    return results


def family_fail_vs_nofail(cfg: dict, out: Path) -> str:
    _echo_top(cfg, out)
    w = cfg["selection"]["w_fraction"]
    nofail_groups: dict[str, list[ExperimentResult]] = {}
    fail_groups: dict[str, list[ExperimentResult]] = {}
    for n in cfg["sweep"]["contributing_counts"]:
        k1 = smallest_k_for_contributors(n, w)
        nofail_cfg = deep_update(cfg, {"ecosystem": {"k": k1}, "failures": {"fraction": 0.0}})
        nofail_groups[str(n)] = run_point(nofail_cfg, out / f"n={n}" / "nofail", label=str(n))
        fail_groups[str(n)] = run_fail_point(
            fail_scenario_config(cfg, n), out / f"n={n}" / "fail", label=str(n)
        )
    nofail = summarize(nofail_groups, axis="contributing_nodes")
    fail = summarize(fail_groups, axis="contributing_nodes")
    emit_csv(nofail, str(out / "summary_nofail.csv"))
    emit_csv(fail, str(out / "summary_fail.csv"))
    figures.fail_vs_nofail_figure(nofail, fail, str(out / "fail_vs_nofail.png"))
    return (
        f"fail-vs-nofail: {len(nofail_groups)} contributor counts x "
        f"{len(cfg['seeds'])} seed(s) -> {out}"
    )


def family_mitigation(cfg: dict, out: Path) -> str:
    _echo_top(cfg, out)
    sweeps: dict[str, SweepResult] = {}
    groups_by_alg: dict[str, dict[str, list[ExperimentResult]]] = {
        "fedfm": {},
        "fedavg-ignore": {},
    }
    for f in cfg["sweep"]["mitigation_fractions"]:
        point_cfg = deep_update(cfg, {"failures": {"fraction": f}})
        curves: dict[str, list[tuple[float, float]]] = {}
        for algorithm in ("fedfm", "fedavg-ignore"):
            results = run_point(point_cfg, out / f"f={f}" / algorithm, label=str(f), algorithm=algorithm)
            groups_by_alg[algorithm][str(f)] = results
            curves[algorithm] = accuracy_series(results[0])
        figures.mitigation_curves_figure(curves, f, str(out / f"mitigation_f{f}.png"))
    for algorithm, groups in groups_by_alg.items():
        sweeps[algorithm] = summarize(groups, axis="failure_fraction")
        emit_csv(sweeps[algorithm], str(out / f"summary_{algorithm}.csv"))
    figures.mitigation_summary_figure(sweeps, str(out / "mitigation_summary.png"))
    return (
        f"mitigation: {len(cfg['sweep']['mitigation_fractions'])} failure levels x 2 algorithms x "
        f"{len(cfg['seeds'])} seed(s) -> {out}"
    )


FAMILIES = {
    "experiment": family_experiment,
    "sweep-fraction": family_sweep_fraction,
    "compare-strategies": family_compare_strategies,
    "sweep-failures": family_sweep_failures,
    "fail-vs-nofail": family_fail_vs_nofail,
    "mitigation": family_mitigation,
}


def prepare_config(subcommand: str, args: argparse.Namespace) -> dict:
    raw: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                raw = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {args.config}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: not valid JSON ({exc})")
        if not isinstance(raw, dict):
            raise ConfigError(f"{args.config}: top level must be a JSON object")
    merged = deep_update(deep_update(DEFAULTS, FAMILY_PRESETS[subcommand]), raw)
    if args.override:
        merged = apply_overrides(merged, args.override)
    cfg = resolve_config(merged)
    if args.seeds is not None:
        if args.seeds <= 0:
            raise ConfigError("--seeds must be a positive integer")
        seeds = list(cfg["seeds"])[: args.seeds]
        next_seed = (max(cfg["seeds"]) + 1) if cfg["seeds"] else 1
        while len(seeds) < args.seeds:
            seeds.append(next_seed)
            next_seed += 1
        cfg["seeds"] = seeds
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedsim",
        description="Deterministic federated-learning simulator with worker selection and fault mitigation.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, handler in FAMILIES.items():
        p = sub.add_parser(name, help=handler.__doc__)
        p.add_argument("--config", help="scenario config JSON path")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seeds", type=int, default=None, help="number of master seeds to run")
        p.add_argument(
            "--override",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="dotted-path config override, repeatable",
        )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = prepare_config(args.subcommand, args)
        summary = FAMILIES[args.subcommand](cfg, Path(args.out))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except RoundFailedError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 3
    except FedsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
