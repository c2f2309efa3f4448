"""Scenario configuration: strict JSON schema, defaults, echo, overrides.

A scenario config is a nested JSON object.  Unknown keys are rejected with
the offending dotted path; every run echoes its fully resolved config next to
its outputs so any result can be reproduced byte-for-byte from the echo.
"""

from __future__ import annotations

import copy
import json
from typing import Any

from .aggregator import ALGORITHMS, ConvergenceCriteria, FailurePlan, Scenario
from .dataset import PARTITION_KINDS, Dataset, PartitionSpec, load_idx, synth_blobs
from .errors import ConfigError
from .faults import FAILURE_MODES
from .learner import ACTIVATIONS, ModelSpec, TrainConfig
from .seeding import derive_seed
from .selection import STRATEGY_KINDS, ScoreParams, SelectionStrategy
from .topology import EcosystemSpec, NormalDist

DEFAULT_SEEDS = list(range(101, 111))

DEFAULTS: dict[str, Any] = {
    "dataset": {
        "kind": "synth",
        "n_classes": 5,
        "n_per_class": 300,
        "dim": 2,
        "spread": 0.1,
        "test_n_per_class": 200,
        "train_images": None,
        "train_labels": None,
        "test_images": None,
        "test_labels": None,
    },
    "ecosystem": {
        "k": 50,
        "power": {"mean": 8.0e6, "std": 1.2e6, "floor": 1.0e6},
        "bandwidth": {"mean": 2.0e4, "std": 3.0e3, "floor": 5.0e3},
        "partition": {
            "kind": "normal-volume-iid",
            "mu_frac": None,
            "sigma_frac": None,
            "exclusive_map": {},
        },
    },
    "model": {"hidden": [16], "activation": "relu"},
    "train": {"learning_rate": 0.3, "epochs": 1, "batch_size": 32},
    "selection": {"w_fraction": 0.7, "strategy": "s-based", "strategy_seed": 0},
    "score": {"alpha": None, "kappa": None},
    "convergence": {
        "loss_threshold": 0.15,
        "window": 5,
        "epsilon": 1e-3,
        "max_rounds": 40,
    },
    "timing": {"compute_cost_per_sample_epoch": None, "timeout_s": None},
    "failures": {"fraction": 0.0, "round": 2, "mode": "permanent"},
    "algorithm": "fedfm",
    "seeds": DEFAULT_SEEDS,
    "sweep": {
        "w_fractions": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
        "failure_fractions": [0.0, 0.2, 0.4, 0.6],
        "mitigation_fractions": [0.2, 0.4, 0.6],
        "contributing_counts": [10, 30, 50],
        "k_fail_scenario": 100,
        "crucial_class": 0,
    },
}

_NUMBER = (int, float)

# dotted path -> (accepted types, human-readable constraint, predicate)
_CHECKS: dict[str, tuple[tuple[type, ...], str, Any]] = {
    "dataset.kind": ((str,), "one of ('synth', 'idx')", lambda v: v in ("synth", "idx")),
    "dataset.n_classes": ((int,), "a positive integer", lambda v: v > 0),
    "dataset.n_per_class": ((int,), "a positive integer", lambda v: v > 0),
    "dataset.dim": ((int,), "a positive integer", lambda v: v > 0),
    "dataset.spread": (_NUMBER, "a positive number", lambda v: v > 0),
    "dataset.test_n_per_class": ((int,), "a positive integer", lambda v: v > 0),
    "dataset.train_images": ((str,), "a path", None),
    "dataset.train_labels": ((str,), "a path", None),
    "dataset.test_images": ((str,), "a path", None),
    "dataset.test_labels": ((str,), "a path", None),
    "ecosystem.k": ((int,), "a positive integer", lambda v: v > 0),
    "ecosystem.power.mean": (_NUMBER, "a positive number", lambda v: v > 0),
    "ecosystem.power.std": (_NUMBER, "a non-negative number", lambda v: v >= 0),
    "ecosystem.power.floor": (_NUMBER, "a positive number", lambda v: v > 0),
    "ecosystem.bandwidth.mean": (_NUMBER, "a positive number", lambda v: v > 0),
    "ecosystem.bandwidth.std": (_NUMBER, "a non-negative number", lambda v: v >= 0),
    "ecosystem.bandwidth.floor": (_NUMBER, "a positive number", lambda v: v > 0),
    "ecosystem.partition.kind": (
        (str,),
        f"one of {PARTITION_KINDS}",
        lambda v: v in PARTITION_KINDS,
    ),
    "ecosystem.partition.mu_frac": (_NUMBER, "a positive number", lambda v: v > 0),
    "ecosystem.partition.sigma_frac": (_NUMBER, "a non-negative number", lambda v: v >= 0),
    "ecosystem.partition.exclusive_map": ((dict,), "a class -> node-id-list map", None),
    "model.hidden": ((list,), "a list of positive integers", None),
    "model.activation": ((str,), f"one of {ACTIVATIONS}", lambda v: v in ACTIVATIONS),
    "train.learning_rate": (_NUMBER, "a non-negative number", lambda v: v >= 0),
    "train.epochs": ((int,), "a positive integer", lambda v: v > 0),
    "train.batch_size": ((int,), "a positive integer", lambda v: v > 0),
    "selection.w_fraction": (_NUMBER, "in (0, 1]", lambda v: 0 < v <= 1),
    "selection.strategy": ((str,), f"one of {STRATEGY_KINDS}", lambda v: v in STRATEGY_KINDS),
    "selection.strategy_seed": ((int,), "a non-negative integer", lambda v: v >= 0),
    "score.alpha": (_NUMBER, "a positive number", lambda v: v > 0),
    "score.kappa": (_NUMBER, "a positive number", lambda v: v > 0),
    "convergence.loss_threshold": (_NUMBER, "a positive number", lambda v: v > 0),
    "convergence.window": ((int,), "an integer >= 2", lambda v: v >= 2),
    "convergence.epsilon": (_NUMBER, "a positive number", lambda v: v > 0),
    "convergence.max_rounds": ((int,), "a positive integer", lambda v: v > 0),
    "timing.compute_cost_per_sample_epoch": (_NUMBER, "a positive number", lambda v: v > 0),
    "timing.timeout_s": (_NUMBER, "a positive number", lambda v: v > 0),
    "failures.fraction": (_NUMBER, "in [0, 1]", lambda v: 0 <= v <= 1),
    "failures.round": ((int,), "a positive integer", lambda v: v > 0),
    "failures.mode": ((str,), f"one of {FAILURE_MODES}", lambda v: v in FAILURE_MODES),
    "algorithm": ((str,), f"one of {ALGORITHMS}", lambda v: v in ALGORITHMS),
    "seeds": ((list,), "a non-empty list of non-negative integers", None),
    "sweep.w_fractions": ((list,), "a non-empty list of fractions in (0, 1]", None),
    "sweep.failure_fractions": ((list,), "a non-empty list of fractions in [0, 1]", None),
    "sweep.mitigation_fractions": ((list,), "a non-empty list of fractions in (0, 1]", None),
    "sweep.contributing_counts": ((list,), "a non-empty list of positive integers", None),
    "sweep.k_fail_scenario": ((int,), "a positive integer", lambda v: v > 0),
    "sweep.crucial_class": ((int,), "a non-negative integer", lambda v: v >= 0),
}

_NULLABLE = {
    "dataset.train_images",
    "dataset.train_labels",
    "dataset.test_images",
    "dataset.test_labels",
    "ecosystem.partition.mu_frac",
    "ecosystem.partition.sigma_frac",
    "score.alpha",
    "score.kappa",
    "timing.compute_cost_per_sample_epoch",
    "timing.timeout_s",
}


def _check_leaf(path: str, value: Any) -> None:
    if value is None:
        if path in _NULLABLE:
            return
        raise ConfigError(f"{path}: must not be null")
    types, constraint, predicate = _CHECKS[path]
    if isinstance(value, bool) or not isinstance(value, types):
        raise ConfigError(f"{path}: expected {constraint}, got {value!r}")
    if predicate is not None and not predicate(value):
        raise ConfigError(f"{path}: must be {constraint}, got {value!r}")


def _merge(defaults: Any, given: Any, path: str) -> Any:
    if isinstance(defaults, dict) and path != "ecosystem.partition.exclusive_map":
        if not isinstance(given, dict):
            raise ConfigError(f"{path or 'config'}: expected an object, got {given!r}")
        unknown = sorted(set(given) - set(defaults))
        if unknown:
            raise ConfigError(f"{path or 'config'}: unknown key(s) {unknown}")
        merged = {}
        for key, default_value in defaults.items():
            child = f"{path}.{key}" if path else key
            if key in given:
                merged[key] = _merge(default_value, given[key], child)
            else:
                merged[key] = copy.deepcopy(default_value)
        return merged
    _check_leaf(path, given)
    return copy.deepcopy(given)


def _validate_extras(cfg: dict) -> None:
    hidden = cfg["model"]["hidden"]
    if not all(isinstance(h, int) and not isinstance(h, bool) and h > 0 for h in hidden):
        raise ConfigError(f"model.hidden: every entry must be a positive integer, got {hidden!r}")
    seeds = cfg["seeds"]
    if not seeds or not all(isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in seeds):
        raise ConfigError(f"seeds: expected a non-empty list of non-negative integers, got {seeds!r}")
    for cls, owners in cfg["ecosystem"]["partition"]["exclusive_map"].items():
        try:
            int(cls)
        except (TypeError, ValueError):
            raise ConfigError(f"ecosystem.partition.exclusive_map: class key {cls!r} is not an integer")
        if not isinstance(owners, list) or not all(
            isinstance(o, int) and not isinstance(o, bool) and o >= 0 for o in owners
        ):
            raise ConfigError(
                f"ecosystem.partition.exclusive_map[{cls}]: expected a list of node ids, got {owners!r}"
            )
    if cfg["dataset"]["kind"] == "idx":
        for key in ("train_images", "train_labels", "test_images", "test_labels"):
            if cfg["dataset"][key] is None:
                raise ConfigError(f"dataset.{key}: required when dataset.kind is 'idx'")
    score = cfg["score"]
    if (score["alpha"] is None) != (score["kappa"] is None):
        raise ConfigError("score: alpha and kappa must be overridden together or both left null")
    sweep = cfg["sweep"]
    for key, lo_open in (("w_fractions", True), ("failure_fractions", False), ("mitigation_fractions", True)):
        values = sweep[key]
        ok = bool(values) and all(
            isinstance(v, _NUMBER) and not isinstance(v, bool) and (v > 0 if lo_open else v >= 0) and v <= 1
            for v in values
        )
        if not ok:
            raise ConfigError(f"sweep.{key}: expected a non-empty list of fractions, got {values!r}")
    counts = sweep["contributing_counts"]
    if not counts or not all(isinstance(c, int) and not isinstance(c, bool) and c > 0 for c in counts):
        raise ConfigError(f"sweep.contributing_counts: expected positive integers, got {counts!r}")


def resolve_config(given: dict) -> dict:
    """Validate a raw config dict and fill every default.

    Partition volume fractions left null resolve to mean 1/K with a spread of
    half the mean, so shard volumes stay positive while remaining
    heterogeneous.
    """
    cfg = _merge(DEFAULTS, given, "")
    _validate_extras(cfg)
    part = cfg["ecosystem"]["partition"]
    k = cfg["ecosystem"]["k"]
    if part["mu_frac"] is None:
        part["mu_frac"] = 1.0 / k
    if part["sigma_frac"] is None:
        part["sigma_frac"] = 0.5 / k
    return cfg


def load_config(path: str) -> dict:
    try:
        with open(path) as f:
            raw = json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return resolve_config(raw)


def deep_update(base: dict, patch: dict) -> dict:
    """Recursive dict merge; patch wins, nested dicts merge key by key."""
    out = copy.deepcopy(base)
    for key, value in patch.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_update(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def apply_overrides(cfg: dict, overrides: list[str]) -> dict:
    """Apply `dotted.path=json-value` overrides onto a raw config dict."""
    out = copy.deepcopy(cfg)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected key=value")
        key, _, raw_value = item.partition("=")
        try:
            value = json.loads(raw_value)
        except json.JSONDecodeError:
            value = raw_value
        target = out
        parts = key.split(".")
        for part in parts[:-1]:
            if not isinstance(target.get(part), dict):
                target[part] = {}
            target = target[part]
        target[parts[-1]] = value
    return out


def echo_json(cfg: dict) -> str:
    return json.dumps(cfg, indent=2, sort_keys=True) + "\n"


def _build_datasets(cfg: dict, master_seed: int) -> tuple[Dataset, Dataset]:
    ds = cfg["dataset"]
    if ds["kind"] == "idx":
        train = load_idx(ds["train_images"], ds["train_labels"])
        test = load_idx(ds["test_images"], ds["test_labels"])
        return train, test
    train = synth_blobs(
        ds["n_classes"], ds["n_per_class"], ds["dim"], ds["spread"],
        derive_seed(master_seed, "data", "train"),
    )
    test = synth_blobs(
        ds["n_classes"], ds["test_n_per_class"], ds["dim"], ds["spread"],
        derive_seed(master_seed, "data", "test"),
    )
    return train, test


def build_scenario(cfg: dict, master_seed: int, algorithm: str | None = None) -> Scenario:
    """Materialize one resolved config + master seed into a runnable scenario."""
    train, test = _build_datasets(cfg, master_seed)
    eco = cfg["ecosystem"]
    exclusive = {
        int(cls): frozenset(owners)
        for cls, owners in eco["partition"]["exclusive_map"].items()
    }
    ecosystem = EcosystemSpec(
        k=eco["k"],
        power_dist=NormalDist(**eco["power"]),
        bandwidth_dist=NormalDist(**eco["bandwidth"]),
        partition=PartitionSpec(
            kind=eco["partition"]["kind"],
            mu_frac=eco["partition"]["mu_frac"] or 0.0,
            sigma_frac=eco["partition"]["sigma_frac"] or 0.0,
            exclusive_map=exclusive,
            seed=derive_seed(master_seed, "partition"),
        ),
        seed=derive_seed(master_seed, "ecosystem"),
    )
    model = ModelSpec(
        layer_sizes=(train.dim, *cfg["model"]["hidden"], train.n_classes),
        activation=cfg["model"]["activation"],
    )
    score = None
    if cfg["score"]["alpha"] is not None:
        score = ScoreParams(alpha=cfg["score"]["alpha"], kappa=cfg["score"]["kappa"])
    return Scenario(
        train=train,
        test=test,
        ecosystem=ecosystem,
        model=model,
        train_cfg=TrainConfig(
            learning_rate=cfg["train"]["learning_rate"],
            epochs=cfg["train"]["epochs"],
            batch_size=cfg["train"]["batch_size"],
        ),
        w_fraction=cfg["selection"]["w_fraction"],
        strategy=SelectionStrategy(
            kind=cfg["selection"]["strategy"],
            seed=derive_seed(master_seed, "strategy", cfg["selection"]["strategy_seed"]),
        ),
        criteria=ConvergenceCriteria(
            loss_threshold=cfg["convergence"]["loss_threshold"],
            stability_window=cfg["convergence"]["window"],
            stability_epsilon=cfg["convergence"]["epsilon"],
            max_rounds=cfg["convergence"]["max_rounds"],
        ),
        failures=FailurePlan(
            fraction=cfg["failures"]["fraction"],
            round=cfg["failures"]["round"],
            mode=cfg["failures"]["mode"],
        ),
        algorithm=algorithm or cfg["algorithm"],
        master_seed=master_seed,
        score=score,
        compute_cost_per_sample_epoch=cfg["timing"]["compute_cost_per_sample_epoch"],
        timeout_s=cfg["timing"]["timeout_s"],
    )
