"""Multi-seed result summaries and their CSV form.

Each sweep point aggregates one axis value over its seeds: mean and
population standard deviation of convergence time and accuracy.  Floats are
written with repr so a read-back reproduces the sweep exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .aggregator import ExperimentResult

CSV_HEADER = ["axis", "mean_C_s", "std_C_s", "mean_A", "std_A", "n_seeds"]


@dataclass(frozen=True)
class SweepPoint:
    axis_value: str
    mean_c: float
    std_c: float
    mean_a: float
    std_a: float
    n_seeds: int


@dataclass(frozen=True)
class SweepResult:
    axis: str
    points: tuple[SweepPoint, ...]


def _axis_sort_key(value: str):
    try:
        return (0, float(value), "")
    except ValueError:
        return (1, 0.0, value)


def summarize(results: dict[str, list[ExperimentResult]], axis: str) -> SweepResult:
    """Per-axis-value mean/std (population) of C and A, ordered by axis value."""
    points = []
    for value in sorted(results, key=_axis_sort_key):
        group = results[value]
        if not group:
            raise ValueError(f"axis value {value!r} has no results")
        cs = np.array([r.convergence_time_s for r in group])
        accs = np.array([r.accuracy for r in group])
        points.append(
            SweepPoint(
                axis_value=value,
                mean_c=float(cs.mean()),
                std_c=float(cs.std()),
                mean_a=float(accs.mean()),
                std_a=float(accs.std()),
                n_seeds=len(group),
            )
        )
    return SweepResult(axis=axis, points=tuple(points))


def emit_csv(sweep: SweepResult, path: str) -> None:
    """Write the sweep with a fixed header; stds are population stds."""
    try:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(CSV_HEADER)
            for p in sweep.points:
                writer.writerow(
                    [p.axis_value, repr(p.mean_c), repr(p.std_c), repr(p.mean_a), repr(p.std_a), p.n_seeds]
                )
    except OSError as exc:
        raise OSError(f"cannot write sweep CSV to {path}: {exc}") from exc


def read_csv(path: str, axis: str) -> SweepResult:
    """Inverse of emit_csv; exact float roundtrip."""
    points = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        for row in reader:
            points.append(
                SweepPoint(
                    axis_value=row[0],
                    mean_c=float(row[1]),
                    std_c=float(row[2]),
                    mean_a=float(row[3]),
                    std_a=float(row[4]),
                    n_seeds=int(row[5]),
                )
            )
    return SweepResult(axis=axis, points=tuple(points))


def series_to_csv(series: list[tuple[float, float]], path: str, columns: tuple[str, str]) -> None:
    """Plain two-column plot-data file."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(list(columns))
        for x, y in series:
            writer.writerow([repr(float(x)), repr(float(y))])
