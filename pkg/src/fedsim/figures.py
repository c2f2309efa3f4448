"""Figure rendering for the experiment families.

Each function takes already-summarized sweep data and writes one PNG next to
the delimited output.  Rendering consumes only the emitted data structures,
never the raw experiment state, so the figures can always be reproduced from
the CSV files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .metrics import SweepResult

STYLE = {
    "figure.figsize": (8.0, 3.2),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "axes.titlesize": 10,
}

ALG_COLORS = {"fedfm": "#1f77b4", "fedavg-ignore": "#d62728"}


def _axis_floats(sweep: SweepResult) -> list[float]:
    return [float(p.axis_value) for p in sweep.points]


def _save(fig, path: str) -> None:
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def fraction_sweep_figure(sweep: SweepResult, path: str) -> None:
    """Convergence time and accuracy against the selected worker fraction."""
    with plt.rc_context(STYLE):
        fig, (ax_c, ax_a) = plt.subplots(1, 2)
        x = _axis_floats(sweep)
        ax_c.errorbar(x, [p.mean_c for p in sweep.points], yerr=[p.std_c for p in sweep.points], marker="o")
        ax_c.set_xlabel("worker fraction")
        ax_c.set_ylabel("convergence time (s)")
        ax_a.errorbar(x, [p.mean_a for p in sweep.points], yerr=[p.std_a for p in sweep.points], marker="o", color="#2ca02c")
        ax_a.set_xlabel("worker fraction")
        ax_a.set_ylabel("accuracy")
        _save(fig, path)


def strategy_figure(sweep: SweepResult, path: str) -> None:
    """Convergence time and accuracy per selection strategy."""
    with plt.rc_context(STYLE):
        fig, (ax_c, ax_a) = plt.subplots(1, 2)
        names = [p.axis_value for p in sweep.points]
        ax_c.bar(names, [p.mean_c for p in sweep.points], yerr=[p.std_c for p in sweep.points])
        ax_c.set_ylabel("convergence time (s)")
        ax_c.tick_params(axis="x", rotation=30)
        ax_a.bar(names, [p.mean_a for p in sweep.points], yerr=[p.std_a for p in sweep.points], color="#2ca02c")
        ax_a.set_ylabel("accuracy")
        ax_a.tick_params(axis="x", rotation=30)
        _save(fig, path)


def failure_sweep_figure(sweep: SweepResult, path: str) -> None:
    """Convergence time and accuracy against the failed worker fraction."""
    with plt.rc_context(STYLE):
        fig, (ax_c, ax_a) = plt.subplots(1, 2)
        x = _axis_floats(sweep)
        ax_c.errorbar(x, [p.mean_c for p in sweep.points], yerr=[p.std_c for p in sweep.points], marker="o")
        ax_c.set_xlabel("failed fraction of selected set")
        ax_c.set_ylabel("convergence time (s)")
        ax_a.errorbar(x, [p.mean_a for p in sweep.points], yerr=[p.std_a for p in sweep.points], marker="o", color="#2ca02c")
        ax_a.set_xlabel("failed fraction of selected set")
        ax_a.set_ylabel("accuracy")
        _save(fig, path)


def fail_vs_nofail_figure(nofail: SweepResult, fail: SweepResult, path: str) -> None:
    """Accuracy against contributing node count, with and without failures."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 3.2))
        ax.errorbar(
            _axis_floats(nofail), [p.mean_a for p in nofail.points],
            yerr=[p.std_a for p in nofail.points], marker="o", label="no failures",
        )
        ax.errorbar(
            _axis_floats(fail), [p.mean_a for p in fail.points],
            yerr=[p.std_a for p in fail.points], marker="s", label="equal contributors after failures",
        )
        ax.set_xlabel("contributing worker nodes")
        ax.set_ylabel("accuracy")
        ax.legend()
        _save(fig, path)


def mitigation_curves_figure(
    curves: dict[str, list[tuple[float, float]]], fraction: float, path: str
) -> None:
    """Accuracy over simulated time for each algorithm at one failure level."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 3.2))
        for algorithm, series in sorted(curves.items()):
            xs = [t for t, _ in series]
            ys = [a for _, a in series]
            ax.plot(xs, ys, marker=".", label=algorithm, color=ALG_COLORS.get(algorithm))
        ax.set_xlabel("simulated time (s)")
        ax.set_ylabel("test accuracy")
        ax.set_title(f"{int(fraction * 100)}% of selected workers failing")
        ax.legend()
        _save(fig, path)


def mitigation_summary_figure(sweeps: dict[str, SweepResult], path: str) -> None:
    """Final accuracy against failed fraction, one line per algorithm."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 3.2))
        for algorithm, sweep in sorted(sweeps.items()):
            ax.errorbar(
                _axis_floats(sweep), [p.mean_a for p in sweep.points],
                yerr=[p.std_a for p in sweep.points], marker="o",
                label=algorithm, color=ALG_COLORS.get(algorithm),
            )
        ax.set_xlabel("failed fraction of selected set")
        ax.set_ylabel("final accuracy")
        ax.legend()
        _save(fig, path)
