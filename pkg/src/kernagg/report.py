"""Render benchmark figures from runs.csv / timings.csv next to the tables.

Two figures: test-RMSE boxplots per method, and wall-clock boxplots for
the aggregators.  Both group replications by method in the canonical
order (per-family best/worst, then projected aggregators by rising m,
then the full aggregator), so figures from different runs line up.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import DataError
from .harness import RunResult, load_results
from .learners import FAMILIES

__all__ = ["method_order", "collect_series", "render_rmse_figure", "render_timing_figure", "render_report"]


def method_order(methods: set[str]) -> list[str]:
    """Canonical plotting order for method names."""

    def key(method: str) -> tuple:
        if method.endswith("_best") or method.endswith("_worst"):
            family = method.rsplit("_", 1)[0]
            rank = FAMILIES.index(family) if family in FAMILIES else len(FAMILIES)
            return (0, rank, 0 if method.endswith("_best") else 1, 0)
        if method.startswith("comb_m_"):
            try:
                m = int(method.rsplit("_", 1)[1])
            except ValueError:
                m = 0
            return (1, 0, 0, m)
        if method == "comb_full":
            return (2, 0, 0, 0)
        return (3, 0, 0, 0)

    return sorted(methods, key=key)


def collect_series(
    results: list[RunResult], attribute: str
) -> tuple[list[str], list[np.ndarray]]:
    """Per-method value arrays across replications for one outcome field."""
    by_method: dict[str, list[float]] = {}
    for result in results:
        for entry in result.outcomes:
            value = getattr(entry, attribute)
            if value is not None:
                by_method.setdefault(entry.method, []).append(float(value))
    if not by_method:
        raise DataError(f"results carry no '{attribute}' values")
    ordered = method_order(set(by_method))
    return ordered, [np.asarray(by_method[name]) for name in ordered]


def _boxplot(labels: list[str], series: list[np.ndarray], ylabel: str, title: str, path: Path) -> None:
    width = max(6.0, 0.45 * len(labels) + 2.0)
    fig, ax = plt.subplots(figsize=(width, 4.5))
    ax.boxplot(series, tick_labels=labels)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.tick_params(axis="x", rotation=75)
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_rmse_figure(results: list[RunResult], path: str | Path) -> Path:
    labels, series = collect_series(results, "rmse")
    path = Path(path)
    _boxplot(labels, series, "test RMSE", "Test RMSE by method", path)
    return path


def render_timing_figure(results: list[RunResult], path: str | Path) -> Path:
    labels, series = collect_series(results, "seconds")
    path = Path(path)
    _boxplot(labels, series, "seconds", "Aggregator wall-clock by method", path)
    return path


def render_report(
    runs_path: str | Path,
    out_dir: str | Path,
    timings_path: str | Path | None = None,
) -> list[Path]:
    """Render all figures for a finished experiment into out_dir."""
    results = load_results(runs_path, timings_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [render_rmse_figure(results, out / "rmse_by_method.png")]
    try:
        written.append(render_timing_figure(results, out / "seconds_by_method.png"))
    except DataError:
        pass  # runs.csv alone has no timings; figure is optional then
    return written
