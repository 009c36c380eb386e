"""Figures for the experiment report (matplotlib, headless)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_series(series: dict[str, list[tuple[float, float, float]]], xlabel: str, ylabel: str, path: str) -> None:
    """One errorbar line per labelled series of (x, y, err) triples."""
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for label, pts in sorted(series.items()):
        xs, ys, es = zip(*pts)
        ax.errorbar(xs, ys, yerr=es, marker="o", capsize=3, label=label or None)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(alpha=0.3)
    if any(series):
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)
