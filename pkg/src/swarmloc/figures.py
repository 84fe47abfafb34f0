"""Matplotlib rendering for the report path.

Figures are written next to the delimited output with pinned metadata so two
runs of the same experiment produce byte-identical files.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SAVE_KW = dict(format="png", dpi=110, metadata={"Software": "swarmloc"})


def _finish(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path


def cdf_plot(series: Mapping[str, Sequence[float]], path, xlabel: str, title: str = "") -> Path:
    """Empirical CDF per labelled series."""
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    for label in series:
        values = np.sort(np.asarray(list(series[label]), dtype=float))
        if values.size == 0:
            continue
        y = np.arange(1, values.size + 1) / values.size
        ax.step(values, y, where="post", label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("CDF")
    ax.set_ylim(0.0, 1.02)
    if title:
        ax.set_title(title, fontsize=10)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    return _finish(fig, path)


def line_plot(
    series: Mapping[str, Sequence[tuple[float, float]]],
    path,
    xlabel: str,
    ylabel: str,
    title: str = "",
) -> Path:
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    for label in series:
        pts = list(series[label])
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", ms=3, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title, fontsize=10)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    return _finish(fig, path)


def policy_bars(values: Mapping[str, float], path, ylabel: str, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    labels = list(values)
    ax.bar(range(len(labels)), [values[l] for l in labels], color="#4878a8")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, fontsize=9)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title, fontsize=10)
    ax.grid(axis="y", alpha=0.3)
    return _finish(fig, path)
