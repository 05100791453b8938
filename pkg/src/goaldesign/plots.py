"""SVG figure generation for utility sweeps.

One-dimensional sweeps become a line with a +/- one-standard-deviation
band; two-dimensional sweeps become a filled contour map.  Figures are
written as SVG so repeated runs with the same seed produce identical
bytes (matplotlib's embedded hash salt is pinned).
"""

from __future__ import annotations

import os
from typing import Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .design_opt import SweepResult

__all__ = ["plot_sweep", "save_sweep_figure"]

# Pin the id salt so SVG element ids are reproducible across runs.
os.environ.setdefault("SOURCE_DATE_EPOCH", "0")
matplotlib.rcParams["svg.hashsalt"] = "goaldesign"


def plot_sweep(sweep: SweepResult, title: Optional[str] = None,
               ax: Optional[plt.Axes] = None) -> plt.Figure:
    """Render a 1-D line/band or 2-D filled-contour utility figure."""
    n_dim = len(sweep.grid.axes)
    if n_dim > 2:
        raise ValueError("plotting supports 1- or 2-dimensional design grids")
    if ax is None:
        fig, ax = plt.subplots(figsize=(6, 4))
    else:
        fig = ax.figure

    means = sweep.means()
    stds = sweep.stds()
    if n_dim == 1:
        x = sweep.grid.axes[0]
        ax.plot(x, means, color="C0", marker="o", markersize=3)
        ax.fill_between(x, means - stds, means + stds, color="C0", alpha=0.25,
                        linewidth=0)
        ax.set_xlabel("design")
        ax.set_ylabel("expected utility")
    else:
        ny = len(sweep.grid.axes[1])
        xg, yg = np.meshgrid(sweep.grid.axes[0], sweep.grid.axes[1],
                             indexing="ij")
        zg = means.reshape(len(sweep.grid.axes[0]), ny)
        cs = ax.contourf(xg, yg, zg, levels=20, cmap="viridis")
        fig.colorbar(cs, ax=ax, label="expected utility")
        ax.plot(*sweep.argmax, marker="*", color="red", markersize=12)
        ax.set_xlabel("design dimension 1")
        ax.set_ylabel("design dimension 2")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return fig


def save_sweep_figure(sweep: SweepResult, path: str,
                      title: Optional[str] = None) -> None:
    """Write the sweep figure as SVG with reproducible metadata."""
    fig = plot_sweep(sweep, title=title)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
