"""Figure rendering for environments, training traces, and evaluations.

Everything draws straight to a file; no interactive backends.
"""

from __future__ import annotations

from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.colors import ListedColormap
from matplotlib.patches import Rectangle

from .grid_env import KIND_CODES, NUM_KINDS, REGION_KINDS, GridMap
from .irl import TrainReport

KIND_COLORS = (
    "#8c8c8c",  # building
    "#b5d99c",  # grass
    "#2e7d32",  # tree
    "#607d8b",  # stone
    "#b5651d",  # barrel
    "#e8dcc0",  # tile
)
KIND_NAMES = ("building", "grass", "tree", "stone", "barrel", "tile")


def render_env(grid: GridMap, path: str) -> None:
    """Draw the grid: one colored square per cell, region centers marked."""
    fig, ax = plt.subplots(figsize=(6, 6))
    cmap = ListedColormap(KIND_COLORS)
    ax.imshow(grid.cells, cmap=cmap, vmin=0, vmax=NUM_KINDS - 1, origin="upper")
    labels = grid.label_table()
    for y in range(grid.height):
        for x in range(grid.width):
            lab = int(labels[y, x])
            if lab >= 0:
                ax.add_patch(
                    Rectangle((x - 0.5, y - 0.5), 1, 1, fill=False,
                              edgecolor="red", linewidth=2)
                )
                ax.text(x, y, str(lab), ha="center", va="center",
                        color="red", fontsize=11, fontweight="bold")
    if grid.start is not None:
        sx, sy = grid.start
        ax.plot(sx, sy, marker="*", color="black", markersize=14)
    handles = [
        Rectangle((0, 0), 1, 1, facecolor=KIND_COLORS[k],
                  label=f"{KIND_NAMES[k]} ({KIND_CODES[k]})")
        for k in range(NUM_KINDS)
    ]
    ax.legend(handles=handles, loc="upper left", bbox_to_anchor=(1.02, 1.0),
              fontsize=8, frameon=False)
    ax.set_xticks(range(grid.width))
    ax.set_yticks(range(grid.height))
    ax.tick_params(labelsize=7)
    ax.set_title(f"{grid.width}x{grid.height} environment, "
                 f"{len(REGION_KINDS)} region types")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_training_curves(reports: Sequence[TrainReport], path: str) -> None:
    """Log-likelihood, gradient norm, and success ratio over updates.

    Accepts one report per training phase; phases are concatenated on the
    x axis with boundaries marked.
    """
    fig, axes = plt.subplots(3, 1, figsize=(7, 8), sharex=True)
    offset = 0
    bounds = []
    for report in reports:
        ts = [offset + row[0] for row in report.rows]
        lls = [row[1] for row in report.rows]
        gns = [row[2] for row in report.rows]
        axes[0].plot(ts, lls, color="tab:blue")
        axes[1].plot(ts, gns, color="tab:orange")
        if report.evals:
            ets = [offset + t for t, _ in report.evals]
            ebs = [b for _, b in report.evals]
            axes[2].plot(ets, ebs, marker="o", markersize=3, color="tab:green")
        offset = (ts[-1] + 1) if ts else offset
        bounds.append(offset)
    for ax in axes:
        for b in bounds[:-1]:
            ax.axvline(b, color="gray", linewidth=0.6, linestyle="--")
        ax.grid(alpha=0.3)
    axes[0].set_ylabel("log-likelihood")
    axes[1].set_ylabel("gradient norm")
    axes[1].set_yscale("log")
    axes[2].set_ylabel("success ratio")
    axes[2].set_ylim(-0.05, 1.05)
    axes[2].set_xlabel("update")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_test_betas(
    names: Sequence[str],
    means: Sequence[float],
    stds: Sequence[float],
    path: str,
    per_env: Optional[Sequence[Sequence[float]]] = None,
) -> None:
    """Bar chart of mean success ratio per method with std error bars."""
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = np.arange(len(names))
    ax.bar(xs, means, yerr=stds, capsize=4, color="tab:blue", alpha=0.8)
    if per_env is not None:
        for i, betas in enumerate(per_env):
            jitter = np.linspace(-0.18, 0.18, len(betas)) if len(betas) > 1 else [0.0]
            ax.scatter(i + np.asarray(jitter), betas, s=12, color="black",
                       zorder=3, alpha=0.6)
    ax.set_xticks(xs)
    ax.set_xticklabels(names)
    ax.set_ylabel("success ratio")
    ax.set_ylim(0, 1.05)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
