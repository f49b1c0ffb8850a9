"""Render run figures to files next to the delimited output.

All rendering is file-based (Agg backend); the engine itself never plots.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .harness import RunResult


def render_figures(result: RunResult, out_dir) -> list[Path]:
    """Write the four standard run figures as PNGs; returns their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = result.cfg
    ids = [u.id for u in cfg.units]
    paths = []

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(result.episodes, result.sum_avg_reward, lw=1.5)
    ax.set_xlabel("episode")
    ax.set_ylabel("sum of per-unit average reward")
    ax.set_title("Episode reward across all units")
    ax.grid(alpha=0.3)
    paths.append(out / "reward_sum.png")
    fig.savefig(paths[-1], dpi=120, bbox_inches="tight")
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(7, 4))
    for j, uid in enumerate(ids):
        ax.plot(result.episodes, result.mean_bid[:, j], lw=1.0, label=f"unit {uid}")
    ax.set_xlabel("episode")
    ax.set_ylabel("average bid multiplier")
    ax.set_title("Average bids per episode")
    ax.legend(ncol=3, fontsize=8)
    ax.grid(alpha=0.3)
    paths.append(out / "bids.png")
    fig.savefig(paths[-1], dpi=120, bbox_inches="tight")
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(8, 3))
    days, units = result.raster.nonzero()
    ax.scatter(days + 1, units + 1, s=8, marker="s")
    ax.set_xlabel("day")
    ax.set_ylabel("unit")
    ax.set_yticks(range(1, cfg.n_units + 1), [str(i) for i in ids])
    ax.set_ylim(0.5, cfg.n_units + 0.5)
    ax.set_title("Executed maintenance schedule")
    ax.grid(alpha=0.3, axis="x")
    paths.append(out / "maintenance_raster.png")
    fig.savefig(paths[-1], dpi=120, bbox_inches="tight")
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(result.episodes, result.total_maint_cost / cfg.n_units, lw=1.5)
    ax.set_xlabel("episode")
    ax.set_ylabel("average maintenance cost per unit")
    ax.set_title("Maintenance cost per episode")
    ax.grid(alpha=0.3)
    paths.append(out / "maintenance_cost.png")
    fig.savefig(paths[-1], dpi=120, bbox_inches="tight")
    plt.close(fig)

    return paths
