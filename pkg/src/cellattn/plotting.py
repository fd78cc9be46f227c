"""Figures written next to the JSON/text reports."""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "font.size": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def _save(fig, path, meta: dict | None = None) -> Path:
    """Write ``fig``; ``meta`` (config, format version) goes into the PNG text chunk."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, metadata={"Description": json.dumps(meta, sort_keys=True)} if meta else None)
    plt.close(fig)
    return path


def plot_learning_curves(report, path, meta: dict | None = None):
    """Per-fold validation accuracy (thin) and the across-fold mean (thick)."""
    with plt.rc_context(RC):
        fig, (ax_acc, ax_loss) = plt.subplots(1, 2, figsize=(10, 3.8))
        for fold in report.folds:
            ep = [m["epoch"] for m in fold]
            ax_acc.plot(ep, [m["val_acc"] for m in fold], color="0.7", lw=0.7)
            ax_loss.plot(ep, [m["train_loss"] for m in fold], color="0.7", lw=0.7)
        mean = np.asarray(report.summary["mean_curve"])
        ax_acc.plot(np.arange(len(mean)), mean, color="C0", lw=2, label="mean over folds")
        best = report.summary["epoch"]
        ax_acc.axvline(best, color="C3", ls="--", lw=1)
        ax_acc.set_title(f"{report.dataset}: max mean val acc {100 * report.summary['accuracy']:.1f}% @ {best}")
        ax_acc.set_xlabel("epoch")
        ax_acc.set_ylabel("validation accuracy")
        ax_acc.legend(loc="lower right")
        ax_loss.set_xlabel("epoch")
        ax_loss.set_ylabel("train loss")
        return _save(fig, path, meta)


def plot_cell_counts(stats_rows, path, meta: dict | None = None):
    """Grouped bars of average k-cells per graph for each dataset."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(6, 3.5))
        sizes = sorted({k for s in stats_rows for k in s.avg_cells})
        width = 0.8 / max(1, len(stats_rows))
        x = np.arange(len(sizes))
        for i, s in enumerate(stats_rows):
            ax.bar(x + i * width, [s.avg_cells.get(k, 0.0) for k in sizes], width, label=s.name)
        ax.set_xticks(x + width * (len(stats_rows) - 1) / 2)
        ax.set_xticklabels([f"{k}-cells" for k in sizes])
        ax.set_ylabel("average per graph")
        ax.legend()
        return _save(fig, path, meta)


def plot_ablation(dataset: str, rows, path, meta: dict | None = None):
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5, 3))
        labels = [r["removed"] for r in rows]
        deltas = [100 * r["delta"] for r in rows]
        colors = ["C3" if d < 0 else "C2" for d in deltas]
        ax.barh(labels, deltas, xerr=[100 * r["std"] for r in rows], color=colors)
        ax.axvline(0, color="k", lw=0.8)
        ax.set_xlabel(f"accuracy change vs. baseline on {dataset} (points)")
        return _save(fig, path, meta)


def plot_bench(result: dict, path, meta: dict | None = None):
    """Log-log timings with fitted slopes."""
    with plt.rc_context(RC):
        fig, axes = plt.subplots(1, 2, figsize=(10, 3.8))
        for R, series in result["lifting"].items():
            axes[0].loglog(series["edges"], series["seconds"], "o-", label=f"R={R} (slope {series['slope']:.2f})")
        axes[0].set_xlabel("|E|")
        axes[0].set_ylabel("lifting time [s]")
        axes[0].legend()
        for key, series in result["layers"].items():
            axes[1].loglog(series["edges"], series["seconds"], "o-", label=f"{key} (slope {series['slope']:.2f})")
        axes[1].set_xlabel("|E|")
        axes[1].set_ylabel("forward time [s]")
        axes[1].legend()
        return _save(fig, path, meta)
