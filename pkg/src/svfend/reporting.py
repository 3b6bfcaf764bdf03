"""Figure rendering: every report/analysis CSV gets a PNG twin next to it."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis import EMOTIONS
from .metrics import METRIC_NAMES

_LABEL_COLORS = {"real": "tab:blue", "fake": "tab:red"}


def _finish(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def benchmark_figure(report, path: str | Path) -> Path:
    """Accuracy per method with std error bars."""
    names, means, stds = [], [], []
    for method in report.methods:
        aggregate = method.aggregate()
        if "accuracy" not in aggregate:
            continue
        mean, std = aggregate["accuracy"]
        names.append(method.method)
        means.append(mean)
        stds.append(std or 0.0)
    fig, ax = plt.subplots(figsize=(max(4, 1.1 * len(names)), 3.2))
    ax.bar(names, means, yerr=stds, capsize=4, color="tab:gray")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0, 1)
    ax.set_title(f"benchmark ({report.split.kind})")
    ax.tick_params(axis="x", rotation=30)
    return _finish(fig, path)


def metric_table_figure(report, path: str | Path) -> Path:
    """All four metrics per method, grouped bars."""
    names = [m.method for m in report.methods if m.folds]
    fig, ax = plt.subplots(figsize=(max(5, 1.6 * len(names)), 3.2))
    width = 0.2
    x = np.arange(len(names))
    for k, metric in enumerate(METRIC_NAMES):
        values = [m.aggregate()[metric][0] for m in report.methods if m.folds]
        ax.bar(x + (k - 1.5) * width, values, width, label=metric)
    ax.set_xticks(x, names, rotation=30)
    ax.set_ylim(0, 1)
    ax.legend(fontsize=7)
    return _finish(fig, path)


def likes_vs_fans_figure(stats, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    for name, label in (("real", 0), ("fake", 1)):
        rows = [s for s in stats if s.label == label]
        ax.plot([s.bin_index for s in rows], [s.mean_like_count for s in rows],
                marker="o", label=name, color=_LABEL_COLORS[name])
    ax.set_xlabel("publisher fan-count bin")
    ax.set_ylabel("mean like count")
    ax.legend()
    return _finish(fig, path)


def emotion_figure(profiles: dict, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(5.5, 3.2))
    x = np.arange(len(EMOTIONS))
    for k, (name, profile) in enumerate(sorted(profiles.items())):
        ax.bar(x + (k - 0.5) * 0.35, profile, 0.35, label=name,
               color=_LABEL_COLORS.get(name))
    ax.set_xticks(x, EMOTIONS, rotation=30)
    ax.set_ylabel("mean intensity / token")
    ax.legend()
    return _finish(fig, path)


def doubt_figure(ratios: dict, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(3.2, 3.2))
    names = sorted(ratios)
    ax.bar(names, [ratios[n] for n in names],
           color=[_LABEL_COLORS.get(n, "tab:gray") for n in names])
    ax.set_ylabel("videos with doubtful comments")
    ax.set_ylim(0, 1)
    return _finish(fig, path)


def dedup_figure(rates: dict, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(3.2, 3.2))
    names = sorted(rates)
    ax.bar(names, [rates[n] for n in names],
           color=[_LABEL_COLORS.get(n, "tab:gray") for n in names])
    ax.set_ylabel("cover duplication rate")
    ax.set_ylim(0, 1)
    return _finish(fig, path)


def training_history_figure(history, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot([h.epoch for h in history], [h.train_loss for h in history],
            label="train loss", color="tab:gray")
    ax2 = ax.twinx()
    ax2.plot([h.epoch for h in history], [h.val_accuracy for h in history],
             label="val accuracy", color="tab:blue")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax2.set_ylabel("accuracy")
    ax2.set_ylim(0, 1)
    return _finish(fig, path)
