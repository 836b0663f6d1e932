"""Figure rendering for training traces and evaluation reports."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .corpus import Label
from .metrics import EvalReport


def save_loss_curve(trace: Sequence[float], path: str | Path, title: str = "training loss"):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    epochs = np.arange(1, len(trace) + 1)
    ax.plot(epochs, trace, marker="o" if len(trace) <= 60 else None, lw=1.5)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean loss per token")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_confusion_heatmap(report: EvalReport, path: str | Path):
    counts = report.confusion
    fig, ax = plt.subplots(figsize=(4.5, 4.0))
    im = ax.imshow(counts, cmap="Blues")
    names = [label.name for label in Label]
    ax.set_xticks(range(len(names)), names)
    ax.set_yticks(range(len(names)), names)
    ax.set_xlabel("predicted")
    ax.set_ylabel("gold")
    threshold = counts.max() / 2 if counts.max() else 0
    for r in range(counts.shape[0]):
        for c in range(counts.shape[1]):
            ax.text(
                c,
                r,
                f"{counts[r, c]:d}",
                ha="center",
                va="center",
                color="white" if counts[r, c] > threshold else "black",
            )
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
