"""PNG figures for the report commands; the CSV files next to them carry the data."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)
    return path


def learning_curve(path: Path, epochs: Sequence[int], train_loss: Sequence[float],
                   val_loss: Sequence[float], val_acc: Sequence[float]) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, train_loss, label="train loss")
    ax.plot(epochs, val_loss, label="test loss", linestyle="--")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax2 = ax.twinx()
    ax2.plot(epochs, val_acc, color="tab:green", alpha=0.6, label="test accuracy")
    ax2.set_ylabel("accuracy")
    ax2.set_ylim(0, 1)
    lines = ax.get_lines() + ax2.get_lines()
    ax.legend(lines, [ln.get_label() for ln in lines], loc="center right")
    return _save(fig, path)


def test_scatter(path: Path, thetas: np.ndarray, predicted: np.ndarray, correct: np.ndarray) -> Path:
    """Dots for correct predictions coloured by label, crosses for mistakes."""
    fig, ax = plt.subplots(figsize=(5, 5))
    ok = correct.astype(bool)
    for label, colour in ((0, "tab:blue"), (1, "tab:orange")):
        sel = ok & (predicted == label)
        ax.scatter(thetas[sel, 0], thetas[sel, 1], s=3, c=colour, label=f"predicted {label}")
    ax.scatter(thetas[~ok, 0], thetas[~ok, 1], s=18, marker="x", c="k", label="wrong")
    ax.set_xlim(0, 2 * np.pi)
    ax.set_ylim(0, 2 * np.pi)
    ax.set_xlabel("theta1")
    ax.set_ylabel("theta2")
    ax.legend(loc="upper right", fontsize=7, markerscale=2)
    return _save(fig, path)


def distance_histogram(path: Path, distances: Sequence[float], bound: float) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(distances, bins=30)
    ax.axvline(bound, color="r", linestyle="--", label=f"bound {bound:.4g}")
    ax.set_xlabel("circuit vs exact output distance")
    ax.set_ylabel("trials")
    ax.legend()
    return _save(fig, path)


def phase_distributions(path: Path, dists: Sequence[np.ndarray], labels: Sequence[str]) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    width = 0.8 / max(1, len(dists))
    for k, (p, lab) in enumerate(zip(dists, labels)):
        ax.bar(np.arange(len(p)) + k * width, p, width=width, label=lab)
    ax.set_xlabel("phase register outcome y")
    ax.set_ylabel("probability")
    ax.legend()
    return _save(fig, path)
