"""Matplotlib renderers for the report paths; all figures go to files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_loss_curves(history: list[dict], path: str) -> None:
    epochs = [r["epoch"] for r in history]
    fig, (left, right) = plt.subplots(1, 2, figsize=(9, 3.2))
    left.plot(epochs, [r["l_r"] for r in history], label="recognition")
    left.plot(epochs, [r["l_e"] for r in history], label="embedding")
    left.plot(epochs, [r["total"] for r in history], label="total", linestyle="--")
    left.set_xlabel("epoch")
    left.set_ylabel("loss")
    left.legend(fontsize=8)
    if any("val_wer" in r for r in history):
        right.plot(epochs, [r.get("val_wer") for r in history], label="val WER")
        right.plot(epochs, [r.get("val_cer") for r in history], label="val CER")
        right.set_xlabel("epoch")
        right.set_ylabel("error rate")
        right.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_distance_histogram(distances: list[int], path: str) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    top = max(distances) if distances else 1
    ax.hist(distances, bins=range(0, top + 2), align="left", rwidth=0.85)
    ax.set_xlabel("edit distance to reference")
    ax.set_ylabel("samples")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_ablation_bars(names: list[str], wers: list[float], path: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.bar(range(len(names)), wers)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("test WER")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_similarity_heatmap(
    matrix: np.ndarray, row_labels: list[str], col_labels: list[str], path: str
) -> None:
    fig, ax = plt.subplots(figsize=(max(4.0, 0.25 * len(col_labels)), max(3.0, 0.25 * len(row_labels))))
    image = ax.imshow(matrix, vmin=-1.0, vmax=1.0, cmap="viridis", aspect="auto")
    ax.set_xticks(range(len(col_labels)))
    ax.set_xticklabels(col_labels, rotation=90, fontsize=6)
    ax.set_yticks(range(len(row_labels)))
    ax.set_yticklabels(row_labels, fontsize=6)
    fig.colorbar(image, ax=ax, label="cosine similarity")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
