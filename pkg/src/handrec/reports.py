"""Writers for the delimited outputs and their companion figures."""

from __future__ import annotations

import json
import os

import numpy as np

from . import figures
from .evaluate import AblationRow, mean_wer_by_variant
from .metrics import MetricReport


def write_metric_report(report: MetricReport, out_dir: str, stem: str = "report") -> dict[str, str]:
    """Per-sample JSONL, a human-readable summary and an edit-distance histogram."""
    os.makedirs(out_dir, exist_ok=True)
    jsonl_path = os.path.join(out_dir, f"{stem}.jsonl")
    with open(jsonl_path, "w", encoding="utf-8") as fh:
        for rec in report.records:
            fh.write(
                json.dumps(
                    {
                        "path": rec.path,
                        "reference": rec.reference,
                        "hypothesis": rec.hypothesis,
                        "distance": rec.distance,
                        "reference_length": rec.reference_length,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    txt_path = os.path.join(out_dir, f"{stem}.txt")
    with open(txt_path, "w", encoding="utf-8") as fh:
        fh.write(report.summary_line() + "\n")
    fig_path = os.path.join(out_dir, f"{stem}_distances.png")
    figures.plot_distance_histogram([r.distance for r in report.records], fig_path)
    return {"jsonl": jsonl_path, "txt": txt_path, "figure": fig_path}


def write_training_report(history: list[dict], out_dir: str) -> dict[str, str]:
    """Loss/error curves next to the metrics.jsonl the trainer already wrote."""
    fig_path = os.path.join(out_dir, "loss_curves.png")
    figures.plot_loss_curves(history, fig_path)
    return {"figure": fig_path}


def write_ablation_table(rows: list[AblationRow], out_dir: str) -> dict[str, str]:
    """Machine-readable rows, a fixed-width text table and a WER bar chart."""
    os.makedirs(out_dir, exist_ok=True)
    jsonl_path = os.path.join(out_dir, "ablation.jsonl")
    with open(jsonl_path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row.to_dict(), ensure_ascii=False) + "\n")
    means = mean_wer_by_variant(rows)
    txt_path = os.path.join(out_dir, "ablation.txt")
    with open(txt_path, "w", encoding="utf-8") as fh:
        fh.write(f"{'variant':<16}{'Att':<5}{'WES':<5}{'INIT':<6}{'seed':<6}{'WER':>8}{'CER':>8}\n")
        for row in rows:
            fh.write(
                f"{row.variant:<16}"
                f"{'x' if row.attention else '-':<5}"
                f"{'x' if row.embedding_supervision else '-':<5}"
                f"{'x' if row.semantic_init else '-':<6}"
                f"{row.seed:<6}"
                f"{row.wer:>8.4f}{row.cer:>8.4f}\n"
            )
        fh.write("\nmean WER by variant\n")
        for name, value in means.items():
            fh.write(f"{name:<16}{value:>8.4f}\n")
    fig_path = os.path.join(out_dir, "ablation.png")
    names = list(means)
    figures.plot_ablation_bars(names, [means[n] for n in names], fig_path)
    return {"jsonl": jsonl_path, "txt": txt_path, "figure": fig_path}


def write_similarity(
    matrix: np.ndarray,
    image_labels: list[str],
    word_labels: list[str],
    out_dir: str,
    heatmap: bool = True,
) -> dict[str, str]:
    """Tab-separated numeric grid with labels, plus an optional heatmap."""
    os.makedirs(out_dir, exist_ok=True)
    tsv_path = os.path.join(out_dir, "similarity.tsv")
    with open(tsv_path, "w", encoding="utf-8") as fh:
        fh.write("image\t" + "\t".join(word_labels) + "\n")
        for label, row in zip(image_labels, matrix):
            fh.write(label + "\t" + "\t".join(f"{v:.6f}" for v in row) + "\n")
    out = {"tsv": tsv_path}
    if heatmap:
        fig_path = os.path.join(out_dir, "similarity.png")
        figures.plot_similarity_heatmap(matrix, image_labels, word_labels, fig_path)
        out["figure"] = fig_path
    return out
