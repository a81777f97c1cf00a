"""Figures from the reference pipeline's sweep and score CSVs.

Three figure types: the ordered/order-erased task divergence against the
mask count, per-model paired bars of the KL to each reference, and an
overlay of the true entropies with each model's cross-entropy.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

ORDERED_COLOR = "tab:orange"
UNORDERED_COLOR = "tab:green"


class MissingColumnError(ValueError):
    def __init__(self, column: str, path):
        super().__init__(f"column {column!r} missing from {path}")
        self.column = column


def _read_rows(path, required: list[str]) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for column in required:
            if column not in header:
                raise MissingColumnError(column, path)
        return sorted(reader, key=lambda row: int(row["k"]))


def _model_column(rows: list[dict], path, metric: str) -> tuple[str, str]:
    """The (model name, column name) for a per-model metric column."""
    suffix = f"_{metric}"
    for column in rows[0] if rows else []:
        if column.endswith(suffix):
            return column[: -len(suffix)], column
    raise MissingColumnError(f"*{suffix}", path)


def plot_task_divergence(sweep_csv, out_path) -> Path:
    rows = _read_rows(sweep_csv, ["k", "D_task"])
    ks = [int(r["k"]) for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(ks, [float(r["D_task"]) for r in rows], marker="o", color="tab:blue")
    ax.set_xlabel("masked tokens")
    ax.set_ylabel("KL divergence (bits)")
    ax.set_title("Ordered vs order-erased task divergence")
    ax.set_xticks(ks)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return Path(out_path)


def plot_reference_fit(score_csvs: dict[str, str], out_path) -> Path:
    """Paired bars (KL to ordered / to order-erased) per model, by mask count."""
    fig, axes = plt.subplots(
        len(score_csvs), 1, figsize=(5, 2.8 * len(score_csvs)), squeeze=False
    )
    for ax, (label, path) in zip(axes[:, 0], sorted(score_csvs.items())):
        rows = _read_rows(path, ["k"])
        _, kl_o_col = _model_column(rows, path, "kl_ordered")
        _, kl_u_col = _model_column(rows, path, "kl_unordered")
        ks = [int(r["k"]) for r in rows]
        width = 0.38
        ax.bar(
            [k - width / 2 for k in ks],
            [float(r[kl_o_col]) for r in rows],
            width,
            color=ORDERED_COLOR,
            label="vs ordered",
        )
        ax.bar(
            [k + width / 2 for k in ks],
            [float(r[kl_u_col]) for r in rows],
            width,
            color=UNORDERED_COLOR,
            label="vs order-erased",
        )
        ax.set_title(label)
        ax.set_xlabel("masked tokens")
        ax.set_ylabel("KL (bits)")
        ax.set_xticks(ks)
        ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return Path(out_path)


def plot_entropy_overlay(sweep_csv, score_csvs: dict[str, str], out_path) -> Path:
    """True entropies plus each model's cross-entropy to the ordered truth."""
    rows = _read_rows(sweep_csv, ["k", "H_ordered", "H_unordered"])
    ks = [int(r["k"]) for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(ks, [float(r["H_ordered"]) for r in rows], "--", color="black", label="H ordered")
    ax.plot(
        ks, [float(r["H_unordered"]) for r in rows], ":", color="tab:red", label="H order-erased"
    )
    for label, path in sorted(score_csvs.items()):
        model_rows = _read_rows(path, ["k"])
        _, ce_col = _model_column(model_rows, path, "ce_ordered")
        ax.plot(
            [int(r["k"]) for r in model_rows],
            [float(r[ce_col]) for r in model_rows],
            marker="o",
            label=f"{label} cross-entropy",
        )
    ax.set_xlabel("masked tokens")
    ax.set_ylabel("bits")
    ax.set_title("True entropies vs model cross-entropies")
    ax.set_xticks(ks)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return Path(out_path)


def render_all(sweep_csv, score_csvs: dict[str, str], out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return [
        plot_task_divergence(sweep_csv, out_dir / "task_divergence.png"),
        plot_reference_fit(score_csvs, out_dir / "reference_fit.png"),
        plot_entropy_overlay(sweep_csv, score_csvs, out_dir / "entropy_overlay.png"),
    ]
