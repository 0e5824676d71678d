"""Static vector-graphics renderings of stored trace and batch CSVs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .io import read_table

TRACE_COLUMNS = ["t_s", "force_n", "bone_ap_mm", "tool_mm", "depth_mm"]
DECISION_COLUMNS = ["index", "t_s", "f_bar_n", "a_star", "phase", "decision"]


def _read_decisions(path: Path):
    import csv

    rows = []
    with Path(path).open("r", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != DECISION_COLUMNS:
            raise ValueError(f"{path}: unexpected decision log header {reader.fieldnames}")
        for row in reader:
            rows.append(row)
    return rows


def plot_force_trace(trace_csv: Path, decisions_csv: Path, out_path: Path) -> None:
    """Force trace with the averaged feature curve and key-point markers
    at every recognizer phase change."""
    trace = read_table(trace_csv, TRACE_COLUMNS)
    decisions = _read_decisions(decisions_csv)

    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(9, 6))
    ax1.plot(trace["t_s"], trace["force_n"], lw=0.4, color="0.6", label="raw force")
    t_b = np.array([float(r["t_s"]) for r in decisions])
    f_bar = np.array([float(r["f_bar_n"]) for r in decisions])
    a_star = np.array([float(r["a_star"]) for r in decisions])
    ax1.plot(t_b, f_bar, lw=1.5, color="C0", label="averaged force")

    prev = None
    for row in decisions:
        if row["phase"] != prev:
            ax1.axvline(float(row["t_s"]), color="C3", ls="--", lw=0.8)
            ax1.text(float(row["t_s"]), ax1.get_ylim()[1] * 0.0, row["phase"],
                     rotation=90, fontsize=7, va="bottom", color="C3")
            prev = row["phase"]
    ax1.set_ylabel("thrust force (N)")
    ax1.legend(loc="upper left", fontsize=8)

    ax2.plot(t_b, a_star, lw=1.2, color="C1")
    ax2.set_ylabel("normalized feature")
    ax2.set_xlabel("time (s)")
    ax2.axhline(0.7, color="0.7", ls=":", lw=0.8)
    ax2.axhline(0.4, color="0.7", ls=":", lw=0.8)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


BATCH_COLUMNS = [
    "index", "seed", "mode", "spindle_rpm", "success", "stop_depth_mm",
    "residual_mm", "f_out_n", "f_in_n", "stop_reason", "abort_reason",
]


def _read_batch(path: Path):
    import csv

    rows = []
    with Path(path).open("r", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != BATCH_COLUMNS:
            raise ValueError(f"{path}: unexpected batch header {reader.fieldnames}")
        rows.extend(reader)
    return rows


def plot_residuals(batch_csv: Path, out_path: Path) -> None:
    """Residual inner-cortical thickness bars for successful trials."""
    rows = [r for r in _read_batch(batch_csv) if r["success"] == "True"]
    residuals = [float(r["residual_mm"]) for r in rows]
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.bar(range(1, len(residuals) + 1), residuals, color="C0")
    if residuals:
        ax.axhline(float(np.median(residuals)), color="C3", ls="--", lw=1.0,
                   label=f"median {np.median(residuals):.2f} mm")
        ax.legend(fontsize=8)
    ax.set_xlabel("successful trial")
    ax.set_ylabel("residual thickness (mm)")
    ax.set_ylim(0, 2.2)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def plot_success_rates(batch_csvs: list[Path], out_path: Path) -> None:
    """Success-rate bars, one group per batch file (label = mode @ rpm)."""
    labels, rates = [], []
    for path in batch_csvs:
        rows = _read_batch(path)
        if not rows:
            continue
        labels.append(f"{rows[0]['mode']}\n{rows[0]['spindle_rpm']} rpm")
        rates.append(np.mean([r["success"] == "True" for r in rows]))
    fig, ax = plt.subplots(figsize=(1.6 * max(len(labels), 2) + 2, 4))
    ax.bar(range(len(rates)), rates, color="C0")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylabel("success rate")
    ax.set_ylim(0, 1.05)
    for i, r in enumerate(rates):
        ax.text(i, r + 0.02, f"{r:.0%}", ha="center", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
