"""Evaluation report output: aligned table, delimited CSV, and figures."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .metrics import EvalReport

TABLE_COLUMNS = [
    ("L2-Pos G/L", "l2_pos_g", "l2_pos_l"),
    ("L2-Vel G/L", "l2_vel_g", "l2_vel_l"),
    ("L2-Acc G/L", "l2_acc_g", "l2_acc_l"),
    ("L2-Jerk G/L", "l2_jerk_g", "l2_jerk_l"),
    ("KPE", "kpe"),
    ("Jitter", "jitter"),
    ("Diversity", "diversity"),
]


def render_table(reports: dict[str, EvalReport]) -> str:
    """Aligned text table, one row per model/baseline."""
    header = ["model"] + [c[0] for c in TABLE_COLUMNS]
    rows = [header]
    for name, rep in reports.items():
        d = rep.to_dict()
        row = [name]
        for col in TABLE_COLUMNS:
            if len(col) == 3:
                row.append(f"{d[col[1]]:.4f} / {d[col[2]]:.4f}")
            else:
                row.append(f"{d[col[1]]:.4f}")
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = []
    for i, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)))
        if i == 0:
            lines.append("-" * (sum(widths) + 2 * (len(widths) - 1)))
    return "\n".join(lines)


def write_report(reports: dict[str, EvalReport], out_dir, extra: dict | None = None) -> Path:
    """Write report.json + report.csv + figures/ under out_dir; returns out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = {name: rep.to_dict() for name, rep in reports.items()}
    if extra:
        doc["_meta"] = extra
    with open(out / "report.json", "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)

    metric_keys = [k for c in TABLE_COLUMNS for k in c[1:]]
    with open(out / "report.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model"] + metric_keys)
        for name, rep in reports.items():
            d = rep.to_dict()
            writer.writerow([name] + [f"{d[k]:.9g}" for k in metric_keys])

    fig_dir = out / "figures"
    fig_dir.mkdir(exist_ok=True)
    _metric_bars(reports, fig_dir / "metrics.png")
    return out


def _metric_bars(reports: dict[str, EvalReport], path: Path) -> None:
    groups = [
        ("position", ["l2_pos_g", "l2_pos_l"]),
        ("velocity", ["l2_vel_g", "l2_vel_l"]),
        ("acceleration", ["l2_acc_g", "l2_acc_l"]),
        ("jerk", ["l2_jerk_g", "l2_jerk_l"]),
        ("keypose / quality", ["kpe", "jitter", "diversity"]),
    ]
    fig, axes = plt.subplots(1, len(groups), figsize=(4 * len(groups), 3.2))
    names = list(reports)
    for ax, (title, keys) in zip(axes, groups):
        width = 0.8 / max(len(names), 1)
        xs = np.arange(len(keys))
        for i, name in enumerate(names):
            d = reports[name].to_dict()
            ax.bar(xs + i * width, [d[k] for k in keys], width=width, label=name)
        ax.set_xticks(xs + width * (len(names) - 1) / 2)
        ax.set_xticklabels(keys, rotation=30, ha="right", fontsize=8)
        ax.set_title(title, fontsize=10)
    axes[0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_loss_curve(history: list[tuple[int, float]], out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "loss.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss"])
        writer.writerows(history)
    steps, losses = zip(*history)
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.plot(steps, losses)
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    fig.tight_layout()
    fig.savefig(out / "loss_curve.png", dpi=120)
    plt.close(fig)


def write_retiming_figure(errors: list[int], tolerance: int, out_dir) -> None:
    """Histogram of keypose placement error (argmin frame minus true frame)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(5, 3.2))
    lo, hi = min(errors), max(errors)
    bins = np.arange(lo - 0.5, hi + 1.5)
    ax.hist(errors, bins=bins, color="tab:blue", alpha=0.8)
    ax.axvline(-tolerance - 0.5, color="tab:red", ls="--", lw=1)
    ax.axvline(tolerance + 0.5, color="tab:red", ls="--", lw=1)
    ax.set_xlabel("keypose placement error (frames)")
    ax.set_ylabel("pairs")
    fig.tight_layout()
    fig.savefig(out / "retiming_error.png", dpi=120)
    plt.close(fig)
