"""Figures for an output directory, rendered from its CSV files."""
from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _read(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def plot_sweep(rows: list[dict], path: Path) -> Path:
    axis = rows[0]["sweep_axis"]
    series = defaultdict(list)
    for r in rows:
        series[r["method"]].append((float(r["sweep_value"]), float(r["fnr"])))
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for method, pts in series.items():
        pts.sort()
        ax.plot([x for x, _ in pts], [y for _, y in pts], marker="o", label=method)
    ax.set_xlabel(axis)
    ax.set_ylabel("FNR")
    ax.set_ylim(-0.02, 1.02)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_methods(rows: list[dict], path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    names = [r["method"] for r in rows]
    ax.bar(names, [float(r["fnr"]) for r in rows], color="tab:blue")
    ax.set_ylabel("FNR")
    ax.set_ylim(0, 1.05)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_history(history: list[dict], path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot([int(h["iteration"]) for h in history], [float(h["fnr"]) for h in history], marker="o")
    ax.set_xlabel("outer iteration")
    ax.set_ylabel("FNR")
    ax.set_ylim(-0.02, 1.02)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_report(out_dir: str | Path) -> list[Path]:
    """Write PNG figures next to the CSVs in ``out_dir``; return their paths."""
    out = Path(out_dir)
    rows = _read(out / "report.csv")
    made = []
    if rows and rows[0]["sweep_axis"]:
        made.append(plot_sweep(rows, out / f"fnr_vs_{rows[0]['sweep_axis']}.png"))
    elif rows:
        made.append(plot_methods(rows, out / "fnr_by_method.png"))
    hist = out / "fnr_history.csv"
    if hist.exists():
        history = _read(hist)
        if history:
            made.append(plot_history(history, out / "fnr_history.png"))
    return made
