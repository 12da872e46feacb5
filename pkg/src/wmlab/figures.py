"""Matplotlib rendering of run reports.

The CSV/JSONL files are the normative outputs; these figures are the
plot-ready view of the same tables, written as PNGs next to them.
"""

from __future__ import annotations

import csv
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _read_matrix(path):
    """Parse a matrix_{Q,W}.csv into per-scheme (rows, cols, values)."""
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        cols = header[2:]
        per_scheme: dict = {}
        for row in reader:
            scheme, first = row[0], row[1]
            rows, grid = per_scheme.setdefault(scheme, ([], []))
            rows.append(first)
            grid.append([float(v) if v else np.nan for v in row[2:]])
    return cols, per_scheme


def render_matrix_heatmaps(matrix_csv: str, out_dir: str, metric_name: str) -> list:
    cols, per_scheme = _read_matrix(matrix_csv)
    written = []
    for scheme, (rows, grid) in per_scheme.items():
        values = np.asarray(grid, dtype=float)
        if values.size == 0 or np.all(np.isnan(values)):
            continue
        fig, ax = plt.subplots(figsize=(max(6, 0.55 * len(cols)), max(4, 0.45 * len(rows))))
        im = ax.imshow(values, cmap="viridis", vmin=0.0, vmax=1.0, aspect="auto")
        ax.set_xticks(range(len(cols)), cols, rotation=45, ha="right", fontsize=7)
        ax.set_yticks(range(len(rows)), rows, fontsize=7)
        ax.set_xlabel("second attack")
        ax.set_ylabel("first attack")
        ax.set_title(f"{metric_name} — {scheme}")
        for i in range(values.shape[0]):
            for j in range(values.shape[1]):
                if not np.isnan(values[i, j]):
                    ax.text(j, i, f"{values[i, j]:.2f}", ha="center", va="center", fontsize=6,
                            color="white" if values[i, j] < 0.55 else "black")
        fig.colorbar(im, ax=ax, shrink=0.8)
        fig.tight_layout()
        path = os.path.join(out_dir, f"{metric_name}_{scheme}.png")
        fig.savefig(path, dpi=130)
        plt.close(fig)
        written.append(path)
    return written


def render_single_attack_bars(scenarios_csv: str, out_dir: str) -> list:
    """Grouped W bars per scheme over single-attack scenarios."""
    rows = []
    with open(scenarios_csv, encoding="utf-8", newline="") as f:
        for row in csv.DictReader(f):
            if "+" not in row["attack_chain"]:
                rows.append(row)
    schemes = sorted({r["scheme"] for r in rows})
    chains = []
    for r in rows:
        if r["attack_chain"] not in chains:
            chains.append(r["attack_chain"])
    if not rows:
        return []
    written = []
    for metric, label in (("W", "watermark rate"), ("Q", "quality")):
        fig, ax = plt.subplots(figsize=(max(7, 0.5 * len(chains) * max(1, len(schemes)) * 0.3), 4.2))
        width = 0.8 / max(1, len(schemes))
        x = np.arange(len(chains))
        for k, scheme in enumerate(schemes):
            vals = []
            for chain in chains:
                hit = [r for r in rows if r["scheme"] == scheme and r["attack_chain"] == chain]
                vals.append(float(hit[0][metric]) if hit else np.nan)
            ax.bar(x + k * width, vals, width, label=scheme)
        ax.set_xticks(x + 0.4 - width / 2, chains, rotation=45, ha="right", fontsize=7)
        ax.set_ylim(0, 1.05)
        ax.set_ylabel(label)
        ax.set_title(f"single-attack {label}")
        ax.legend(fontsize=7)
        fig.tight_layout()
        path = os.path.join(out_dir, f"single_attack_{metric}.png")
        fig.savefig(path, dpi=130)
        plt.close(fig)
        written.append(path)
    return written


def render_timings(timings_csv: str, out_dir: str) -> list:
    rows = []
    with open(timings_csv, encoding="utf-8", newline="") as f:
        for row in csv.DictReader(f):
            if row["attack_chain"] == "none":
                rows.append(row)
    if not rows:
        return []
    schemes = [r["scheme"] for r in rows]
    inject = [float(r["inject_s"]) for r in rows]
    detect = [float(r["detect_s"]) for r in rows]
    x = np.arange(len(schemes))
    fig, ax = plt.subplots(figsize=(max(6, 0.8 * len(schemes)), 4))
    ax.bar(x - 0.2, inject, 0.4, label="injection")
    ax.bar(x + 0.2, detect, 0.4, label="detection")
    ax.set_xticks(x, schemes, rotation=30, ha="right")
    ax.set_ylabel("wall-clock seconds (dataset total)")
    ax.set_title("scheme efficiency")
    ax.legend()
    fig.tight_layout()
    path = os.path.join(out_dir, "timings.png")
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return [path]


def render_imperceptibility(imp_csv: str, out_dir: str) -> list:
    rows = []
    with open(imp_csv, encoding="utf-8", newline="") as f:
        rows = list(csv.DictReader(f))
    if not rows:
        return []
    schemes = [r["scheme"] for r in rows]
    rates = [float(r["flag_rate"]) for r in rows]
    fig, ax = plt.subplots(figsize=(max(6, 0.8 * len(schemes)), 4))
    ax.bar(schemes, rates, color="slateblue")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("classifier flag rate (lower = more imperceptible)")
    ax.set_title("imperceptibility probe")
    plt.setp(ax.get_xticklabels(), rotation=30, ha="right")
    fig.tight_layout()
    path = os.path.join(out_dir, "imperceptibility.png")
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return [path]


def render_all(run_dir: str) -> list:
    """Render every figure a run's tables support into run_dir/figures/."""
    fig_dir = os.path.join(run_dir, "figures")
    os.makedirs(fig_dir, exist_ok=True)
    written = []
    scen = os.path.join(run_dir, "scenarios.csv")
    if os.path.exists(scen):
        written += render_single_attack_bars(scen, fig_dir)
    for metric, fname in (("Q", "matrix_Q.csv"), ("W", "matrix_W.csv")):
        path = os.path.join(run_dir, fname)
        if os.path.exists(path):
            written += render_matrix_heatmaps(path, fig_dir, metric)
    timings = os.path.join(run_dir, "timings.csv")
    if os.path.exists(timings):
        written += render_timings(timings, fig_dir)
    imp = os.path.join(run_dir, "imperceptibility.csv")
    if os.path.exists(imp):
        written += render_imperceptibility(imp, fig_dir)
    return written
