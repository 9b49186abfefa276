"""Report writers: delimited tables, JSON payloads, and figures.

Every CLI command emits four files into the output directory:

* ``<name>.csv``   - the table, 6 significant digits, with the config
  hash and deterministic diagnostics as ``#`` comment lines;
* ``<name>.json``  - the same data at full double precision;
* ``<name>.png``   - a rendered figure of the table;
* ``<name>.diag.json`` - diagnostics including wall time.

CSV and JSON are byte-identical across reruns with the same config and
flags; wall time lives only in the sidecar so that holds.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

plt.rcParams.update({"figure.dpi": 110, "axes.grid": True, "grid.alpha": 0.3})


def fmt6(value) -> str:
    """Render a number with 6 significant digits; strings pass through."""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.6g}"


def config_hash(cfg) -> str:
    """Stable short hash of a canonicalized config document."""
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def write_csv(path, header, rows, diagnostics=None) -> None:
    with open(path, "w", newline="") as fh:
        if diagnostics:
            for key in sorted(diagnostics):
                fh.write(f"# {key}: {diagnostics[key]}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt6(x) for x in row])


def write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_diagnostics(path, diagnostics) -> None:
    with open(path, "w") as fh:
        json.dump(diagnostics, fh, indent=2, sort_keys=True)
        fh.write("\n")


def save_figure(fig, path) -> None:
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)


def line_figure(path, x_label, y_label, title, series) -> None:
    """One axes with labeled line series: ``{label: (x, y)}``."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, (x, y) in series.items():
        ax.plot(x, y, marker="o", markersize=3, label=label)
    ax.set_xlabel(x_label)
    ax.set_ylabel(y_label)
    ax.set_title(title)
    if len(series) > 1:
        ax.legend()
    save_figure(fig, path)


def greeks_figure(path, levels, panels, title) -> None:
    """Three stacked panels (delta, gamma, vega), one line per maturity."""
    fig, axes = plt.subplots(3, 1, figsize=(7, 9), sharex=True)
    for ax, (name, by_maturity) in zip(axes, panels.items()):
        for label, values in by_maturity.items():
            ax.plot(levels, values, label=label)
        ax.set_ylabel(name)
    axes[0].set_title(title)
    axes[0].legend()
    axes[-1].set_xlabel("spot level")
    save_figure(fig, path)


def pdf_figure(path, x, weights, x_label, title, width=None) -> None:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    if width is None:
        width = 0.8 * float(np.min(np.diff(x))) if len(x) > 1 else 1.0
    ax.bar(x, weights, width=width, align="edge")
    ax.set_xlabel(x_label)
    ax.set_ylabel("probability")
    ax.set_title(title)
    save_figure(fig, path)


def joint_figure(path, levels, sigma_vols, density, title) -> None:
    """Heatmap of the joint (spot, realized volatility) density."""
    fig, ax = plt.subplots(figsize=(7, 5))
    mesh = ax.pcolormesh(levels, sigma_vols, density, shading="auto", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label="probability")
    ax.set_xlabel("spot level")
    ax.set_ylabel("realized volatility (%)")
    ax.set_title(title)
    save_figure(fig, path)


def bars_figure(path, group_labels, series, y_label, title) -> None:
    """Grouped bars: ``series = {label: [value per group]}``."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    n_series = len(series)
    x = np.arange(len(group_labels), dtype=float)
    width = 0.8 / max(n_series, 1)
    for i, (label, values) in enumerate(series.items()):
        ax.bar(x + (i - (n_series - 1) / 2) * width, values, width, label=label)
    ax.set_xticks(x)
    ax.set_xticklabels(group_labels)
    ax.set_ylabel(y_label)
    ax.set_title(title)
    ax.legend()
    save_figure(fig, path)


def report_paths(out_dir, name: str) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return {
        "csv": out / f"{name}.csv",
        "json": out / f"{name}.json",
        "png": out / f"{name}.png",
        "diag": out / f"{name}.diag.json",
    }
