"""Output persistence: CSV tables, run manifests, optional figures.

Every run writes a manifest (command, full configuration, seeds, library
version) next to its outputs, so a JSON or CSV artifact can be reproduced
byte for byte from the manifest alone. Floats in CSV are printed with 17
significant digits (lossless double round-trip).

Figures are a convenience layer on the same data: when requested, each
table-producing command also renders a matplotlib PNG alongside the CSV.
The CSV remains the contract; plots never carry information absent from it.
"""

from __future__ import annotations

import csv
import json
from importlib import metadata
from pathlib import Path


def library_version() -> str:
    try:
        return metadata.version("qfcert")
    except metadata.PackageNotFoundError:
        return "unversioned"


def fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def write_json(path, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_manifest(out_dir, command: str, config: dict) -> Path:
    payload = {
        "command": command,
        "config": config,
        "library_version": library_version(),
        "schema_version": 1,
    }
    return write_json(Path(out_dir) / "manifest.json", payload)


def read_manifest(out_dir) -> dict:
    with open(Path(out_dir) / "manifest.json") as fh:
        return json.load(fh)


def render_lines(path, x, series: dict, xlabel: str, ylabel: str, logy: bool = False) -> Path:
    """One PNG with a line per series; tiny wrapper kept import-light."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for label, ys in series.items():
        ax.plot(x, ys, marker="o", markersize=3, linewidth=1.2, label=label)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    if len(series) > 1:
        ax.legend(fontsize=8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
