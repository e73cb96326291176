"""Deterministic experiment outputs: CSV tables, manifests, figures.

CSV cells are written with shortest round-trip float formatting and no
environment-dependent content, so rerunning a config reproduces the
bytes exactly.  The manifest records what produced the table: config
hash, parameter ranges, tolerances, package and library versions, and
the hash of every CSV written.  Figures are rendered alongside the
tables as plain PNG; they are presentation copies of the CSV content,
never the primary record.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from pathlib import Path

import numpy as np

__all__ = [
    "format_cell",
    "write_csv",
    "hash_file",
    "write_manifest",
    "line_figure",
    "nodal_figure",
    "contour_figure",
]


def format_cell(x) -> str:
    """Shortest exact decimal for floats; plain str for everything else."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        v = float(x)
        if np.isnan(v):
            return "nan"
        return repr(v)
    return str(x)


def write_csv(path, rows, columns) -> Path:
    """Write rows (dicts) under a fixed column order; returns the path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_cell(row.get(c, "")) for c in columns])
    path.write_text(buf.getvalue())
    return path


def hash_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(
    out_dir,
    kind: str,
    config_text: str,
    parameters: dict,
    outputs,
    tolerances: dict | None = None,
    error: str | None = None,
) -> Path:
    """JSON manifest with sorted keys; no timestamps, rerun-stable."""
    import matplotlib
    import scipy

    from . import __version__

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "kind": kind,
        "config_sha256": hashlib.sha256(config_text.encode()).hexdigest(),
        "parameters": {k: format_cell(v) for k, v in sorted(parameters.items())},
        "tolerances": {k: format_cell(v) for k, v in sorted((tolerances or {}).items())},
        "outputs": {Path(p).name: hash_file(p) for p in outputs},
        "versions": {
            "nodal-lab": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "matplotlib": matplotlib.__version__,
        },
    }
    if error is not None:
        manifest["error"] = error
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _agg_figure():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    return plt


def line_figure(
    path,
    series,
    xlabel: str,
    ylabel: str,
    logx: bool = False,
    logy: bool = False,
    title: str | None = None,
) -> Path:
    """One set of labeled lines; ``series`` is {label: (xs, ys)}."""
    plt = _agg_figure()
    fig, ax = plt.subplots(figsize=(5.0, 3.6), dpi=130)
    for label, (xs, ys) in series.items():
        ax.plot(xs, ys, marker="o", markersize=3.5, linewidth=1.2, label=label)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title, fontsize=10)
    if len(series) > 1:
        ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    return path


def nodal_figure(path, nd, points=None, title: str | None = None) -> Path:
    """Nodal polylines of a decomposition, plus optional marked points."""
    plt = _agg_figure()
    fig, ax = plt.subplots(figsize=(4.4, 4.4), dpi=130)
    theta = np.linspace(0.0, 2.0 * np.pi, 256)
    R = nd.mesh.radius
    ax.plot(R * np.cos(theta), R * np.sin(theta), color="0.6", linewidth=0.8)
    for line in nd.polylines:
        ax.plot(line[:, 0], line[:, 1], color="tab:blue", linewidth=1.2)
    for s in nd.singular_points:
        ax.plot(*s.location, marker="x", color="tab:red", markersize=7)
    if points is not None:
        pts = np.atleast_2d(points)
        ax.plot(pts[:, 0], pts[:, 1], "o", color="tab:green", markersize=5)
    ax.set_aspect("equal")
    if title:
        ax.set_title(title, fontsize=10)
    ax.grid(True, alpha=0.25)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    return path


def contour_figure(path, mesh, values, title: str | None = None) -> Path:
    """Filled contours of a vertex field on a triangulated mesh."""
    plt = _agg_figure()
    import matplotlib.tri as mtri

    tri = mtri.Triangulation(mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.triangles)
    fig, ax = plt.subplots(figsize=(4.8, 4.0), dpi=130)
    vals = np.asarray(values, dtype=float)
    cs = ax.tricontourf(tri, vals, levels=21, cmap="RdBu_r")
    fig.colorbar(cs, ax=ax, shrink=0.85)
    ax.set_aspect("equal")
    if title:
        ax.set_title(title, fontsize=10)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    return path
