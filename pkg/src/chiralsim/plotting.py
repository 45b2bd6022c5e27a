"""Deterministic SVG rendering of result tables."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "chiralsim"
    matplotlib.rcParams["svg.fonttype"] = "path"
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    fig.clf()
    return path


def render_line(x, ys: dict, path, xlabel: str = "", ylabel: str = "", title: str = "") -> Path:
    """Line plot of one or more series sharing ``x``."""
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        raise DomainError("a line plot needs at least two points")
    if not ys:
        raise DomainError("nothing to plot")
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for label, y in ys.items():
        ax.plot(x, np.asarray(y, dtype=float), label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    out = _save(fig, path)
    plt.close(fig)
    return out


def render_heatmap(x, y, z, path, xlabel: str = "", ylabel: str = "", zlabel: str = "",
                   marker=None) -> Path:
    """Heatmap of ``z[i_y, i_x]``; ``marker`` is an optional ``(x, y)`` point."""
    x, y, z = np.asarray(x, float), np.asarray(y, float), np.asarray(z, float)
    if z.size == 0 or len(x) < 2 or len(y) < 2:
        raise DomainError("a heatmap needs at least a 2x2 grid")
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 4))
    mesh = ax.pcolormesh(x, y, z, shading="nearest")
    fig.colorbar(mesh, ax=ax, label=zlabel)
    if marker is not None:
        ax.plot([marker[0]], [marker[1]], "o", mfc="white", mec="black", label="current device")
        ax.legend()
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    out = _save(fig, path)
    plt.close(fig)
    return out


def render_plot(table, kind: str, path, x: str, y: Sequence[str] = (), z: Sequence[str] = (),
                marker=None) -> list:
    """Render a :class:`~chiralsim.sweeps.SweepResult`-like table.

    ``kind="line"`` draws every column in ``y`` against ``x`` into ``path``.
    ``kind="heatmap"`` uses ``x`` and ``y[0]`` as axes and writes one file
    per metric in ``z`` named ``<stem>_<metric>.svg``.
    """
    if not table.rows:
        raise DomainError("empty table")
    path = Path(path)
    if kind == "line":
        return [render_line(table.column(x), {name: table.column(name) for name in y}, path, xlabel=x)]
    if kind == "heatmap":
        xs = np.unique(table.column(x))
        ys = np.unique(table.column(y[0]))
        out = []
        for metric in z:
            grid = np.full((len(ys), len(xs)), np.nan)
            for xv, yv, zv in zip(table.column(x), table.column(y[0]), table.column(metric)):
                grid[np.searchsorted(ys, yv), np.searchsorted(xs, xv)] = zv
            out.append(render_heatmap(xs, ys, grid, path.with_name(f"{path.stem}_{metric}.svg"),
                                      x, y[0], metric, marker))
        return out
    raise DomainError(f"unknown plot kind {kind!r}")
