"""Deterministic figure rendering from simulation CSV files.

Three kinds are supported: ``heatmap`` (metric over the cycle x swept-value
plane with optional white transition overlays), ``lines`` (three stacked
panels of energies, heats, and charging speeds along one trajectory), and
``portrait`` (operating-mode regions on an (alpha, eta) grid).  Every visual
choice — colormap, dpi, figure geometry — is fixed so re-rendering the same
inputs produces byte-identical images.  All curves and overlays come straight
from CSV columns; nothing is recomputed here.
"""

from __future__ import annotations

from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import io

DPI = 150
HEAT_CMAP = "viridis"
KINDS = ("heatmap", "lines", "portrait")

# fixed region colors, keyed by the mode strings the portrait CSV uses
MODE_COLORS = {
    "engine": "#3a6fb0",
    "refrigerator": "#4daf7c",
    "fail_emit_cold": "#e8a33d",
    "fail_emit_both": "#c95d4a",
}

TRAJ_COLUMNS = ("cycle", "q_hot", "q_cold", "work", "e_battery",
                "ergotropy", "erg_incoherent", "erg_coherent",
                "speed_e", "speed_erg")


@dataclass(frozen=True)
class PlotSpec:
    """What to draw: input CSVs, figure kind, and the output image path.

    ``csv_paths`` order matters: the first file carries the data; for
    heatmap/lines an optional second file with n_star/n_hash columns adds
    the transition overlays.
    """

    csv_paths: tuple
    kind: str
    out_path: str
    metric: str = "e_battery"
    dpi: int = DPI

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; use {KINDS}")
        if not self.csv_paths:
            raise ValueError("need at least one input CSV")


def render(spec: PlotSpec) -> str:
    """Draw the figure described by ``spec`` and return the image path."""
    fig = {
        "heatmap": _render_heatmap,
        "lines": _render_lines,
        "portrait": _render_portrait,
    }[spec.kind](spec)
    fig.savefig(spec.out_path, dpi=spec.dpi)
    plt.close(fig)
    return spec.out_path


def _read_overlay(path):
    cols = io.read_columns(path)
    io.require_columns(cols, ("n_star", "n_hash"), path)
    axis_name = next(iter(cols))
    return cols[axis_name], cols["n_star"], cols["n_hash"]


# ------------------------------------------------------------------- heatmap


def _grid(cols, axis_name, metric, path):
    axis_vals = io.unique_in_order(cols[axis_name])
    cycles = io.unique_in_order(cols["cycle"])
    if len(cols["cycle"]) != len(axis_vals) * len(cycles):
        raise ValueError(f"{path}: ragged grid — {len(cols['cycle'])} rows "
                         f"for {len(axis_vals)} x {len(cycles)} points")
    grid = np.full((len(axis_vals), len(cycles)), np.nan)
    index = {(a, c): k for k, (a, c) in
             enumerate(zip(cols[axis_name], cols["cycle"]))}
    if len(index) != len(cols["cycle"]):
        raise ValueError(f"{path}: duplicate (axis, cycle) rows")
    for i, a in enumerate(axis_vals):
        for j, c in enumerate(cycles):
            grid[i, j] = cols[metric][index[(a, c)]]
    return np.asarray(axis_vals, dtype=float), np.asarray(cycles, dtype=float), grid


def _render_heatmap(spec):
    path = spec.csv_paths[0]
    cols = io.read_columns(path)
    axis_name = next(iter(cols))
    io.require_columns(cols, ("cycle", spec.metric), path)
    if axis_name == "cycle":
        raise ValueError(f"{path}: heatmaps need a swept-value column before "
                         "'cycle' (sweep output, not a single trajectory)")
    axis_vals, cycles, grid = _grid(cols, axis_name, spec.metric, path)

    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    mesh = ax.pcolormesh(cycles, axis_vals, grid, cmap=HEAT_CMAP,
                         shading="nearest")
    fig.colorbar(mesh, ax=ax, label=spec.metric)
    if len(spec.csv_paths) > 1:
        ov_axis, n_star, n_hash = _read_overlay(spec.csv_paths[1])
        _overlay_curve(ax, ov_axis, n_star, "solid")
        _overlay_curve(ax, ov_axis, n_hash, "dashed")
    ax.set_xlabel("cycle")
    ax.set_ylabel(axis_name)
    fig.tight_layout()
    return fig


def _overlay_curve(ax, axis_vals, crossings, style):
    pts = [(c, a) for a, c in zip(axis_vals, crossings) if c is not None]
    if pts:
        xs, ys = zip(*sorted(pts, key=lambda p: p[1]))
        ax.plot(xs, ys, color="white", linestyle=style, linewidth=1.6)


# --------------------------------------------------------------------- lines


def _trajectory_columns(spec):
    path = spec.csv_paths[0]
    cols = io.read_columns(path)
    first = next(iter(cols))
    if first != "cycle":
        # single-point sweep output: one leading swept-value column
        values = set(cols[first])
        if len(values) != 1:
            raise ValueError(f"{path}: line plots need a single trajectory; "
                             f"column {first!r} has {len(values)} values")
        cols.pop(first)
    io.require_columns(cols, TRAJ_COLUMNS, path)
    return cols


def _render_lines(spec):
    cols = _trajectory_columns(spec)
    n = np.asarray(cols["cycle"], dtype=float)

    fig, axes = plt.subplots(3, 1, sharex=True, figsize=(6.0, 7.0))
    top, mid, bot = axes
    top.plot(n, cols["e_battery"], color="#3a6fb0", label="battery energy")
    top.plot(n, cols["ergotropy"], color="#c95d4a", label="ergotropy")
    top.plot(n, cols["erg_incoherent"], color="#c95d4a", linestyle="dashed",
             label="incoherent part")
    top.plot(n, cols["erg_coherent"], color="#c95d4a", linestyle="dotted",
             label="coherent part")
    top.set_ylabel("energy")
    top.legend(loc="best", fontsize=8)

    mid.plot(n, cols["q_hot"], color="#c95d4a", label="hot heat")
    mid.plot(n, cols["q_cold"], color="#3a6fb0", label="cold heat")
    mid.plot(n, cols["work"], color="#4d4d4d", label="work")
    mid.axhline(0.0, color="black", linewidth=0.6)
    mid.set_ylabel("per-cycle energy flow")
    mid.legend(loc="best", fontsize=8)

    bot.plot(n, cols["speed_e"], color="#3a6fb0", label="energy gain rate")
    bot.plot(n, cols["speed_erg"], color="#c95d4a", label="ergotropy gain rate")
    bot.axhline(0.0, color="black", linewidth=0.6)
    bot.set_ylabel("per-cycle change")
    bot.set_xlabel("cycle")
    bot.legend(loc="best", fontsize=8)

    if len(spec.csv_paths) > 1:
        _, n_star, n_hash = _read_overlay(spec.csv_paths[1])
        for ax in axes:
            for val, style in ((n_star, "solid"), (n_hash, "dashed")):
                for v in val:
                    if v is not None:
                        ax.axvline(v, color="black", linestyle=style,
                                   linewidth=0.9)
    fig.tight_layout()
    return fig


# ------------------------------------------------------------------ portrait


def _render_portrait(spec):
    path = spec.csv_paths[0]
    cols = io.read_columns(path)
    io.require_columns(cols, ("alpha", "eta", "mode"), path)
    alphas = io.unique_in_order(cols["alpha"])
    etas = io.unique_in_order(cols["eta"])
    if len(cols["alpha"]) != len(alphas) * len(etas):
        raise ValueError(f"{path}: ragged grid — {len(cols['alpha'])} rows "
                         f"for {len(alphas)} x {len(etas)} points")

    modes = sorted(set(cols["mode"]))
    unknown = [m for m in modes if m not in MODE_COLORS]
    if unknown:
        raise ValueError(f"{path}: unknown modes {unknown}")
    code = {m: i for i, m in enumerate(modes)}
    grid = np.empty((len(etas), len(alphas)))
    k = 0
    for i, _ in enumerate(alphas):      # rows are written alpha-major
        for j, _ in enumerate(etas):
            grid[j, i] = code[cols["mode"][k]]
            k += 1

    from matplotlib.colors import ListedColormap

    fig, ax = plt.subplots(figsize=(5.4, 4.2))
    cmap = ListedColormap([MODE_COLORS[m] for m in modes])
    ax.pcolormesh(np.asarray(alphas, float), np.asarray(etas, float), grid,
                  cmap=cmap, shading="nearest",
                  vmin=-0.5, vmax=len(modes) - 0.5)
    if len(modes) > 1:
        # region boundary straight from the data: contour between mode codes
        ax.contour(np.asarray(alphas, float), np.asarray(etas, float), grid,
                   levels=np.arange(len(modes) - 1) + 0.5, colors="black",
                   linewidths=1.2)
    handles = [plt.Rectangle((0, 0), 1, 1, color=MODE_COLORS[m]) for m in modes]
    ax.legend(handles, modes, loc="upper right", fontsize=8)
    ax.set_xlabel("transition probability")
    ax.set_ylabel("temperature-weighted splitting ratio")
    fig.tight_layout()
    return fig
