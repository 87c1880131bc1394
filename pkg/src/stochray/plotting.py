"""Figure rendering for the CLI report paths.

Every helper writes a PNG next to the delimited output and returns the
path.  All rendering uses the Agg backend so the CLI works headless.
"""

from __future__ import annotations

from pathlib import Path
from typing import Callable, Mapping, Sequence

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .calibrate import MeasurementSet, SweepResult
from .lattice import Lattice
from .montecarlo import RadialHistogram
from .pathloss import PowerResult

__all__ = [
    "plot_curves",
    "plot_collision_profile",
    "plot_lattice",
    "plot_histogram",
    "plot_fit",
    "plot_sweep",
]


def _finish(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_curves(curves: Mapping[str, Sequence[PowerResult]],
                path: str | Path, title: str = "Path loss") -> Path:
    fig, ax = plt.subplots(figsize=(7, 5))
    for label, results in curves.items():
        rs = [pr.r_m for pr in results]
        pl = [pr.path_loss_db for pr in results]
        ax.plot(rs, pl, label=label)
    ax.set_xscale("log")
    ax.set_xlabel("distance r (m)")
    ax.set_ylabel("path loss (dB)")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    return _finish(fig, path)


def plot_collision_profile(profiles: Mapping[str, Sequence[tuple[int, float]]],
                           path: str | Path, r_m: float) -> Path:
    fig, ax = plt.subplots(figsize=(7, 5))
    for label, profile in profiles.items():
        ax.plot([i for i, _ in profile], [q for _, q in profile],
                marker=".", ms=3, label=label)
    ax.set_xlabel("collision count i")
    ax.set_ylabel("density $Q_i(r)$ (1/m$^2$)")
    ax.set_title(f"Ray density vs collision count at r = {r_m:g} m")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    return _finish(fig, path)


def plot_lattice(lattice: Lattice, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 6))
    ext = lattice.extent_m
    ax.imshow(~lattice.occupancy, origin="lower", cmap="gray_r",
              extent=(0, ext, 0, ext), interpolation="nearest")
    s = lattice.spec
    ax.set_title(f"a={s.cell_side_a:g} m, p={s.open_prob_p:g}, "
                 f"N={s.grid_size_N}, seed={s.seed} "
                 f"(open fraction {lattice.realized_open_fraction:.4f})")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    return _finish(fig, path)


def plot_histogram(hist: RadialHistogram, path: str | Path,
                   reference: Callable[[float], float] | None = None,
                   reference_label: str = "analytic") -> Path:
    fig, ax = plt.subplots(figsize=(7, 5))
    edges = np.asarray(hist.bin_edges, dtype=float)
    density = np.asarray(hist.density, dtype=float)
    if not np.isfinite(edges[-1]):
        edges, density = edges[:-1], density[:-1]
    centers = 0.5 * (edges[:-1] + edges[1:])
    ax.bar(centers, density, width=np.diff(edges), alpha=0.4,
           label="empirical")
    if reference is not None:
        grid = np.linspace(edges[0] + 1e-9, edges[-1], 400)
        ax.plot(grid, [reference(g) for g in grid], "--",
                label=reference_label)
    ax.set_xlabel("r (m)")
    ax.set_ylabel("density (1/m$^2$)")
    ax.set_title(f"Radial density, {hist.n_samples} samples "
                 f"(escape fraction {hist.escape_fraction:.3f})")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    return _finish(fig, path)


def plot_fit(measured: MeasurementSet,
             predictions: Mapping[str, Sequence[float]],
             path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 5))
    ax.scatter(measured.distances, measured.path_loss_db, s=18,
               facecolors="none", edgecolors="k", label="measured")
    for label, pred in predictions.items():
        ax.plot(measured.distances, pred, label=label)
    ax.set_xscale("log")
    ax.set_xlabel("distance r (m)")
    ax.set_ylabel("path loss (dB)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    return _finish(fig, path)


def plot_sweep(sweep: SweepResult, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 5))
    rs = list(sweep.r_grid)
    ax.plot(rs, [pr.path_loss_db for pr in sweep.base], "k-", lw=2,
            label="base")
    for label, curve in sorted(sweep.variants.items()):
        ax.plot(rs, [pr.path_loss_db for pr in curve], "--", lw=1,
                label=label)
    ax.set_xscale("log")
    ax.set_xlabel("distance r (m)")
    ax.set_ylabel("path loss (dB)")
    devs = ", ".join(f"{k}: {v:.2f} dB"
                     for k, v in sorted(sweep.max_deviation_db.items()))
    ax.set_title(f"Sensitivity (max deviation {devs})")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    return _finish(fig, path)
