"""Monte Carlo validation of the analytic densities and power models.

Rays are traced generatively: straight flight through open cells, located by
exact cell-stepping (no floating-point raymarching), followed by diffuse
re-radiation from the obstacle face it hit (uniform angle over the open
half-plane of the face).  Per collision the ray's power weight is multiplied
by 10**(-L/10), with L either fixed or drawn per collision.  Rays leaving
the finite grid are dropped from position statistics; the escape rate is
always reported.

An obstacle-free override, :class:`FixedStepWalk`, replaces the lattice by
an isotropic walk with fixed step length.  Its position density after many
steps converges to the random-walk ray density, which is what the
large-count validation tests exercise.

Determinism: rays are partitioned into fixed-size chunks; chunk k draws from
PCG64 seeded with SeedSequence(seed, spawn_key=(k,)).  Chunk results are
reduced in index order, so estimates are reproducible regardless of how the
chunks would be scheduled.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence, Union

import numpy as np
from scipy import stats as _stats

from .errors import DomainError, InsufficientSamples, SourceInClosedCell
from .lattice import Lattice

__all__ = [
    "DeterministicLoss",
    "UniformLoss",
    "FixedStepWalk",
    "SimConfig",
    "RayTerminal",
    "RayTrace",
    "RadialHistogram",
    "PowerEstimate",
    "GofResult",
    "trace_ray",
    "collision_radii",
    "empirical_collision_density",
    "empirical_power",
    "mean_free_path",
    "goodness_of_fit",
    "nearest_open_cell_center",
    "write_histogram_csv",
    "write_power_estimates_csv",
]


@dataclass(frozen=True)
class DeterministicLoss:
    """Fixed per-collision reflection loss in dB."""
    loss_db: float


@dataclass(frozen=True)
class UniformLoss:
    """Per-collision reflection loss drawn uniformly from [low_db, high_db]."""
    low_db: float
    high_db: float

    def __post_init__(self):
        if self.high_db < self.low_db:
            raise DomainError("UniformLoss requires high_db >= low_db")


LossModel = Union[DeterministicLoss, UniformLoss]


@dataclass(frozen=True)
class FixedStepWalk:
    """Obstacle-free medium: every flight has the same length and every
    step counts as a collision."""
    step_m: float

    def __post_init__(self):
        if not self.step_m > 0:
            raise DomainError("step_m must be positive")


Medium = Union[Lattice, FixedStepWalk]


@dataclass(frozen=True)
class SimConfig:
    n_rays: int
    max_collisions: int
    seed: int = 42
    loss_model: LossModel = field(default_factory=lambda: DeterministicLoss(3.0))
    chunk_size: int = 4096
    max_rel_ci: float = 0.5

    def __post_init__(self):
        if self.n_rays < 1:
            raise DomainError("n_rays must be at least 1")
        if self.max_collisions < 1:
            raise DomainError("max_collisions must be at least 1")
        if self.chunk_size < 1:
            raise DomainError("chunk_size must be at least 1")


class RayTerminal(Enum):
    ESCAPED = "escaped"
    MAX_COLLISIONS = "max_collisions"
    ABSORBED = "absorbed"   # reserved; the diffuse tracer never absorbs


@dataclass(frozen=True)
class RayTrace:
    """Collision points of a single traced ray, in order."""
    collision_points: list[tuple[float, float]]
    collision_count: int
    terminal: RayTerminal


@dataclass(frozen=True)
class RadialHistogram:
    """Per-area density of ray positions at a fixed collision count."""
    bin_edges: np.ndarray
    counts: np.ndarray
    density: np.ndarray          # counts / (n_samples * annulus area)
    n_samples: int
    escape_fraction: float


@dataclass(frozen=True)
class PowerEstimate:
    power_w: float
    stderr: float
    ci95: tuple[float, float]
    n_rays: int
    annulus_r: float
    annulus_dr: float
    escape_fraction: float


@dataclass(frozen=True)
class GofResult:
    statistic: float
    dof: int
    p_value: float


# ---------------------------------------------------------------------------
# geometry helpers
# ---------------------------------------------------------------------------

def _cell_of(point: tuple[float, float], a: float) -> tuple[int, int]:
    return int(math.floor(point[0] / a)), int(math.floor(point[1] / a))


def _require_open_source(lattice: Lattice, source: tuple[float, float]) -> None:
    n = lattice.spec.grid_size_N
    a = lattice.spec.cell_side_a
    ix, iy = _cell_of(source, a)
    if not (0 <= ix < n and 0 <= iy < n):
        raise SourceInClosedCell(f"source {source} lies outside the grid")
    if not lattice.is_open(ix, iy):
        raise SourceInClosedCell(f"source {source} lies in a closed cell")


def nearest_open_cell_center(lattice: Lattice,
                             point: tuple[float, float] | None = None
                             ) -> tuple[float, float]:
    """Center of the open cell nearest to ``point`` (grid center by default),
    scanning outward ring by ring in a fixed order."""
    n = lattice.spec.grid_size_N
    a = lattice.spec.cell_side_a
    if point is None:
        point = (n * a / 2.0, n * a / 2.0)
    cx = min(max(int(point[0] // a), 0), n - 1)
    cy = min(max(int(point[1] // a), 0), n - 1)
    for radius in range(n):
        for iy in range(cy - radius, cy + radius + 1):
            for ix in range(cx - radius, cx + radius + 1):
                if max(abs(ix - cx), abs(iy - cy)) != radius:
                    continue
                if 0 <= ix < n and 0 <= iy < n and lattice.is_open(ix, iy):
                    return ((ix + 0.5) * a, (iy + 0.5) * a)
    raise DomainError("lattice has no open cell")


# ---------------------------------------------------------------------------
# single-ray tracer
# ---------------------------------------------------------------------------

def trace_ray(lattice: Lattice, source: tuple[float, float],
              rng: np.random.Generator,
              max_collisions: int = 100) -> RayTrace:
    """Trace one ray: departure at a uniform angle, straight flights located
    by exact cell stepping, diffuse re-radiation at each obstacle face."""
    _require_open_source(lattice, source)
    a = lattice.spec.cell_side_a
    n = lattice.spec.grid_size_N
    cx, cy = _cell_of(source, a)
    px, py = float(source[0]), float(source[1])
    theta = rng.uniform(0.0, 2.0 * math.pi)
    dx, dy = math.cos(theta), math.sin(theta)
    points: list[tuple[float, float]] = []
    while True:
        sx = 1 if dx > 0 else -1
        sy = 1 if dy > 0 else -1
        tx = ((cx + (dx > 0)) * a - px) / dx if dx != 0.0 else math.inf
        ty = ((cy + (dy > 0)) * a - py) / dy if dy != 0.0 else math.inf
        if tx <= ty:
            t, ncx, ncy, axis = tx, cx + sx, cy, 0
        else:
            t, ncx, ncy, axis = ty, cx, cy + sy, 1
        px += dx * t
        py += dy * t
        if not (0 <= ncx < n and 0 <= ncy < n):
            return RayTrace(points, len(points), RayTerminal.ESCAPED)
        if lattice.is_open(ncx, ncy):
            cx, cy = ncx, ncy
            continue
        points.append((px, py))
        if len(points) >= max_collisions:
            return RayTrace(points, len(points), RayTerminal.MAX_COLLISIONS)
        # outward normal of the hit face points back into the open cell
        nx = -sx if axis == 0 else 0
        ny = -sy if axis == 1 else 0
        while True:
            phi = rng.uniform(0.0, 2.0 * math.pi)
            dx, dy = math.cos(phi), math.sin(phi)
            if dx * nx + dy * ny > 0.0:
                break


# ---------------------------------------------------------------------------
# chunked batch engine
# ---------------------------------------------------------------------------

# visit(ray_ids, collision_index, positions, weights, segment_lengths) is
# called once per collision-event batch; ray_ids are global ray indices.
Visitor = Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray], None]


def _loss_weights(loss_model: LossModel, rng: np.random.Generator,
                  n: int) -> np.ndarray:
    if isinstance(loss_model, DeterministicLoss):
        return np.full(n, 10.0 ** (-loss_model.loss_db / 10.0))
    losses = rng.uniform(loss_model.low_db, loss_model.high_db, n)
    return 10.0 ** (-losses / 10.0)


def _resample_half_plane(rng: np.random.Generator,
                         normals: np.ndarray) -> np.ndarray:
    """Uniform angles rejected against the blocked half-plane."""
    m = len(normals)
    out = np.zeros((m, 2))
    need = np.ones(m, dtype=bool)
    while need.any():
        theta = rng.uniform(0.0, 2.0 * math.pi, int(need.sum()))
        cand = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        ok = (cand * normals[need]).sum(axis=1) > 0.0
        rows = np.flatnonzero(need)[ok]
        out[rows] = cand[ok]
        need[rows] = False
    return out


def _trace_lattice_chunk(lattice: Lattice, source: tuple[float, float],
                         rng: np.random.Generator, n: int,
                         config: SimConfig, id_offset: int,
                         visit: Visitor) -> tuple[np.ndarray, np.ndarray]:
    a = lattice.spec.cell_side_a
    grid_n = lattice.spec.grid_size_N
    open_grid = lattice.occupancy
    pos = np.tile(np.asarray(source, dtype=float), (n, 1))
    theta = rng.uniform(0.0, 2.0 * math.pi, n)
    dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    cell = np.tile(np.array(_cell_of(source, a), dtype=np.int64), (n, 1))
    ncoll = np.zeros(n, dtype=np.int64)
    weights = np.ones(n)
    last_pos = pos.copy()
    active = np.ones(n, dtype=bool)
    escaped = np.zeros(n, dtype=bool)
    while active.any():
        idx = np.flatnonzero(active)
        p = pos[idx]
        d = dirs[idx]
        c = cell[idx]
        step = np.where(d > 0, 1, -1).astype(np.int64)
        next_x = (c[:, 0] + (d[:, 0] > 0)) * a
        next_y = (c[:, 1] + (d[:, 1] > 0)) * a
        with np.errstate(divide="ignore", invalid="ignore"):
            tx = np.where(d[:, 0] != 0, (next_x - p[:, 0]) / d[:, 0], np.inf)
            ty = np.where(d[:, 1] != 0, (next_y - p[:, 1]) / d[:, 1], np.inf)
        step_x = tx <= ty
        t = np.where(step_x, tx, ty)
        new_cell = c.copy()
        new_cell[step_x, 0] += step[step_x, 0]
        new_cell[~step_x, 1] += step[~step_x, 1]
        pos[idx] = p + d * t[:, None]
        out = ((new_cell[:, 0] < 0) | (new_cell[:, 0] >= grid_n)
               | (new_cell[:, 1] < 0) | (new_cell[:, 1] >= grid_n))
        closed = np.zeros(len(idx), dtype=bool)
        inside = ~out
        closed[inside] = ~open_grid[new_cell[inside, 1], new_cell[inside, 0]]
        moved = inside & ~closed
        cell[idx[moved]] = new_cell[moved]
        escaped[idx[out]] = True
        active[idx[out]] = False
        hit = idx[closed]
        if len(hit) == 0:
            continue
        seg = np.linalg.norm(pos[hit] - last_pos[hit], axis=1)
        last_pos[hit] = pos[hit]
        ncoll[hit] += 1
        weights[hit] *= _loss_weights(config.loss_model, rng, len(hit))
        visit(hit + id_offset, ncoll[hit], pos[hit], weights[hit], seg)
        normals = np.zeros((len(hit), 2))
        hx = step_x[closed]
        normals[hx, 0] = -step[closed][hx, 0]
        normals[~hx, 1] = -step[closed][~hx, 1]
        dirs[hit] = _resample_half_plane(rng, normals)
        done = hit[ncoll[hit] >= config.max_collisions]
        active[done] = False
    return ncoll, escaped


def _trace_walk_chunk(walk: FixedStepWalk, source: tuple[float, float],
                      rng: np.random.Generator, n: int,
                      config: SimConfig, id_offset: int,
                      visit: Visitor) -> tuple[np.ndarray, np.ndarray]:
    pos = np.tile(np.asarray(source, dtype=float), (n, 1))
    weights = np.ones(n)
    ids = np.arange(n, dtype=np.int64) + id_offset
    seg = np.full(n, walk.step_m)
    for i in range(1, config.max_collisions + 1):
        theta = rng.uniform(0.0, 2.0 * math.pi, n)
        pos[:, 0] += walk.step_m * np.cos(theta)
        pos[:, 1] += walk.step_m * np.sin(theta)
        weights *= _loss_weights(config.loss_model, rng, n)
        visit(ids, np.full(n, i, dtype=np.int64), pos, weights, seg)
    return (np.full(n, config.max_collisions, dtype=np.int64),
            np.zeros(n, dtype=bool))


def _run(medium: Medium, source: tuple[float, float], config: SimConfig,
         visit: Visitor) -> tuple[np.ndarray, np.ndarray]:
    """Trace all rays chunk by chunk; returns (final collision counts,
    escaped flags) per ray."""
    if isinstance(medium, Lattice):
        _require_open_source(medium, source)
        tracer = _trace_lattice_chunk
    else:
        tracer = _trace_walk_chunk
    ncoll = np.zeros(config.n_rays, dtype=np.int64)
    escaped = np.zeros(config.n_rays, dtype=bool)
    offset = 0
    chunk_index = 0
    while offset < config.n_rays:
        m = min(config.chunk_size, config.n_rays - offset)
        seq = np.random.SeedSequence(entropy=config.seed,
                                     spawn_key=(chunk_index,))
        rng = np.random.Generator(np.random.PCG64(seq))
        nc, esc = tracer(medium, source, rng, m, config, offset, visit)
        ncoll[offset:offset + m] = nc
        escaped[offset:offset + m] = esc
        offset += m
        chunk_index += 1
    return ncoll, escaped


# ---------------------------------------------------------------------------
# empirical estimators
# ---------------------------------------------------------------------------

def collision_radii(medium: Medium, source: tuple[float, float],
                    i: int, config: SimConfig
                    ) -> tuple[np.ndarray, float]:
    """Radii (from the source) of ray positions immediately after collision
    ``i``, plus the fraction of rays that escaped before reaching it."""
    if i < 1 or i > config.max_collisions:
        raise DomainError("collision index must lie in [1, max_collisions]")
    sx, sy = float(source[0]), float(source[1])
    radii = np.full(config.n_rays, np.nan)

    def visit(ids, coll, positions, weights, seg):
        mask = coll == i
        if mask.any():
            d = positions[mask] - np.array([sx, sy])
            radii[ids[mask]] = np.hypot(d[:, 0], d[:, 1])

    ncoll, escaped = _run(medium, source, config, visit)
    reached = ~np.isnan(radii)
    escaped_before = float(np.mean(escaped & (ncoll < i)))
    return radii[reached], escaped_before


def empirical_collision_density(medium: Medium, source: tuple[float, float],
                                i: int, config: SimConfig,
                                radial_bins: Sequence[float]
                                ) -> RadialHistogram:
    """Normalized per-area histogram of ray positions after collision ``i``,
    directly comparable to the analytic densities Q_i(r)."""
    edges = np.asarray(radial_bins, dtype=float)
    if edges.ndim != 1 or len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise DomainError("radial_bins must be strictly increasing edges")
    if edges[0] != 0.0:
        raise DomainError("radial_bins must start at 0")
    if isinstance(medium, Lattice):
        half = medium.extent_m / 2.0
        if edges[-1] < half:
            raise DomainError(
                f"radial_bins must cover [0, {half}] for this lattice")
    radii, escaped_before = collision_radii(medium, source, i, config)
    if len(radii) < 100:
        raise InsufficientSamples(
            f"only {len(radii)} rays reached collision {i}")
    counts, _ = np.histogram(radii, bins=edges)
    areas = math.pi * (edges[1:] ** 2 - edges[:-1] ** 2)
    density = counts / (len(radii) * areas)
    return RadialHistogram(bin_edges=edges, counts=counts, density=density,
                           n_samples=len(radii),
                           escape_fraction=escaped_before)


def empirical_power(medium: Medium, source: tuple[float, float],
                    rx_annulus: tuple[float, float],
                    config: SimConfig) -> PowerEstimate:
    """Monte Carlo mean received power in an annulus around the source.

    Every collision event landing inside the annulus contributes the ray's
    accumulated weight 10**(-(sum of per-collision losses)/10); the sum is
    normalized by the annulus area and the ray count, matching the analytic
    sum over collision orders term by term.
    """
    r_c, dr = float(rx_annulus[0]), float(rx_annulus[1])
    if not r_c > 1.0:
        raise DomainError("annulus center radius must exceed the 1 m "
                          "far-field limit")
    if not 0 < dr < 2 * r_c:
        raise DomainError("annulus width must be positive and smaller than "
                          "its diameter")
    if isinstance(medium, Lattice):
        sx, sy = source
        margin = min(sx, sy, medium.extent_m - sx, medium.extent_m - sy)
        if r_c + dr / 2.0 > margin:
            raise DomainError("annulus extends outside the grid")
    lo, hi = r_c - dr / 2.0, r_c + dr / 2.0
    src = np.asarray(source, dtype=float)
    contrib = np.zeros(config.n_rays)

    def visit(ids, coll, positions, weights, seg):
        d = positions - src
        rad = np.hypot(d[:, 0], d[:, 1])
        mask = (rad >= lo) & (rad < hi)
        if mask.any():
            np.add.at(contrib, ids[mask], weights[mask])

    _, escaped = _run(medium, source, config, visit)
    area = math.pi * (hi * hi - lo * lo)
    per_ray = contrib / area
    est = float(per_ray.mean())
    se = float(per_ray.std(ddof=1) / math.sqrt(config.n_rays))
    if est <= 0.0 or 1.96 * se > config.max_rel_ci * est:
        raise InsufficientSamples(
            f"annulus estimate {est:.3e} +- {se:.3e} does not meet the "
            f"relative-CI threshold {config.max_rel_ci}")
    return PowerEstimate(power_w=est, stderr=se,
                         ci95=(est - 1.96 * se, est + 1.96 * se),
                         n_rays=config.n_rays, annulus_r=r_c, annulus_dr=dr,
                         escape_fraction=float(escaped.mean()))


def mean_free_path(lattice: Lattice, source: tuple[float, float],
                   config: SimConfig) -> tuple[float, int]:
    """Mean straight-flight length between collisions over all traced rays."""
    total = np.zeros(1)
    count = np.zeros(1, dtype=np.int64)

    def visit(ids, coll, positions, weights, seg):
        total[0] += seg.sum()
        count[0] += len(seg)

    _run(lattice, source, config, visit)
    if count[0] == 0:
        raise InsufficientSamples("no collisions observed")
    return float(total[0] / count[0]), int(count[0])


def goodness_of_fit(hist: RadialHistogram,
                    radial_cdf: Callable[[float], float],
                    min_expected: float = 5.0) -> GofResult:
    """Pearson chi-square of the observed radial counts against the bin
    probabilities implied by ``radial_cdf`` (the null's P(R <= r)).

    Trailing low-expectation bins are merged rightward until every cell
    expects at least ``min_expected`` counts; an overflow cell absorbs the
    tail mass beyond the last edge.
    """
    edges = hist.bin_edges
    n = hist.n_samples
    cdf_vals = np.array([radial_cdf(e) for e in edges])
    probs = np.append(np.diff(cdf_vals), 1.0 - cdf_vals[-1])
    counts = np.append(hist.counts, n - hist.counts.sum())
    merged_counts: list[float] = []
    merged_probs: list[float] = []
    acc_c = acc_p = 0.0
    for c, p in zip(counts, probs):
        acc_c += c
        acc_p += p
        if acc_p * n >= min_expected:
            merged_counts.append(acc_c)
            merged_probs.append(acc_p)
            acc_c = acc_p = 0.0
    if acc_p > 0 and merged_counts:
        merged_counts[-1] += acc_c
        merged_probs[-1] += acc_p
    obs = np.asarray(merged_counts)
    exp = np.asarray(merged_probs) * n
    if len(obs) < 2:
        raise InsufficientSamples("too few usable bins for a chi-square test")
    stat = float(((obs - exp) ** 2 / exp).sum())
    dof = len(obs) - 1
    return GofResult(statistic=stat, dof=dof,
                     p_value=float(_stats.chi2.sf(stat, dof)))


def write_power_estimates_csv(path: str | Path,
                              estimates: Sequence[PowerEstimate],
                              references: Sequence[float] | None = None
                              ) -> None:
    """CSV rows for annulus power estimates, optionally paired with an
    analytic reference value per row."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["r_m", "dr_m", "power_w", "stderr_w", "ci95_lo_w",
                  "ci95_hi_w", "n_rays", "escape_fraction"]
        if references is not None:
            header.append("reference_power_w")
        writer.writerow(header)
        for j, est in enumerate(estimates):
            row = [f"{est.annulus_r:.6g}", f"{est.annulus_dr:.6g}",
                   f"{est.power_w:.9e}", f"{est.stderr:.3e}",
                   f"{est.ci95[0]:.9e}", f"{est.ci95[1]:.9e}",
                   est.n_rays, f"{est.escape_fraction:.5f}"]
            if references is not None:
                row.append(f"{references[j]:.9e}")
            writer.writerow(row)


def write_histogram_csv(path: str | Path, hist: RadialHistogram,
                        reference: Callable[[float], float] | None = None
                        ) -> None:
    """CSV rows (r_lo, r_hi, count, density[, reference_density]) for one
    radial histogram; the optional reference is evaluated at bin centers."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["r_lo_m", "r_hi_m", "count", "density_per_m2"]
        if reference is not None:
            header.append("reference_density_per_m2")
        writer.writerow(header)
        for j in range(len(hist.counts)):
            lo, hi = hist.bin_edges[j], hist.bin_edges[j + 1]
            row = [f"{lo:.6g}", f"{hi:.6g}", int(hist.counts[j]),
                   f"{hist.density[j]:.9e}"]
            if reference is not None:
                row.append(f"{reference(0.5 * (lo + hi)):.9e}")
            writer.writerow(row)
