"""Site-percolation lattices modelling the propagation environment.

Each cell of an N x N square grid is independently open (empty) with
probability p; closed cells are obstacles.  Note that p is the OPEN
probability throughout this package: the obstacle area fraction is 1 - p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DomainError

__all__ = [
    "PERCOLATION_THRESHOLD",
    "LatticeSpec",
    "Lattice",
    "Regime",
    "PercRegime",
    "generate_lattice",
    "mean_obstacle_spacing",
    "classify_regime",
    "lattice_to_text",
    "lattice_from_text",
]

# Critical open probability of 2D square-lattice site percolation.
PERCOLATION_THRESHOLD = 0.59275


@dataclass(frozen=True)
class LatticeSpec:
    """Parameters of a percolation lattice realization.

    cell_side_a   cell side in meters
    open_prob_p   probability that a cell is open (empty)
    grid_size_N   cells per side
    seed          64-bit PRNG seed
    """

    cell_side_a: float
    open_prob_p: float
    grid_size_N: int
    seed: int

    def __post_init__(self):
        if not self.cell_side_a > 0:
            raise DomainError("cell_side_a must be positive")
        if not 0.0 <= self.open_prob_p <= 1.0:
            raise DomainError("open_prob_p must lie in [0, 1]")
        if self.grid_size_N < 1:
            raise DomainError("grid_size_N must be at least 1")


@dataclass(frozen=True)
class Lattice:
    """A realized occupancy grid.  occupancy[iy, ix] is True for open cells.

    Immutable after construction; safe to share across workers.
    """

    spec: LatticeSpec
    occupancy: np.ndarray
    realized_open_fraction: float

    @property
    def extent_m(self) -> float:
        """Grid side length in meters; cells cover [0, extent_m)^2."""
        return self.spec.grid_size_N * self.spec.cell_side_a

    def is_open(self, ix: int, iy: int) -> bool:
        return bool(self.occupancy[iy, ix])


class Regime(Enum):
    SUBCRITICAL = "subcritical"
    SUPERCRITICAL = "supercritical"


@dataclass(frozen=True)
class PercRegime:
    regime: Regime
    threshold_pc: float = PERCOLATION_THRESHOLD


def generate_lattice(spec: LatticeSpec) -> Lattice:
    """Draw an occupancy grid for ``spec``.

    Uses numpy's PCG64 generator; the N x N uniform block is drawn in one
    row-major call, so (spec, seed) identifies the grid bit-for-bit across
    runs and platforms.
    """
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    u = rng.random((spec.grid_size_N, spec.grid_size_N))
    occupancy = u < spec.open_prob_p
    occupancy.flags.writeable = False
    frac = float(occupancy.mean())
    return Lattice(spec=spec, occupancy=occupancy, realized_open_fraction=frac)


def mean_obstacle_spacing(a: float, p: float) -> float:
    """Average distance between closed clusters: a / sqrt(1 - p).

    Follows from balancing the closed-cell count against total area.
    Limits: p -> 0 gives a, p -> 1 diverges (hence p = 1 is rejected).
    """
    if not a > 0:
        raise DomainError("cell side a must be positive")
    if not 0.0 <= p < 1.0:
        raise DomainError("open probability must lie in [0, 1); "
                          "spacing diverges as p -> 1")
    return a / math.sqrt(1.0 - p)


def classify_regime(p: float) -> PercRegime:
    """Supercritical iff p is strictly above the percolation threshold.

    The boundary p == threshold is assigned to Subcritical.
    """
    if not 0.0 <= p <= 1.0:
        raise DomainError("open probability must lie in [0, 1]")
    regime = Regime.SUPERCRITICAL if p > PERCOLATION_THRESHOLD else Regime.SUBCRITICAL
    return PercRegime(regime=regime)


def lattice_to_text(lattice: Lattice) -> str:
    """Portable fixture format: a header line then one row per line,
    '.' for open cells and '#' for closed ones."""
    s = lattice.spec
    lines = [f"a={s.cell_side_a!r} p={s.open_prob_p!r} N={s.grid_size_N} seed={s.seed}"]
    for row in lattice.occupancy:
        lines.append("".join("." if c else "#" for c in row))
    return "\n".join(lines) + "\n"


def lattice_from_text(text: str) -> Lattice:
    """Parse the fixture format written by :func:`lattice_to_text`."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DomainError("empty lattice fixture")
    header = dict(item.split("=", 1) for item in lines[0].split())
    try:
        spec = LatticeSpec(cell_side_a=float(header["a"]),
                           open_prob_p=float(header["p"]),
                           grid_size_N=int(header["N"]),
                           seed=int(header["seed"]))
    except KeyError as exc:
        raise DomainError(f"lattice fixture header missing key {exc}") from exc
    rows = lines[1:]
    if len(rows) != spec.grid_size_N or any(len(r) != spec.grid_size_N for r in rows):
        raise DomainError("lattice fixture body does not match N in header")
    occupancy = np.array([[c == "." for c in row] for row in rows], dtype=bool)
    occupancy.flags.writeable = False
    return Lattice(spec=spec, occupancy=occupancy,
                   realized_open_fraction=float(occupancy.mean()))
