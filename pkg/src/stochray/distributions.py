"""Spatial probability densities of stochastic rays after i collisions.

Two maximum-entropy families are used.  With D the mean travelled distance:

* generic rays:      Q(r) = 2 / (pi D^2) * exp(-2 r / D)
* random-walk rays:  Q(r) = 1 / (pi D^2) * exp(-(r / D)^2)

Both are densities per unit area (the caller applies the r dr dtheta
measure) and are isotropic: the azimuth never enters.  The mean travelled
distance after i collisions scales as D_i = d_bar * i**beta, where d_bar is
the mean obstacle spacing; random-walk rays use beta = 1/2.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import DomainError, UnsupportedBeta

__all__ = [
    "RayModel",
    "mean_travel_distance",
    "pdf_generic",
    "pdf_random_walk",
    "radial_cdf_generic",
    "radial_cdf_random_walk",
    "random_walk_equivalence",
    "collision_profile",
    "write_collision_profile_csv",
]


@dataclass(frozen=True)
class RayModel:
    """Which density family governs the rays, and their anomaly exponent.

    ``kind`` is "random_walk" or "generic".  ``beta`` controls the spread
    growth D_i = d_bar * i**beta; the random-walk family always scales with
    beta = 1/2.  Closed-form power expressions exist only for beta in
    {1/2, 1}, but the density-level operations accept any beta > 0.
    """

    kind: str
    beta: float

    def __post_init__(self):
        if self.kind not in ("random_walk", "generic"):
            raise DomainError(f"unknown ray model kind {self.kind!r}")
        if not self.beta > 0:
            raise DomainError("beta must be positive")
        if self.kind == "random_walk" and self.beta != 0.5:
            raise DomainError("random-walk rays scale with beta = 1/2")

    @classmethod
    def random_walk(cls) -> "RayModel":
        return cls(kind="random_walk", beta=0.5)

    @classmethod
    def generic(cls, beta: float) -> "RayModel":
        return cls(kind="generic", beta=beta)

    @property
    def label(self) -> str:
        if self.kind == "random_walk":
            return "rw"
        return f"g{int(round(self.beta * 10)):02d}"

    def pdf(self, r: float, d_i: float) -> float:
        if self.kind == "random_walk":
            return pdf_random_walk(r, d_i)
        return pdf_generic(r, d_i)

    def require_closed_form_beta(self) -> None:
        if self.kind == "generic" and self.beta not in (0.5, 1.0):
            raise UnsupportedBeta(
                f"closed forms support beta in {{1/2, 1}}, got {self.beta}")


def mean_travel_distance(d_bar: float, i: int, beta: float) -> float:
    """Mean distance travelled by a ray after i collisions: d_bar * i**beta."""
    if not d_bar > 0:
        raise DomainError("d_bar must be positive")
    if i < 1:
        raise DomainError("collision index i must be at least 1")
    if not beta > 0:
        raise DomainError("beta must be positive")
    return d_bar * i ** beta


def _check_point(r: float, d_i: float) -> None:
    if r < 0:
        raise DomainError("radius must be non-negative")
    if not d_i > 0:
        raise DomainError("mean travel distance D_i must be positive")


def pdf_generic(r: float, d_i: float, theta: float = 0.0) -> float:
    """Generic-ray density at radius r (1/m^2); independent of theta."""
    _check_point(r, d_i)
    return 2.0 / (math.pi * d_i * d_i) * math.exp(-2.0 * r / d_i)


def pdf_random_walk(r: float, d_i: float, theta: float = 0.0) -> float:
    """Random-walk-ray density at radius r (1/m^2); independent of theta."""
    _check_point(r, d_i)
    return math.exp(-(r / d_i) ** 2) / (math.pi * d_i * d_i)


def radial_cdf_generic(r: float, d_i: float) -> float:
    """P(R <= r) under the generic-ray density: integrates 2 pi s Q(s) ds."""
    _check_point(r, d_i)
    u = 2.0 * r / d_i
    return 1.0 - math.exp(-u) * (1.0 + u)


def radial_cdf_random_walk(r: float, d_i: float) -> float:
    """P(R <= r) under the random-walk ray density."""
    _check_point(r, d_i)
    return 1.0 - math.exp(-(r / d_i) ** 2)


def random_walk_equivalence(r: float, d_bar: float, i: int) -> tuple[float, float]:
    """Evaluate the 2D diffusion density and the random-walk ray density at
    the same point.

    The diffusion form 1/(4 pi D t) exp(-r^2 / (4 D t)) with the step/time
    identification D*t = d_bar^2 * i / 4 must equal pdf_random_walk with
    D_i = d_bar * sqrt(i) exactly; both values are returned so tests can
    compare them to machine precision.
    """
    if not d_bar > 0:
        raise DomainError("d_bar must be positive")
    if i < 1:
        raise DomainError("collision index i must be at least 1")
    dt = 0.25 * d_bar * d_bar * i
    lhs = math.exp(-r * r / (4.0 * dt)) / (4.0 * math.pi * dt)
    rhs = pdf_random_walk(r, d_bar * math.sqrt(i))
    return lhs, rhs


def collision_profile(r: float, model: RayModel, d_bar: float,
                      i_max: int) -> list[tuple[int, float]]:
    """Density Q_i(r) at fixed radius for i = 1..i_max.

    The profile is unimodal in i; for random-walk rays the mode sits near
    r^2 / d_bar^2 where the exponent and the 1/i prefactor balance.
    """
    if not r > 0:
        raise DomainError("radius must be positive")
    if i_max < 1:
        raise DomainError("i_max must be at least 1")
    out = []
    for i in range(1, i_max + 1):
        d_i = mean_travel_distance(d_bar, i, model.beta)
        out.append((i, model.pdf(r, d_i)))
    return out


def write_collision_profile_csv(path: str | Path,
                                profile: list[tuple[int, float]]) -> None:
    """CSV rows (i, Q_i) for plotting collision-count profiles."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "Q_i"])
        for i, q in profile:
            writer.writerow([i, f"{q:.12e}"])
