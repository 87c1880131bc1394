"""Mapping environments to model parameters and scoring against measurements.

Conventions: p is the OPEN probability, so an environment with obstacle
area fraction f maps to p = 1 - f, and the cell side follows from the mean
obstacle gap g as a = g * sqrt(1 - p).  Measured path-loss files are plain
CSV (distance_m, path_loss_db) with an optional "# ref=<meters>" comment
carrying the calibration reference distance.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .distributions import RayModel
from .errors import DomainError, LengthMismatch, MissingSpacing, StochrayError
from .pathloss import ChannelParams, PowerResult, mean_power, path_loss_curve

__all__ = [
    "MeasurementSet",
    "EnvironmentDescription",
    "CsvFormatError",
    "derive_lattice_params",
    "suggest_reflection_loss",
    "rms_error",
    "predict_at_distances",
    "fit_reflection_loss",
    "sensitivity_sweep",
    "SweepResult",
    "fit_decay_shape",
    "read_measurements",
    "write_measurements",
]


class CsvFormatError(StochrayError):
    """A measurement file row could not be parsed."""


@dataclass(frozen=True)
class MeasurementSet:
    """Measured (distance, path loss) pairs, optionally calibrated at a
    reference distance."""

    points: tuple[tuple[float, float], ...]
    calibration_ref_m: float | None = None

    def __post_init__(self):
        if any(d <= 0 for d, _ in self.points):
            raise DomainError("measurement distances must be positive")
        if self.calibration_ref_m is not None and self.calibration_ref_m <= 0:
            raise DomainError("calibration reference distance must be positive")

    @property
    def distances(self) -> np.ndarray:
        return np.array([d for d, _ in self.points])

    @property
    def path_loss_db(self) -> np.ndarray:
        return np.array([pl for _, pl in self.points])

    def reference_point(self) -> tuple[float, float]:
        """(distance, path loss) of the measured point anchoring the
        calibration: the one nearest the reference distance (smaller
        distance wins a tie)."""
        if self.calibration_ref_m is None:
            raise DomainError("measurement set has no calibration reference")
        ds = self.distances
        j = int(np.lexsort((ds, np.abs(ds - self.calibration_ref_m)))[0])
        return float(ds[j]), float(self.path_loss_db[j])


@dataclass(frozen=True)
class EnvironmentDescription:
    obstacle_area_fraction: float
    mean_obstacle_gap_m: float | None = None
    region_note: str = ""

    def __post_init__(self):
        if not 0.0 <= self.obstacle_area_fraction < 1.0:
            raise DomainError("obstacle_area_fraction must lie in [0, 1)")
        if self.mean_obstacle_gap_m is not None and self.mean_obstacle_gap_m <= 0:
            raise DomainError("mean_obstacle_gap_m must be positive")


def derive_lattice_params(env: EnvironmentDescription,
                          cell_side_a: float | None = None
                          ) -> tuple[float, float]:
    """(a, p) for an environment: p = 1 - obstacle fraction, and
    a = gap * sqrt(1 - p) when the mean obstacle gap is known (inverting the
    spacing relation); otherwise the cell side must be supplied directly."""
    p = 1.0 - env.obstacle_area_fraction
    if cell_side_a is not None:
        if cell_side_a <= 0:
            raise DomainError("cell_side_a must be positive")
        return cell_side_a, p
    if env.mean_obstacle_gap_m is None:
        raise MissingSpacing(
            "need either a cell side or a mean obstacle gap to fix the scale")
    return env.mean_obstacle_gap_m * math.sqrt(1.0 - p), p


# Recommended per-collision loss windows in dB.  The sub-6 GHz random-walk
# base sits inside the physical 2..10 dB band; the generic models need 1-2 dB
# more per anomaly step (their rays suffer fewer collisions on average, so a
# larger per-collision loss yields comparable total loss), and millimeter
# wave scattering is lossier across the board.
_BASE_RANGE_DB = (2.0, 5.0)
_MODEL_SHIFT_DB = {"rw": (0.0, 0.0), "g05": (1.0, 2.0), "g10": (2.0, 4.0)}
_BAND_SHIFT_DB = {"sub6ghz": 0.0, "mmwave": 2.5}


def suggest_reflection_loss(model: RayModel, band: str = "sub6ghz"
                            ) -> tuple[float, float]:
    """Recommended reflection-loss range (dB) for a model and carrier band."""
    band = band.lower()
    if band not in _BAND_SHIFT_DB:
        raise DomainError(f"unknown band {band!r}; expected sub6ghz or mmwave")
    base_lo = min(max(_BASE_RANGE_DB[0], 2.0), 10.0)
    base_hi = min(max(_BASE_RANGE_DB[1], 2.0), 10.0)
    lo_shift, hi_shift = _MODEL_SHIFT_DB[model.label]
    b = _BAND_SHIFT_DB[band]
    return base_lo + lo_shift + b, base_hi + hi_shift + b


def rms_error(measured: MeasurementSet,
              predicted_path_loss_db: Sequence[float]) -> float:
    """Root-mean-square error between measured and predicted path loss,
    aligned point by point."""
    meas = measured.path_loss_db
    pred = np.asarray(predicted_path_loss_db, dtype=float)
    if len(meas) != len(pred):
        raise LengthMismatch(
            f"{len(meas)} measured vs {len(pred)} predicted points")
    if len(meas) < 2:
        raise DomainError("RMS scoring needs at least 2 points")
    return float(np.sqrt(np.mean((meas - pred) ** 2)))


def predict_at_distances(measured: MeasurementSet, model: RayModel,
                         params: ChannelParams, route: str = "closed"
                         ) -> np.ndarray:
    """Model path loss evaluated exactly at the measured distances (no
    interpolation), offset to match the measured loss at the calibration
    reference distance when one is present."""
    pred = np.array([mean_power(float(d), model, params, route).path_loss_db
                     for d in measured.distances])
    if measured.calibration_ref_m is not None:
        ref_d, ref_pl = measured.reference_point()
        at_ref = mean_power(ref_d, model, params, route).path_loss_db
        pred += ref_pl - at_ref
    return pred


def fit_reflection_loss(measured: MeasurementSet, model: RayModel,
                        a: float, p: float,
                        loss_range_db: tuple[float, float],
                        route: str = "closed",
                        coarse_step_db: float = 0.1,
                        refinement_rounds: int = 12
                        ) -> tuple[float, float]:
    """Best per-collision loss by grid scan plus window refinement.

    Returns (L_best, sigma_best); ties break toward the smaller loss.  The
    optional direct fit the parameter-determination rules allow, not the
    default way to choose L.
    """
    lo, hi = loss_range_db
    if not (0.5 <= lo < hi <= 20.0):
        raise DomainError("loss range must be a non-empty interval "
                          "within [0.5, 20] dB")

    def score(loss_db: float) -> float:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            params = ChannelParams(cell_side_a=a, open_prob_p=p,
                                   reflection_loss_db=loss_db)
        return rms_error(measured,
                         predict_at_distances(measured, model, params, route))

    step = coarse_step_db
    grid = np.arange(lo, hi + step / 2, step)
    sigmas = [score(float(L)) for L in grid]
    best = float(grid[int(np.argmin(sigmas))])
    sigma_best = min(sigmas)
    for _ in range(refinement_rounds):
        step /= 5.0
        window = [best + k * step for k in range(-5, 6)]
        window = [L for L in window if lo <= L <= hi]
        for L in window:
            s = score(L)
            if s < sigma_best or (s == sigma_best and L < best):
                best, sigma_best = L, s
    return best, sigma_best


@dataclass(frozen=True)
class SweepResult:
    """Path-loss curves for single-parameter perturbations of a base channel."""
    r_grid: tuple[float, ...]
    base: list[PowerResult]
    variants: dict[str, list[PowerResult]] = field(default_factory=dict)
    max_deviation_db: dict[str, float] = field(default_factory=dict)


def sensitivity_sweep(base: ChannelParams, model: RayModel,
                      r_grid: Sequence[float], delta_fraction: float,
                      route: str = "closed") -> SweepResult:
    """Perturb each of (a, p, L) by +-delta_fraction of itself, one at a
    time, and report the resulting path-loss curves and the largest absolute
    dB deviation per parameter."""
    if delta_fraction < 0:
        raise DomainError("delta_fraction must be non-negative")
    base_curve = path_loss_curve(r_grid, model, base, route)
    base_pl = np.array([pr.path_loss_db for pr in base_curve])
    result = SweepResult(r_grid=tuple(r_grid), base=base_curve)
    perturbed = {
        "a+": ChannelParams(base.cell_side_a * (1 + delta_fraction),
                            base.open_prob_p, base.reflection_loss_db),
        "a-": ChannelParams(base.cell_side_a * (1 - delta_fraction),
                            base.open_prob_p, base.reflection_loss_db),
        "p+": ChannelParams(base.cell_side_a,
                            base.open_prob_p * (1 + delta_fraction),
                            base.reflection_loss_db),
        "p-": ChannelParams(base.cell_side_a,
                            base.open_prob_p * (1 - delta_fraction),
                            base.reflection_loss_db),
        "L+": ChannelParams(base.cell_side_a, base.open_prob_p,
                            base.reflection_loss_db * (1 + delta_fraction)),
        "L-": ChannelParams(base.cell_side_a, base.open_prob_p,
                            base.reflection_loss_db * (1 - delta_fraction)),
    }
    dev: dict[str, float] = {"a": 0.0, "p": 0.0, "L": 0.0}
    for label, params in perturbed.items():
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            curve = path_loss_curve(r_grid, model, params, route)
        result.variants[label] = curve
        pl = np.array([pr.path_loss_db for pr in curve])
        dev[label[0]] = max(dev[label[0]], float(np.max(np.abs(pl - base_pl))))
    result.max_deviation_db.update(dev)
    return result


def fit_decay_shape(r_m: Sequence[float], power_w: Sequence[float],
                    q_bounds: tuple[float, float] = (0.1, 1.5)
                    ) -> tuple[float, float]:
    """Fit log P = A - s*ln(r) - B*r**q and return (q, s).

    The stretched-exponential exponent q separates the three model families
    (1 for random-walk rays, 2/3 for generic beta=1/2, 1/2 for beta=1); the
    algebraic prefactor power s is fitted alongside so it cannot bias q.
    Deterministic coarse scan over q with linear least squares inside, then
    window refinement.
    """
    rs = np.asarray(r_m, dtype=float)
    ps = np.asarray(power_w, dtype=float)
    if len(rs) != len(ps):
        raise LengthMismatch("r and power lengths differ")
    if len(rs) < 4:
        raise DomainError("shape fit needs at least 4 points")
    if np.any(ps <= 0):
        raise DomainError("powers must be positive")
    log_p = np.log(ps)
    ln_r = np.log(rs)

    def residual(q: float) -> tuple[float, np.ndarray]:
        design = np.vstack([np.ones_like(rs), ln_r, rs ** q]).T
        coef, _, _, _ = np.linalg.lstsq(design, log_p, rcond=None)
        res = log_p - design @ coef
        return float(res @ res), coef

    lo, hi = q_bounds
    grid = np.linspace(lo, hi, 141)
    best_q = float(min(grid, key=lambda g: residual(float(g))[0]))
    width = float(grid[1] - grid[0])
    for _ in range(40):
        cands = np.linspace(max(lo, best_q - width), min(hi, best_q + width), 11)
        best_q = float(min(cands, key=lambda g: residual(float(g))[0]))
        width /= 5.0
    _, coef = residual(best_q)
    return best_q, float(-coef[1])


# ---------------------------------------------------------------------------
# measurement CSV
# ---------------------------------------------------------------------------

def read_measurements(path: str | Path) -> MeasurementSet:
    """Parse "distance_m,path_loss_db" rows; '#' lines are comments, and a
    "# ref=<meters>" comment sets the calibration reference."""
    ref: float | None = None
    points: list[tuple[float, float]] = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                if body.startswith("ref="):
                    try:
                        ref = float(body[4:])
                    except ValueError:
                        raise CsvFormatError(
                            f"{path}:{lineno}: bad reference distance {body!r}")
                continue
            if line.lower().startswith("distance_m"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 2:
                raise CsvFormatError(
                    f"{path}:{lineno}: expected 2 comma-separated values, "
                    f"got {len(parts)}")
            try:
                points.append((float(parts[0]), float(parts[1])))
            except ValueError:
                raise CsvFormatError(f"{path}:{lineno}: non-numeric row {line!r}")
    if not points:
        raise CsvFormatError(f"{path}: no measurement rows found")
    return MeasurementSet(points=tuple(points), calibration_ref_m=ref)


def write_measurements(path: str | Path, measured: MeasurementSet) -> None:
    with open(path, "w") as fh:
        if measured.calibration_ref_m is not None:
            fh.write(f"# ref={measured.calibration_ref_m}\n")
        fh.write("distance_m,path_loss_db\n")
        for d, pl in measured.points:
            fh.write(f"{d:.6g},{pl:.6f}\n")
