"""Mean received power P(r) and path loss PL(r) for the three ray models.

Four mutually cross-checking evaluation routes are provided:

* series      -- damped sum over collision counts, exp(-xi*i) * Q_i(r)
* integral    -- the sum's continuum limit, evaluated by adaptive quadrature
* closed      -- Bessel / Laplace closed forms of the continuum integral
* asymptotic  -- large-argument reductions of the closed forms

Path loss is reported as PL(r) = -10 log10(P(r) / P_T) dB.  The raw linear
power is exposed alongside; with the default P_T = 1 W the two carry the
same information.

Conventions baked in here: the reflection loss L (dB per collision) enters
through xi = L ln(10) / 10, so one collision multiplies power by
10**(-L/10); increasing L (e.g. with carrier frequency) strictly decreases
P(r) at fixed range.  All routes require the far-field condition r > 1 m.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from . import specfun
from .distributions import RayModel
from .errors import DomainError, FarFieldViolation, NonConvergence
from .lattice import mean_obstacle_spacing

__all__ = [
    "ROUTES",
    "ChannelParams",
    "PowerResult",
    "xi_from_reflection_loss",
    "mean_power_series",
    "mean_power_integral",
    "mean_power_closed",
    "mean_power_asymptotic",
    "mean_power",
    "path_loss_curve",
    "write_curve_csv",
]

ROUTES = ("series", "integral", "closed", "asymptotic")

_LN10 = math.log(10.0)

# Concretization of the "argument >> 1" validity condition for the
# asymptotic route: the Bessel argument must reach this value.
ASYMPTOTIC_MIN_ARGUMENT = 5.0


def xi_from_reflection_loss(loss_db: float) -> float:
    """Natural-log damping rate per collision: xi = L * ln(10) / 10."""
    if loss_db < 0:
        raise DomainError("reflection loss must be non-negative")
    return loss_db * _LN10 / 10.0


@dataclass(frozen=True)
class ChannelParams:
    """Everything the power models consume.

    reflection_loss_db is the mean per-collision loss L; values outside the
    physically usual 2..10 dB band are accepted with a warning.
    """

    cell_side_a: float
    open_prob_p: float
    reflection_loss_db: float
    transmit_power_w: float = 1.0

    def __post_init__(self):
        if not self.cell_side_a > 0:
            raise DomainError("cell_side_a must be positive")
        if not 0.0 <= self.open_prob_p < 1.0:
            raise DomainError("open_prob_p must lie in [0, 1)")
        if self.reflection_loss_db < 0:
            raise DomainError("reflection_loss_db must be non-negative")
        if not self.transmit_power_w > 0:
            raise DomainError("transmit_power_w must be positive")
        if not 2.0 <= self.reflection_loss_db <= 10.0:
            warnings.warn(
                f"reflection loss {self.reflection_loss_db} dB is outside the "
                "usual 2..10 dB range", stacklevel=2)

    @property
    def xi(self) -> float:
        return xi_from_reflection_loss(self.reflection_loss_db)

    @property
    def d_bar(self) -> float:
        return mean_obstacle_spacing(self.cell_side_a, self.open_prob_p)

    def with_loss(self, loss_db: float) -> "ChannelParams":
        return replace(self, reflection_loss_db=loss_db)


@dataclass(frozen=True)
class PowerResult:
    """One evaluated point: linear power plus its dB path loss.

    ``regime_ok`` is set by the asymptotic route: False means the Bessel
    argument was below the validity threshold and the value is extrapolated
    (returned anyway so sweeps can plot the breakdown).
    """

    r_m: float
    model: RayModel
    route: str
    power_w: float
    path_loss_db: float
    regime_ok: bool | None = None


def _check_far_field(r: float) -> None:
    if not r > 1.0:
        raise FarFieldViolation(
            f"r = {r} m violates the far-field requirement r > 1 m")


def _result(r: float, model: RayModel, route: str, params: ChannelParams,
            unit_power: float, log_unit_power: float | None = None,
            regime_ok: bool | None = None) -> PowerResult:
    """Assemble a PowerResult from the P_T = 1 power (and optionally its log,
    which survives underflow of the linear value)."""
    if log_unit_power is None:
        if not unit_power > 0:
            raise NonConvergence(
                f"power underflowed to {unit_power} on route {route}",
                best_estimate=unit_power)
        log_unit_power = math.log(unit_power)
    pl_db = -10.0 * log_unit_power / _LN10
    return PowerResult(r_m=r, model=model, route=route,
                       power_w=params.transmit_power_w * unit_power,
                       path_loss_db=pl_db, regime_ok=regime_ok)


# ---------------------------------------------------------------------------
# series route
# ---------------------------------------------------------------------------

def mean_power_series(r: float, model: RayModel, params: ChannelParams,
                      tail_tol: float = 1e-12) -> PowerResult:
    """Sum exp(-xi*i) * Q_i(r) over collision counts i >= 1.

    Terms past the density's mode in i decrease, so the remaining tail is
    bounded by a geometric series with ratio exp(-xi); summation stops once
    that bound drops below tail_tol times the partial sum.
    """
    _check_far_field(r)
    xi = params.xi
    if xi == 0.0:
        raise NonConvergence(
            "series requires xi > 0: with zero reflection loss the "
            "collision sum has no geometric damping")
    d_bar = params.d_bar
    ratio = math.exp(-xi)
    geom = ratio / (1.0 - ratio)
    total = 0.0
    q_prev = math.inf
    i = 1
    while True:
        d_i = d_bar * i ** model.beta
        q = model.pdf(r, d_i)
        term = math.exp(-xi * i) * q
        total += term
        past_mode = q <= q_prev
        if past_mode and term * geom <= tail_tol * total and total > 0.0:
            break
        if i >= 5_000_000:
            raise NonConvergence(
                f"series did not satisfy the tail bound within {i} terms",
                best_estimate=total, error_bound=term * geom)
        q_prev = q
        i += 1
    return _result(r, model, "series", params, total)


# ---------------------------------------------------------------------------
# integral route
# ---------------------------------------------------------------------------

def _integral_pieces(r: float, model: RayModel, params: ChannelParams,
                     lower_limit: str):
    """Return (prefactor, h, phi, phi_min, lo) so that the continuum power is

        prefactor * exp(-phi_min) * int_lo^inf h(y) exp(-(phi(y)-phi_min)) dy

    The exponent minimum is peeled off analytically so the quadrature always
    works on an O(1) integrand, keeping default tolerances meaningful even
    when the power itself is hundreds of dB down.
    """
    a = params.cell_side_a
    p = params.open_prob_p
    xi = params.xi
    q1p = 1.0 - p
    d_bar = params.d_bar
    if model.kind == "random_walk":
        c = q1p * r * r / (a * a)
        lo = 1.0 if lower_limit == "series_start" else 0.0
        pref = q1p / (math.pi * a * a)
        h = lambda x: 1.0 / x
        phi = lambda x: xi * x + c / x
        x_star = math.sqrt(c / xi)
        phi_min = phi(max(x_star, lo)) if lo > 0 else 2.0 * math.sqrt(c * xi)
        return pref, h, phi, phi_min, lo
    if model.beta == 0.5:
        lo = d_bar if lower_limit == "series_start" else 0.0
        pref = 4.0 * q1p / (a * a * math.pi)
        h = lambda y: 1.0 / y
        phi = lambda y: q1p * xi * y * y / (a * a) + 2.0 * r / y
        y0 = (a * a * r / (q1p * xi)) ** (1.0 / 3.0)
        phi_min = phi(max(y0, lo)) if lo > 0 else 3.0 * r / y0
        return pref, h, phi, phi_min, lo
    if model.beta == 1.0:
        lo = d_bar if lower_limit == "series_start" else 0.0
        pref = 2.0 * math.sqrt(q1p) / (math.pi * a)
        h = lambda y: 1.0 / (y * y)
        phi = lambda y: xi * math.sqrt(q1p) * y / a + 2.0 * r / y
        y_star = math.sqrt(2.0 * r * a / (xi * math.sqrt(q1p)))
        phi_min = phi(max(y_star, lo))
        return pref, h, phi, phi_min, lo
    # Other anomaly exponents have no substituted form in the collision
    # variable; integrate over i directly.
    lo = 1.0 if lower_limit == "series_start" else 0.0
    pref = 2.0 / (math.pi * d_bar * d_bar)
    h = lambda i: i ** (-2.0 * model.beta)
    phi = lambda i: xi * i + 2.0 * r / (d_bar * i ** model.beta)
    i_star = (2.0 * r * model.beta / (d_bar * xi)) ** (1.0 / (model.beta + 1.0))
    phi_min = phi(max(i_star, lo)) if lo > 0 else phi(i_star)
    return pref, h, phi, phi_min, lo


def mean_power_integral(r: float, model: RayModel, params: ChannelParams,
                        lower_limit: str = "series_start",
                        quad_spec: specfun.QuadratureSpec | None = None
                        ) -> PowerResult:
    """Continuum-limit power by adaptive quadrature.

    ``lower_limit="series_start"`` starts the integral where the collision sum
    starts (i = 1, i.e. y = d_bar in the substituted variable); ``"zero"``
    extends it to 0, which is what the Bessel closed forms implicitly use.
    The difference between the two isolates the closed-form truncation gap.
    """
    _check_far_field(r)
    if lower_limit not in ("series_start", "zero"):
        raise DomainError("lower_limit must be 'series_start' or 'zero'")
    if params.xi == 0.0:
        raise NonConvergence("integral requires xi > 0")
    pref, h, phi, phi_min, lo = _integral_pieces(r, model, params, lower_limit)

    def scaled_integrand(y: float) -> float:
        e = phi(y) - phi_min
        if e > 745.0:      # exp underflow; h(y) may overflow there too
            return 0.0
        return h(y) * math.exp(-e)

    scaled = specfun.integrate(scaled_integrand, lo, math.inf, quad_spec)
    if not scaled > 0.0:
        raise NonConvergence(
            "integral evaluated to a non-positive value (all mass below "
            "the floating-point floor)", best_estimate=scaled)
    log_power = math.log(pref) + math.log(scaled) - phi_min
    power = math.exp(log_power)
    return _result(r, model, "integral", params, power, log_power)


# ---------------------------------------------------------------------------
# closed-form route
# ---------------------------------------------------------------------------

def mean_power_closed(r: float, model: RayModel,
                      params: ChannelParams) -> PowerResult:
    """Closed forms of the continuum integral (lower limit 0).

    random_walk:    2(1-p)/(pi a^2) * K0(2 r sqrt(xi (1-p)) / a)
    generic b=1:    2 sqrt(2 xi)/pi * (sqrt(1-p)/a)^(3/2) r^(-1/2) * K1(z),
                    z = 2 sqrt(2 sqrt(1-p) xi r / a)
    generic b=1/2:  interior-point Laplace evaluation of the integral,
                    (4/(a y0)) sqrt((1-p)/(3 pi xi)) exp(-3 r / y0) with
                    y0 = (a^2 r / ((1-p) xi))^(1/3)
    """
    _check_far_field(r)
    model.require_closed_form_beta()
    a = params.cell_side_a
    q1p = 1.0 - params.open_prob_p
    xi = params.xi
    if xi == 0.0:
        raise DomainError("closed forms require xi > 0")
    if model.kind == "random_walk":
        z = 2.0 * r * math.sqrt(xi * q1p) / a
        log_power = (math.log(2.0 * q1p / (math.pi * a * a))
                     + math.log(specfun.bessel_k0_scaled(z)) - z)
    elif model.beta == 0.5:
        y0 = (a * a * r / (q1p * xi)) ** (1.0 / 3.0)
        log_power = (math.log(4.0 / (a * y0))
                     + 0.5 * math.log(q1p / (3.0 * math.pi * xi))
                     - 3.0 * r / y0)
    else:
        z = 2.0 * math.sqrt(2.0 * math.sqrt(q1p) * xi * r / a)
        log_power = (math.log(2.0 * math.sqrt(2.0 * xi) / math.pi)
                     + 1.5 * math.log(math.sqrt(q1p) / a)
                     - 0.5 * math.log(r)
                     + math.log(specfun.bessel_k1_scaled(z)) - z)
    return _result(r, model, "closed", params, math.exp(log_power), log_power)


# ---------------------------------------------------------------------------
# asymptotic route
# ---------------------------------------------------------------------------

def mean_power_asymptotic(r: float, model: RayModel,
                          params: ChannelParams) -> PowerResult:
    """Large-argument reductions of the closed forms.

    Valid once the Bessel argument reaches ASYMPTOTIC_MIN_ARGUMENT; below
    that the value is still returned with regime_ok=False rather than
    raising, so sweeps can plot the breakdown region.  The generic beta=1/2
    model has no separate asymptote (its closed form already is one).
    """
    _check_far_field(r)
    model.require_closed_form_beta()
    a = params.cell_side_a
    q1p = 1.0 - params.open_prob_p
    xi = params.xi
    if xi == 0.0:
        raise DomainError("asymptotic forms require xi > 0")
    if model.kind == "random_walk":
        z = 2.0 * r * math.sqrt(xi * q1p) / a
        log_power = (0.75 * math.log(q1p) - 0.25 * math.log(xi)
                     - math.log(a) - 0.5 * math.log(math.pi * a * r) - z)
    elif model.beta == 0.5:
        closed = mean_power_closed(r, model, params)
        return PowerResult(r_m=r, model=model, route="asymptotic",
                           power_w=closed.power_w,
                           path_loss_db=closed.path_loss_db, regime_ok=True)
    else:
        z = 2.0 * math.sqrt(2.0 * math.sqrt(q1p) * xi * r / a)
        log_power = (0.25 * math.log(2.0 * xi) - 0.5 * math.log(math.pi)
                     + 1.25 * math.log(math.sqrt(q1p) / a)
                     - 0.75 * math.log(r) - z)
    return _result(r, model, "asymptotic", params, math.exp(log_power),
                   log_power, regime_ok=bool(z >= ASYMPTOTIC_MIN_ARGUMENT))


_ROUTE_FUNCS = {
    "series": mean_power_series,
    "integral": mean_power_integral,
    "closed": mean_power_closed,
    "asymptotic": mean_power_asymptotic,
}


def mean_power(r: float, model: RayModel, params: ChannelParams,
               route: str = "closed", **kwargs) -> PowerResult:
    """Dispatch a single evaluation to the named route."""
    try:
        func = _ROUTE_FUNCS[route]
    except KeyError:
        raise DomainError(f"unknown route {route!r}; expected one of {ROUTES}")
    return func(r, model, params, **kwargs)


def path_loss_curve(r_grid: Sequence[float], model: RayModel,
                    params: ChannelParams, route: str = "closed",
                    **kwargs) -> list[PowerResult]:
    """Evaluate one route over a strictly increasing grid of ranges."""
    rs = list(r_grid)
    if not rs:
        raise DomainError("empty range grid")
    if any(r <= 1.0 for r in rs):
        raise FarFieldViolation(
            "all grid ranges must satisfy the far-field constraint r > 1 m")
    if any(b <= a for a, b in zip(rs, rs[1:])):
        raise DomainError("range grid must be strictly increasing")
    return [mean_power(r, model, params, route, **kwargs) for r in rs]


def write_curve_csv(path: str | Path, results: Sequence[PowerResult]) -> None:
    """Delimited curve output: r_m, model, route, power_linear, path_loss_db."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["r_m", "model", "route", "power_linear", "path_loss_db"])
        for pr in results:
            writer.writerow([f"{pr.r_m:.6g}", pr.model.label, pr.route,
                             f"{pr.power_w:.12e}", f"{pr.path_loss_db:.6f}"])
