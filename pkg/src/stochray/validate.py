"""Cross-validation check suite.

Each check pits independent evaluation routes against each other (series vs
quadrature vs closed form, analytic density vs Monte Carlo, fit round trips)
and returns a :class:`CheckResult` with the measured gap.  The acceptance
test module and the ``validate`` CLI subcommand both drive these functions.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import specfun
from .calibrate import MeasurementSet, fit_decay_shape, fit_reflection_loss
from .distributions import (
    RayModel,
    pdf_generic,
    pdf_random_walk,
    radial_cdf_random_walk,
    random_walk_equivalence,
)
from .lattice import LatticeSpec, generate_lattice
from .montecarlo import (
    DeterministicLoss,
    FixedStepWalk,
    SimConfig,
    collision_radii,
    empirical_collision_density,
    empirical_power,
    goodness_of_fit,
    mean_free_path,
    nearest_open_cell_center,
)
from .pathloss import (
    ChannelParams,
    mean_power_asymptotic,
    mean_power_closed,
    mean_power_integral,
    mean_power_series,
)

__all__ = ["CheckResult", "run_analytic_checks", "run_monte_carlo_checks"]

# Outdoor reference channel and the per-model reflection losses used with it.
_OUTDOOR_A = 20.0
_OUTDOOR_P = 0.7
_OUTDOOR_LOSS = {"rw": 3.5, "g05": 5.5, "g10": 7.5}
# Indoor reference channel for the K1-model checks.
_INDOOR_A = 2.0
_INDOOR_P = 0.82

_MODELS = {
    "rw": RayModel.random_walk(),
    "g05": RayModel.generic(0.5),
    "g10": RayModel.generic(1.0),
}

# Laplace closed-form accuracy against the collision-sum-start quadrature,
# measured once on the outdoor channel at L=5.5 and frozen as regression
# bounds (checked to +-20% of themselves).
_LAPLACE_FROZEN = ((100.0, 0.279520), (200.0, 0.030510), (400.0, 0.005293))


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def _params(a: float, p: float, loss: float) -> ChannelParams:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return ChannelParams(cell_side_a=a, open_prob_p=p,
                             reflection_loss_db=loss)


# ---------------------------------------------------------------------------
# analytic checks
# ---------------------------------------------------------------------------

def check_pdf_normalization() -> CheckResult:
    """Both densities integrate to 1 over the plane, to 1e-8."""
    worst = 0.0
    for d in (0.1, 1.0, 10.0, 100.0, 1000.0):
        for pdf in (pdf_generic, pdf_random_walk):
            total = specfun.integrate(
                lambda r: 2.0 * math.pi * r * pdf(r, d), 0.0, math.inf)
            worst = max(worst, abs(total - 1.0))
    return CheckResult("pdf normalization", worst < 1e-8,
                       f"max |integral - 1| = {worst:.2e} (tol 1e-8)")


def check_pdf_moments() -> CheckResult:
    """Radial mean of the generic density is D; radial second moment of the
    random-walk density is D^2 (both to 1e-8 relative)."""
    worst = 0.0
    for d in (0.1, 1.0, 10.0, 100.0, 1000.0):
        mean = specfun.integrate(
            lambda r: 2.0 * math.pi * r * r * pdf_generic(r, d), 0.0, math.inf)
        worst = max(worst, abs(mean - d) / d)
        m2 = specfun.integrate(
            lambda r: 2.0 * math.pi * r ** 3 * pdf_random_walk(r, d),
            0.0, math.inf)
        worst = max(worst, abs(m2 - d * d) / (d * d))
    return CheckResult("pdf moment constraints", worst < 1e-8,
                       f"max relative moment error = {worst:.2e} (tol 1e-8)")


def check_diffusion_equivalence(n_tuples: int = 20, seed: int = 42) -> CheckResult:
    """The 2D diffusion density with D*t = d_bar^2 i / 4 equals the
    random-walk ray density to within 10 ulp."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_tuples):
        r = float(rng.uniform(0.0, 500.0))
        d_bar = float(rng.uniform(1.0, 50.0))
        i = int(rng.integers(1, 101))
        lhs, rhs = random_walk_equivalence(r, d_bar, i)
        ulps = abs(lhs - rhs) / math.ulp(max(lhs, rhs)) if lhs != rhs else 0.0
        worst = max(worst, ulps)
    return CheckResult("diffusion equivalence", worst <= 10.0,
                       f"max deviation = {worst:.1f} ulp (tol 10)")


def check_bessel_integral_identity() -> CheckResult:
    """Quadrature of x**(nu-1) exp(-b/x - g*x) matches
    2 (b/g)**(nu/2) K_nu(2 sqrt(b*g)) for nu = 0 and -1 on a log grid;
    certifies K0/K1 and the quadrature engine against each other."""
    spec = specfun.QuadratureSpec(abs_tol=1e-300, rel_tol=1e-10,
                                  max_subdivisions=4000)
    worst = 0.0
    for b in np.geomspace(1e-2, 1e2, 5):
        for g in np.geomspace(1e-2, 1e2, 5):
            z = 2.0 * math.sqrt(b * g)

            def integrand(x: float, power: float) -> float:
                e = b / x + g * x
                if e > 700.0:
                    return 0.0
                return x ** power * math.exp(-e)

            i0 = specfun.integrate(lambda x: integrand(x, -1.0), 0.0,
                                   math.inf, spec)
            expect0 = 2.0 * specfun.bessel_k0(z)
            worst = max(worst, abs(i0 - expect0) / expect0)
            i1 = specfun.integrate(lambda x: integrand(x, -2.0), 0.0,
                                   math.inf, spec)
            expect1 = 2.0 * math.sqrt(g / b) * specfun.bessel_k1(z)
            worst = max(worst, abs(i1 - expect1) / expect1)
    return CheckResult("Bessel integral identity", worst < 1e-6,
                       f"max relative error = {worst:.2e} (tol 1e-6)")


def check_routes_random_walk() -> CheckResult:
    """Random-walk model: K0 closed form equals the zero-lower-limit
    quadrature to 1e-6; the exponential asymptote stays within 2% of the
    closed form once its argument reaches 5."""
    model = _MODELS["rw"]
    params = _params(_OUTDOOR_A, _OUTDOOR_P, 3.0)
    worst_closed = 0.0
    worst_asym = 0.0
    for r in (50.0, 100.0, 150.0, 300.0):
        closed = mean_power_closed(r, model, params)
        quad = mean_power_integral(r, model, params, lower_limit="zero")
        worst_closed = max(worst_closed,
                           abs(closed.power_w - quad.power_w) / quad.power_w)
        asym = mean_power_asymptotic(r, model, params)
        if asym.regime_ok:
            worst_asym = max(worst_asym,
                             abs(asym.power_w - closed.power_w) / closed.power_w)
    ok = worst_closed < 1e-6 and worst_asym < 0.02
    return CheckResult(
        "random-walk route consistency", ok,
        f"closed vs quadrature {worst_closed:.2e} (tol 1e-6); "
        f"asymptote vs closed {worst_asym:.2%} (tol 2%)")


def check_routes_generic_beta1() -> CheckResult:
    """Generic beta=1 model: K1 closed form equals the zero-lower-limit
    quadrature to 1e-6; its asymptote stays within 5% once in regime.

    As with the random-walk grid, the in-regime ranges sit in the
    asymptote's working zone: the K1 expansion's leading correction 3/(8z)
    exceeds 5% right at the z = 5 regime flag and only drops below it for
    z >= 7.4, so the measured gap at the regime boundary is reported
    alongside rather than asserted.
    """
    model = _MODELS["g10"]
    params = _params(_INDOOR_A, _INDOOR_P, 8.0)
    worst_closed = 0.0
    worst_asym = 0.0
    for r in (5.0, 20.0, 30.0, 40.0):
        closed = mean_power_closed(r, model, params)
        quad = mean_power_integral(r, model, params, lower_limit="zero")
        worst_closed = max(worst_closed,
                           abs(closed.power_w - quad.power_w) / quad.power_w)
        asym = mean_power_asymptotic(r, model, params)
        if asym.regime_ok:
            worst_asym = max(worst_asym,
                             abs(asym.power_w - closed.power_w) / closed.power_w)
    boundary_closed = mean_power_closed(10.0, model, params)
    boundary_asym = mean_power_asymptotic(10.0, model, params)
    boundary_gap = (abs(boundary_asym.power_w - boundary_closed.power_w)
                    / boundary_closed.power_w)
    ok = worst_closed < 1e-6 and worst_asym < 0.05
    return CheckResult(
        "generic beta=1 route consistency", ok,
        f"closed vs quadrature {worst_closed:.2e} (tol 1e-6); "
        f"asymptote vs closed {worst_asym:.2%} (tol 5%); "
        f"boundary gap at z=5.6 is {boundary_gap:.2%} (reported only)")


def check_laplace_accuracy() -> CheckResult:
    """Laplace closed form vs the collision-sum-start quadrature: measured
    errors must stay within +-20% of their frozen baselines and decrease
    with range."""
    model = _MODELS["g05"]
    params = _params(_OUTDOOR_A, _OUTDOOR_P, 5.5)
    errors = []
    for r, _ in _LAPLACE_FROZEN:
        closed = mean_power_closed(r, model, params)
        oracle = mean_power_integral(r, model, params, lower_limit="series_start")
        errors.append(abs(closed.power_w - oracle.power_w) / oracle.power_w)
    within = all(abs(err - frozen) <= 0.2 * frozen
                 for err, (_, frozen) in zip(errors, _LAPLACE_FROZEN))
    decreasing = all(a > b for a, b in zip(errors, errors[1:]))
    detail = ", ".join(f"r={r:g}: {err:.4f} (frozen {frozen:.4f})"
                       for err, (r, frozen) in zip(errors, _LAPLACE_FROZEN))
    return CheckResult("Laplace approximation accuracy",
                       within and decreasing,
                       detail + ("; decreasing" if decreasing
                                 else "; NOT decreasing"))


def check_series_vs_integral() -> CheckResult:
    """Collision sum vs its continuum integral within 5% wherever the sum is
    spread over many collision orders (range grid chosen inside that regime)
    and predicted loss stays under 150 dB."""
    grid = np.geomspace(250.0, 600.0, 8)
    worst = 0.0
    n_pts = 0
    for label, model in _MODELS.items():
        params = _params(_OUTDOOR_A, _OUTDOOR_P, _OUTDOOR_LOSS[label])
        for r in grid:
            closed = mean_power_closed(float(r), model, params)
            if closed.path_loss_db >= 150.0:
                continue
            series = mean_power_series(float(r), model, params)
            integral = mean_power_integral(float(r), model, params,
                                           lower_limit="series_start")
            gap = abs(series.power_w - integral.power_w) / integral.power_w
            worst = max(worst, gap)
            n_pts += 1
    return CheckResult("series vs integral", worst < 0.05,
                       f"max gap {worst:.2%} over {n_pts} points (tol 5%)")


def check_model_ordering() -> CheckResult:
    """With a common reflection loss, path loss is ordered random-walk >=
    generic beta=1/2 >= generic beta=1 at every range at and beyond 100 m."""
    params = _params(_OUTDOOR_A, _OUTDOOR_P, 3.0)
    ok = True
    min_margin = math.inf
    for route_func in (mean_power_closed, mean_power_asymptotic):
        for r in np.geomspace(100.0, 3000.0, 20):
            pls = [route_func(float(r), _MODELS[k], params).path_loss_db
                   for k in ("rw", "g05", "g10")]
            margin = min(pls[0] - pls[1], pls[1] - pls[2])
            min_margin = min(min_margin, margin)
            if not (pls[0] >= pls[1] >= pls[2]):
                ok = False
    return CheckResult("model path-loss ordering", ok,
                       f"min ordering margin {min_margin:.2f} dB "
                       "over closed and asymptotic routes, r >= 100 m")


def check_decay_exponents() -> CheckResult:
    """Fitting log P = A - s ln r - B r**q recovers the stretched-exponential
    exponent q in {1, 2/3, 1/2} within 5%, on both the asymptotic forms the
    shape claim is about and the Bessel closed forms."""
    rs = np.geomspace(100.0, 1000.0, 40)
    expected = {"rw": 1.0, "g05": 2.0 / 3.0, "g10": 0.5}
    details = []
    ok = True
    for label, model in _MODELS.items():
        params = _params(_OUTDOOR_A, _OUTDOOR_P, _OUTDOOR_LOSS[label])
        worst = 0.0
        q_closed = None
        for route in (mean_power_asymptotic, mean_power_closed):
            powers = [route(float(r), model, params).power_w for r in rs]
            q_hat, _ = fit_decay_shape(rs, powers)
            worst = max(worst, abs(q_hat - expected[label]) / expected[label])
            q_closed = q_hat
        ok = ok and worst < 0.05
        details.append(f"{label}: q={q_closed:.4f} (expect "
                       f"{expected[label]:.4f}, worst off {worst:.2%})")
    return CheckResult("decay exponent recovery", ok, "; ".join(details))


def check_lattice_statistics() -> CheckResult:
    """Over 100 seeds at N=200 the mean realized open fraction sits within
    0.001 of p for each nominal p."""
    worst = 0.0
    for p in (0.3, 0.5, 0.7, 0.9):
        fracs = [generate_lattice(LatticeSpec(2.0, p, 200, seed)
                                  ).realized_open_fraction
                 for seed in range(100)]
        worst = max(worst, abs(float(np.mean(fracs)) - p))
    return CheckResult("lattice open-fraction statistics", worst < 1e-3,
                       f"max |mean - p| = {worst:.2e} (tol 1e-3)")


def check_fit_round_trip() -> CheckResult:
    """Fitting the reflection loss on noiseless synthetic curves recovers the
    generating value essentially exactly."""
    distances = np.geomspace(100.0, 500.0, 12)
    ok = True
    details = []
    for label, model in _MODELS.items():
        loss_gen = _OUTDOOR_LOSS[label]
        params = _params(_OUTDOOR_A, _OUTDOOR_P, loss_gen)
        points = tuple(
            (float(d), mean_power_closed(float(d), model, params).path_loss_db)
            for d in distances)
        measured = MeasurementSet(points=points)
        loss_fit, sigma = fit_reflection_loss(
            measured, model, _OUTDOOR_A, _OUTDOOR_P, (1.0, 10.0))
        good = abs(loss_fit - loss_gen) < 1e-6 and sigma < 1e-6
        ok = ok and good
        details.append(f"{label}: L={loss_fit:.8f} (gen {loss_gen}), "
                       f"sigma={sigma:.2e} dB")
    return CheckResult("calibration round trip", ok, "; ".join(details))


def run_analytic_checks() -> list[CheckResult]:
    return [
        check_pdf_normalization(),
        check_pdf_moments(),
        check_diffusion_equivalence(),
        check_bessel_integral_identity(),
        check_routes_random_walk(),
        check_routes_generic_beta1(),
        check_laplace_accuracy(),
        check_series_vs_integral(),
        check_model_ordering(),
        check_decay_exponents(),
        check_lattice_statistics(),
        check_fit_round_trip(),
    ]


# ---------------------------------------------------------------------------
# Monte Carlo checks
# ---------------------------------------------------------------------------

def check_walk_limit(n_rays: int = 100_000, seed: int = 42) -> CheckResult:
    """Fixed-step isotropic walk at 25 steps: the mean squared displacement
    must match step^2 * 25 within 3 standard errors, and the radial
    histogram must pass a chi-square test against the random-walk density at
    significance 0.01 (12 equal-probability cells)."""
    step = 20.0 / math.sqrt(0.3)
    i = 25
    d_i = step * math.sqrt(i)
    config = SimConfig(n_rays=n_rays, max_collisions=i, seed=seed,
                       loss_model=DeterministicLoss(3.0))
    walk = FixedStepWalk(step)
    radii, _ = collision_radii(walk, (0.0, 0.0), i, config)
    r2 = radii ** 2
    msd = float(r2.mean())
    se = float(r2.std(ddof=1) / math.sqrt(len(r2)))
    z = (msd - step * step * i) / se
    quantiles = np.arange(1, 12) / 12.0
    edges = np.concatenate([[0.0], d_i * np.sqrt(-np.log1p(-quantiles))])
    hist = empirical_collision_density(walk, (0.0, 0.0), i, config, edges)
    gof = goodness_of_fit(hist, lambda r: radial_cdf_random_walk(r, d_i))
    ok = abs(z) <= 3.0 and gof.p_value >= 0.01
    return CheckResult(
        "random-walk limit of the step simulator", ok,
        f"MSD z = {z:+.2f} (tol 3); chi2 = {gof.statistic:.1f} "
        f"(dof {gof.dof}), p = {gof.p_value:.4f} (min 0.01)")


def check_escape_bias(seed: int = 42) -> CheckResult:
    """On the standard N=200 outdoor lattice fewer than 1% of rays escape
    before the tested collision depth."""
    lat = generate_lattice(LatticeSpec(_OUTDOOR_A, _OUTDOOR_P, 200, seed))
    source = nearest_open_cell_center(lat)
    config = SimConfig(n_rays=20_000, max_collisions=12, seed=seed)
    _, escaped_before = collision_radii(lat, source, 12, config)
    return CheckResult("escape bias", escaped_before < 0.01,
                       f"escape fraction before collision 12 = "
                       f"{escaped_before:.4f} (tol 0.01)")


def check_mean_free_path(seed: int = 42) -> CheckResult:
    """Measured flight length between collisions against the mean obstacle
    spacing.  The spacing is an area-balance heuristic, so only
    order-of-magnitude agreement is claimed; the measured ratio is reported
    and pinned loosely."""
    lat = generate_lattice(LatticeSpec(_OUTDOOR_A, _OUTDOOR_P, 200, seed))
    source = nearest_open_cell_center(lat)
    config = SimConfig(n_rays=20_000, max_collisions=10, seed=seed)
    mfp, n_segments = mean_free_path(lat, source, config)
    d_bar = _OUTDOOR_A / math.sqrt(1.0 - _OUTDOOR_P)
    ratio = mfp / d_bar
    return CheckResult("mean free path vs obstacle spacing",
                       0.5 <= ratio <= 2.0,
                       f"measured {mfp:.1f} m over {n_segments} flights; "
                       f"ratio to spacing {ratio:.3f} (claimed order of "
                       "magnitude, band [0.5, 2])")


def check_empirical_power(n_rays: int = 50_000, seed: int = 42) -> CheckResult:
    """Walk-override Monte Carlo power against the analytic collision sum in
    mid-range annuli: agreement within statistical error plus the small
    finite-step bias (|z| <= 3 and 5% relative)."""
    step = 20.0 / math.sqrt(0.3)
    params = _params(_OUTDOOR_A, _OUTDOOR_P, 1.0)
    model = _MODELS["rw"]
    config = SimConfig(n_rays=n_rays, max_collisions=120, seed=seed,
                       loss_model=DeterministicLoss(1.0))
    walk = FixedStepWalk(step)
    details = []
    ok = True
    for mult in (3.5, 4.0, 4.5):
        r = mult * step
        est = empirical_power(walk, (0.0, 0.0), (r, 0.6 * step), config)
        series = mean_power_series(r, model, params)
        z = (est.power_w - series.power_w) / est.stderr
        rel = (est.power_w - series.power_w) / series.power_w
        good = abs(z) <= 3.0 and abs(rel) <= 0.05
        ok = ok and good
        details.append(
            f"r={mult:g}d: MC 95% CI [{est.ci95[0]:.3e}, {est.ci95[1]:.3e}] "
            f"vs sum {series.power_w:.3e} (z={z:+.2f}, rel={rel:+.3%})")
    return CheckResult("Monte Carlo power vs collision sum", ok,
                       "; ".join(details))


def run_monte_carlo_checks(n_rays: int = 100_000,
                           seed: int = 42) -> list[CheckResult]:
    return [
        check_walk_limit(n_rays=n_rays, seed=seed),
        check_escape_bias(seed=seed),
        check_mean_free_path(seed=seed),
        check_empirical_power(n_rays=max(10_000, n_rays // 2), seed=seed),
    ]
