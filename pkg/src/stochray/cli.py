"""Command-line front end.

Subcommands: predict, validate, fit, simulate, lattice.  All parameters can
come from a flat key=value config file (via --config, '#' starts a comment);
command-line flags override file values, which override preset values.

Exit codes: 0 success, 2 configuration error, 3 domain error (a parameter
violates a model guard), 4 validation-check failure, 5 I/O or file-format
error.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import plotting
from .calibrate import (
    CsvFormatError,
    fit_reflection_loss,
    predict_at_distances,
    read_measurements,
    suggest_reflection_loss,
)
from .distributions import (
    RayModel,
    collision_profile,
    pdf_generic,
    pdf_random_walk,
    write_collision_profile_csv,
)
from .errors import ConfigError, DomainError, NonConvergence, StochrayError
from .lattice import (
    LatticeSpec,
    generate_lattice,
    lattice_from_text,
    lattice_to_text,
)
from .montecarlo import (
    DeterministicLoss,
    SimConfig,
    UniformLoss,
    empirical_collision_density,
    empirical_power,
    mean_free_path,
    nearest_open_cell_center,
    write_histogram_csv,
    write_power_estimates_csv,
)
from .pathloss import (
    ROUTES,
    ChannelParams,
    mean_power_series,
    path_loss_curve,
    write_curve_csv,
)
from .validate import run_analytic_checks, run_monte_carlo_checks

MODEL_CHOICES = ("rw", "g05", "g10")

PRESETS = {
    "outdoor-prati": {
        "a": 20.0, "p": 0.7,
        "r_start": 20.0, "r_stop": 500.0, "r_count": 40, "r_scale": "log",
        "loss_by_model": {"rw": 3.5, "g05": 5.5, "g10": 7.5},
    },
    "indoor-60ghz": {
        "a": 2.0, "p": 0.82,
        "r_start": 2.0, "r_stop": 30.0, "r_count": 30, "r_scale": "log",
        "loss_by_model": {"rw": 6.0, "g05": 7.0, "g10": 8.0},
    },
}

_CONFIG_TYPES = {
    "model": str, "route": str, "preset": str, "r_scale": str, "out": str,
    "a": float, "p": float, "L": float,
    "r_start": float, "r_stop": float, "r_count": int,
    "seed": int, "n_grid": int,
}


def _model_from_label(label: str) -> RayModel:
    if label == "rw":
        return RayModel.random_walk()
    if label == "g05":
        return RayModel.generic(0.5)
    if label == "g10":
        return RayModel.generic(1.0)
    raise ConfigError(f"unknown model {label!r}; expected rw, g05 or g10")


def load_config_file(path: str | Path) -> dict:
    values: dict = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, "
                                  f"got {line!r}")
            key, _, val = line.partition("=")
            key = key.strip()
            if key not in _CONFIG_TYPES:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            try:
                values[key] = _CONFIG_TYPES[key](val.strip())
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: "
                                  f"{val.strip()!r}")
    return values


class Settings:
    """Layered configuration: defaults < preset < config file < flags."""

    def __init__(self, args: argparse.Namespace):
        self.values: dict = {
            "model": "all", "route": "closed",
            "r_start": 20.0, "r_stop": 500.0, "r_count": 40, "r_scale": "log",
            "seed": 42, "n_grid": 200,
        }
        self.loss_by_model: dict[str, float] = {}
        file_values = {}
        if getattr(args, "config", None):
            file_values = load_config_file(args.config)
        preset_name = getattr(args, "preset", None) or file_values.get("preset")
        if preset_name:
            try:
                preset = PRESETS[preset_name]
            except KeyError:
                raise ConfigError(
                    f"unknown preset {preset_name!r}; "
                    f"available: {', '.join(sorted(PRESETS))}")
            self.loss_by_model = dict(preset["loss_by_model"])
            self.values.update({k: v for k, v in preset.items()
                                if k != "loss_by_model"})
        self.values.update({k: v for k, v in file_values.items()
                            if k != "preset"})
        for key in _CONFIG_TYPES:
            flag = getattr(args, key, None)
            if flag is not None:
                self.values[key] = flag

    def get(self, key, default=None):
        return self.values.get(key, default)

    def require(self, key: str):
        if key not in self.values:
            raise ConfigError(f"missing required parameter {key!r} "
                              "(set a flag, config entry or preset)")
        return self.values[key]

    def model_labels(self) -> list[str]:
        model = self.get("model", "all")
        if model == "all":
            return list(MODEL_CHOICES)
        if model not in MODEL_CHOICES:
            raise ConfigError(f"unknown model {model!r}")
        return [model]

    def loss_for(self, label: str) -> float:
        if "L" in self.values:
            return float(self.values["L"])
        if label in self.loss_by_model:
            return self.loss_by_model[label]
        lo, hi = suggest_reflection_loss(_model_from_label(label))
        return 0.5 * (lo + hi)

    def channel_for(self, label: str) -> ChannelParams:
        return ChannelParams(cell_side_a=float(self.require("a")),
                             open_prob_p=float(self.require("p")),
                             reflection_loss_db=self.loss_for(label))

    def r_grid(self) -> np.ndarray:
        start = float(self.get("r_start"))
        stop = float(self.get("r_stop"))
        count = int(self.get("r_count"))
        scale = self.get("r_scale", "log")
        if count < 2 or stop <= start:
            raise ConfigError("range grid needs r_stop > r_start and "
                              "r_count >= 2")
        if scale == "log":
            return np.geomspace(start, stop, count)
        if scale == "linear":
            return np.linspace(start, stop, count)
        raise ConfigError(f"unknown r_scale {scale!r}; use linear or log")

    def routes(self) -> list[str]:
        route = self.get("route", "closed")
        if route == "all":
            return list(ROUTES)
        if route not in ROUTES:
            raise ConfigError(f"unknown route {route!r}")
        return [route]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_predict(args: argparse.Namespace) -> int:
    settings = Settings(args)
    out = Path(settings.get("out") or "curves.csv")
    grid = settings.r_grid()
    measured = read_measurements(args.measurements) if args.measurements else None
    all_results = []
    curves_for_plot: dict[str, list] = {}
    table_rows = []
    for label in settings.model_labels():
        model = _model_from_label(label)
        params = settings.channel_for(label)
        for route in settings.routes():
            curve = path_loss_curve(grid, model, params, route)
            if measured is not None and measured.calibration_ref_m is not None:
                ref_d, ref_pl = measured.reference_point()
                pred_ref = path_loss_curve(
                    [ref_d], model, params, route)[0].path_loss_db
                offset = ref_pl - pred_ref
                curve = [
                    type(pr)(r_m=pr.r_m, model=pr.model, route=pr.route,
                             power_w=pr.power_w * 10.0 ** (-offset / 10.0),
                             path_loss_db=pr.path_loss_db + offset,
                             regime_ok=pr.regime_ok)
                    for pr in curve]
            all_results.extend(curve)
            curves_for_plot[f"{label}/{route}"] = curve
            table_rows.append(
                f"{label:<6} {route:<11} {params.reflection_loss_db:>5.2f} "
                f"{curve[0].path_loss_db:>13.2f} "
                f"{curve[-1].path_loss_db:>12.2f}")
    print(f"{'model':<6} {'route':<11} {'L_dB':>5} "
          f"{'PL(first) dB':>13} {'PL(last) dB':>12}")
    for row in table_rows:
        print(row)
    write_curve_csv(out, all_results)
    print(f"wrote {out}")
    if not args.no_figures:
        fig = plotting.plot_curves(curves_for_plot, out.with_suffix(".png"))
        print(f"wrote {fig}")
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    settings = Settings(args)
    checks = run_analytic_checks()
    if args.mc:
        checks += run_monte_carlo_checks(n_rays=args.rays,
                                         seed=int(settings.get("seed")))
    lines = [c.line() for c in checks]
    for line in lines:
        print(line)
    n_failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - n_failed}/{len(checks)} checks passed")
    out = settings.get("out")
    if out:
        Path(out).write_text("\n".join(lines) + "\n")
        print(f"wrote {out}")
    return 4 if n_failed else 0


def cmd_fit(args: argparse.Namespace) -> int:
    settings = Settings(args)
    measured = read_measurements(args.measurements)
    a = float(settings.require("a"))
    p = float(settings.require("p"))
    route = settings.routes()[0]
    loss_range = (args.loss_min, args.loss_max)
    rows = []
    predictions: dict[str, np.ndarray] = {}
    for label in settings.model_labels():
        model = _model_from_label(label)
        loss_best, sigma = fit_reflection_loss(measured, model, a, p,
                                               loss_range, route)
        params = _quiet_channel(a, p, loss_best)
        pred = predict_at_distances(measured, model, params, route)
        predictions[f"{label} (L={loss_best:.2f})"] = pred
        rows.append((sigma, label, loss_best))
    rows.sort()
    print(f"{'model':<6} {'L_best_dB':>10} {'sigma_dB':>9}")
    for sigma, label, loss_best in rows:
        print(f"{label:<6} {loss_best:>10.3f} {sigma:>9.4f}")
    out = settings.get("out")
    if out:
        out = Path(out)
        with open(out, "w") as fh:
            fh.write("distance_m,measured_db,"
                     + ",".join(f"predicted_{lbl.split()[0]}_db"
                                for lbl in predictions) + "\n")
            preds = list(predictions.values())
            for j, (d, pl) in enumerate(measured.points):
                fh.write(f"{d:.6g},{pl:.4f},"
                         + ",".join(f"{pr[j]:.4f}" for pr in preds) + "\n")
        print(f"wrote {out}")
        if not args.no_figures:
            fig = plotting.plot_fit(measured, predictions,
                                    out.with_suffix(".png"))
            print(f"wrote {fig}")
    return 0


def _quiet_channel(a: float, p: float, loss: float) -> ChannelParams:
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return ChannelParams(cell_side_a=a, open_prob_p=p,
                             reflection_loss_db=loss)


def cmd_simulate(args: argparse.Namespace) -> int:
    settings = Settings(args)
    seed = int(settings.get("seed"))
    if args.lattice_file:
        lat = lattice_from_text(Path(args.lattice_file).read_text())
        a, p = lat.spec.cell_side_a, lat.spec.open_prob_p
        n_grid = lat.spec.grid_size_N
    else:
        a = float(settings.require("a"))
        p = float(settings.require("p"))
        n_grid = int(settings.get("n_grid"))
        lat = generate_lattice(LatticeSpec(a, p, n_grid, seed))
    source = nearest_open_cell_center(lat)
    label = settings.model_labels()[0] if settings.get("model") != "all" else "rw"
    model = _model_from_label(label)
    loss = settings.loss_for(label)
    loss_model = (UniformLoss(loss - args.loss_spread, loss + args.loss_spread)
                  if args.loss_spread > 0 else DeterministicLoss(loss))
    config = SimConfig(n_rays=args.rays, max_collisions=args.max_collisions,
                       seed=seed, loss_model=loss_model)
    mfp, n_seg = mean_free_path(lat, source, config)
    d_bar = lat.spec.cell_side_a / math.sqrt(1.0 - p)
    print(f"lattice N={n_grid} a={a} p={p} seed={seed}; source {source}")
    print(f"mean free path {mfp:.2f} m over {n_seg} flights "
          f"(obstacle spacing {d_bar:.2f} m, ratio {mfp / d_bar:.3f})")
    i = args.collision_index
    edges = np.linspace(0.0, n_grid * a / 2.0, args.bins + 1)
    hist = empirical_collision_density(lat, source, i, config, edges)
    print(f"collision {i}: {hist.n_samples} samples, escape fraction "
          f"{hist.escape_fraction:.4f}")
    d_i = d_bar * i ** model.beta
    reference = (lambda r: pdf_random_walk(r, d_i)) if label == "rw" \
        else (lambda r: pdf_generic(r, d_i))
    out = Path(settings.get("out") or "histogram.csv")
    write_histogram_csv(out, hist, reference)
    print(f"wrote {out}")
    if not args.no_figures:
        fig = plotting.plot_histogram(hist, out.with_suffix(".png"), reference,
                                      reference_label=f"{label} density")
        print(f"wrote {fig}")
    if args.annulus_r is not None:
        dr = args.annulus_dr if args.annulus_dr else 0.5 * d_bar
        est = empirical_power(lat, source, (args.annulus_r, dr), config)
        print(f"empirical power at r={args.annulus_r:g} m: "
              f"{est.power_w:.4e} +- {est.stderr:.1e} W "
              f"(95% CI [{est.ci95[0]:.4e}, {est.ci95[1]:.4e}])")
        series = mean_power_series(args.annulus_r, model,
                                   _quiet_channel(a, p, loss))
        print(f"collision-sum prediction: {series.power_w:.4e} W "
              f"(PL {series.path_loss_db:.2f} dB)")
        print("note: the analytic reference assumes flights of the nominal "
              f"obstacle spacing {d_bar:.1f} m; traced flights average "
              f"{mfp:.1f} m, so an O(1) systematic gap is expected")
        power_csv = out.with_name(out.stem + "_power.csv")
        write_power_estimates_csv(power_csv, [est], [series.power_w])
        print(f"wrote {power_csv}")
    return 0


def cmd_lattice(args: argparse.Namespace) -> int:
    settings = Settings(args)
    spec = LatticeSpec(cell_side_a=float(settings.require("a")),
                       open_prob_p=float(settings.require("p")),
                       grid_size_N=int(settings.get("n_grid")),
                       seed=int(settings.get("seed")))
    lat = generate_lattice(spec)
    out = Path(settings.get("out") or "lattice.txt")
    out.write_text(lattice_to_text(lat))
    print(f"wrote {out} (open fraction {lat.realized_open_fraction:.4f})")
    if not args.no_figures:
        fig = plotting.plot_lattice(lat, out.with_suffix(".png"))
        print(f"wrote {fig}")
    if args.profile_r is not None:
        d_bar = spec.cell_side_a / math.sqrt(1.0 - spec.open_prob_p)
        profiles = {}
        for label in settings.model_labels():
            model = _model_from_label(label)
            profiles[label] = collision_profile(args.profile_r, model, d_bar,
                                                args.profile_imax)
            csv_path = out.with_name(f"{out.stem}_profile_{label}.csv")
            write_collision_profile_csv(csv_path, profiles[label])
            print(f"wrote {csv_path}")
        if not args.no_figures:
            fig = plotting.plot_collision_profile(
                profiles, out.with_name(out.stem + "_profile.png"),
                args.profile_r)
            print(f"wrote {fig}")
    return 0


# ---------------------------------------------------------------------------
# parser / dispatch
# ---------------------------------------------------------------------------

def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="flat key=value config file")
    sub.add_argument("--preset", choices=sorted(PRESETS),
                     help="named parameter set")
    sub.add_argument("--model", choices=MODEL_CHOICES + ("all",),
                     help="ray model (default all)")
    sub.add_argument("--route", choices=ROUTES + ("all",),
                     help="evaluation route (default closed)")
    sub.add_argument("--a", type=float, help="cell side in meters")
    sub.add_argument("--p", type=float, help="open probability in [0, 1)")
    sub.add_argument("--L", type=float, help="reflection loss in dB")
    sub.add_argument("--r-start", dest="r_start", type=float)
    sub.add_argument("--r-stop", dest="r_stop", type=float)
    sub.add_argument("--r-count", dest="r_count", type=int)
    sub.add_argument("--r-scale", dest="r_scale", choices=("linear", "log"))
    sub.add_argument("--seed", type=int)
    sub.add_argument("--out", help="output path")
    sub.add_argument("--n-grid", dest="n_grid", type=int,
                     help="lattice cells per side")
    sub.add_argument("--no-figures", action="store_true",
                     help="skip PNG rendering")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stochray",
        description="Path-loss prediction for random-lattice channels "
                    "via stochastic rays")
    subs = parser.add_subparsers(dest="command", required=True)

    p_predict = subs.add_parser("predict", help="evaluate path-loss curves")
    _add_common(p_predict)
    p_predict.add_argument("--measurements",
                           help="CSV whose '# ref=' line calibrates curves")
    p_predict.set_defaults(func=cmd_predict)

    p_validate = subs.add_parser("validate", help="run cross-checks")
    _add_common(p_validate)
    p_validate.add_argument("--mc", action="store_true",
                            help="include Monte Carlo checks")
    p_validate.add_argument("--rays", type=int, default=100_000)
    p_validate.set_defaults(func=cmd_validate)

    p_fit = subs.add_parser("fit", help="fit reflection loss to measurements")
    _add_common(p_fit)
    p_fit.add_argument("measurements", help="measurement CSV")
    p_fit.add_argument("--loss-min", type=float, default=1.0)
    p_fit.add_argument("--loss-max", type=float, default=10.0)
    p_fit.set_defaults(func=cmd_fit)

    p_sim = subs.add_parser("simulate", help="Monte Carlo ray tracing")
    _add_common(p_sim)
    p_sim.add_argument("--lattice-file", dest="lattice_file",
                       help="trace through a saved lattice fixture instead "
                            "of generating one")
    p_sim.add_argument("--rays", type=int, default=20_000)
    p_sim.add_argument("--max-collisions", type=int, default=12)
    p_sim.add_argument("--collision-index", "-i", type=int, default=5,
                       help="collision count for the radial histogram")
    p_sim.add_argument("--bins", type=int, default=24)
    p_sim.add_argument("--loss-spread", type=float, default=0.0,
                       help="draw per-collision loss uniformly within "
                            "+-spread dB of L")
    p_sim.add_argument("--annulus-r", type=float,
                       help="also estimate power in an annulus at this range")
    p_sim.add_argument("--annulus-dr", type=float)
    p_sim.set_defaults(func=cmd_simulate)

    p_lat = subs.add_parser("lattice", help="emit a lattice fixture")
    _add_common(p_lat)
    p_lat.add_argument("--profile-r", type=float,
                       help="also emit a collision-count density profile "
                            "at this range")
    p_lat.add_argument("--profile-imax", type=int, default=100)
    p_lat.set_defaults(func=cmd_lattice)
    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DomainError, NonConvergence) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except CsvFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5
    except StochrayError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
