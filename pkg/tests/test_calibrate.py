import math
import warnings

import numpy as np
import pytest

from stochray import calibrate as cal
from stochray.distributions import RayModel
from stochray.errors import (
    DomainError,
    LengthMismatch,
    MissingSpacing,
)
from stochray.lattice import mean_obstacle_spacing
from stochray.pathloss import ChannelParams, mean_power_closed

RW = RayModel.random_walk()
G05 = RayModel.generic(0.5)
G10 = RayModel.generic(1.0)


def quiet_params(a, p, loss):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return ChannelParams(cell_side_a=a, open_prob_p=p,
                             reflection_loss_db=loss)


def synthetic(model, params, distances, ref=None):
    points = tuple((float(d),
                    mean_power_closed(float(d), model, params).path_loss_db)
                   for d in distances)
    return cal.MeasurementSet(points=points, calibration_ref_m=ref)


class TestDeriveLatticeParams:
    def test_outdoor_inverse(self):
        env = cal.EnvironmentDescription(obstacle_area_fraction=0.3,
                                         mean_obstacle_gap_m=36.51484)
        a, p = cal.derive_lattice_params(env)
        assert p == pytest.approx(0.7)
        assert a == pytest.approx(20.0, abs=1e-4)

    def test_indoor_inverse(self):
        env = cal.EnvironmentDescription(obstacle_area_fraction=0.18,
                                         mean_obstacle_gap_m=4.714)
        a, p = cal.derive_lattice_params(env)
        assert p == pytest.approx(0.82)
        assert a == pytest.approx(2.0, abs=1e-3)

    def test_degenerate_open_world_rejected_downstream(self):
        env = cal.EnvironmentDescription(obstacle_area_fraction=0.0,
                                         mean_obstacle_gap_m=10.0)
        _, p = cal.derive_lattice_params(env)
        assert p == 1.0
        with pytest.raises(DomainError):
            mean_obstacle_spacing(2.0, p)

    def test_direct_cell_side_wins(self):
        env = cal.EnvironmentDescription(obstacle_area_fraction=0.3)
        a, p = cal.derive_lattice_params(env, cell_side_a=5.0)
        assert (a, p) == (5.0, 0.7)

    def test_missing_spacing(self):
        env = cal.EnvironmentDescription(obstacle_area_fraction=0.3)
        with pytest.raises(MissingSpacing):
            cal.derive_lattice_params(env)


class TestSuggestReflectionLoss:
    def test_contains_published_anchors(self):
        lo, hi = cal.suggest_reflection_loss(RW, "sub6ghz")
        assert lo <= 3.5 <= hi
        lo, hi = cal.suggest_reflection_loss(G05, "sub6ghz")
        assert lo <= 5.5 <= hi
        lo, hi = cal.suggest_reflection_loss(G10, "sub6ghz")
        assert lo <= 7.5 <= hi
        lo, hi = cal.suggest_reflection_loss(RW, "mmwave")
        assert lo <= 6.0 <= hi
        lo, hi = cal.suggest_reflection_loss(G05, "mmwave")
        assert lo <= 7.0 <= hi
        lo, hi = cal.suggest_reflection_loss(G10, "mmwave")
        assert lo <= 8.0 <= hi

    def test_upper_ends_ordered_by_anomaly(self):
        for band in ("sub6ghz", "mmwave"):
            his = [cal.suggest_reflection_loss(m, band)[1]
                   for m in (RW, G05, G10)]
            assert his[0] <= his[1] <= his[2]

    def test_mmwave_above_sub6(self):
        for model in (RW, G05, G10):
            assert cal.suggest_reflection_loss(model, "mmwave")[0] \
                > cal.suggest_reflection_loss(model, "sub6ghz")[0]

    def test_unknown_band(self):
        with pytest.raises(DomainError):
            cal.suggest_reflection_loss(RW, "terahertz")


class TestRmsError:
    def _ms(self, pls):
        return cal.MeasurementSet(points=tuple((float(i + 1), pl)
                                               for i, pl in enumerate(pls)))

    def test_identical_is_zero(self):
        ms = self._ms([10.0, 20.0, 30.0])
        assert cal.rms_error(ms, [10.0, 20.0, 30.0]) == 0.0

    def test_constant_offset(self):
        ms = self._ms([10.0, 20.0, 30.0])
        assert cal.rms_error(ms, [12.5, 22.5, 32.5]) == pytest.approx(2.5)
        assert cal.rms_error(ms, [7.5, 17.5, 27.5]) == pytest.approx(2.5)

    def test_mixed_example(self):
        ms = self._ms([10.0, 20.0, 30.0])
        assert cal.rms_error(ms, [11.0, 19.0, 33.0]) \
            == pytest.approx(math.sqrt(11.0 / 3.0))
        assert cal.rms_error(ms, [11.0, 19.0, 33.0]) \
            == pytest.approx(1.91485, abs=1e-5)

    def test_length_mismatch(self):
        ms = self._ms([10.0, 20.0, 30.0])
        with pytest.raises(LengthMismatch):
            cal.rms_error(ms, [10.0, 20.0])

    def test_needs_two_points(self):
        ms = cal.MeasurementSet(points=((5.0, 50.0),))
        with pytest.raises(DomainError):
            cal.rms_error(ms, [50.0])


class TestFitReflectionLoss:
    DISTANCES = np.geomspace(100.0, 500.0, 10)

    def test_noiseless_round_trip(self):
        params = quiet_params(20.0, 0.7, 3.5)
        measured = synthetic(RW, params, self.DISTANCES)
        loss, sigma = cal.fit_reflection_loss(measured, RW, 20.0, 0.7,
                                              (1.0, 10.0))
        assert loss == pytest.approx(3.5, abs=1e-6)
        assert sigma < 1e-6

    def test_noisy_recovery_order_of_magnitude(self):
        params = quiet_params(20.0, 0.7, 3.5)
        clean = synthetic(RW, params, self.DISTANCES)
        rng = np.random.default_rng(42)
        noisy = cal.MeasurementSet(points=tuple(
            (d, pl + float(rng.normal(0.0, 1.0))) for d, pl in clean.points))
        loss, sigma = cal.fit_reflection_loss(noisy, RW, 20.0, 0.7,
                                              (1.0, 10.0))
        assert loss == pytest.approx(3.5, abs=0.5)
        assert 0.3 < sigma < 3.0      # same order as the injected 1 dB

    def test_reference_calibration_round_trip(self):
        # offsetting at the reference distance must not break recovery
        params = quiet_params(2.0, 0.82, 7.0)
        measured = synthetic(G05, params, np.geomspace(2.0, 30.0, 12),
                             ref=1.5)
        loss, sigma = cal.fit_reflection_loss(measured, G05, 2.0, 0.82,
                                              (1.0, 10.0))
        assert loss == pytest.approx(7.0, abs=1e-6)
        assert sigma < 1e-6

    def test_empty_range_rejected(self):
        params = quiet_params(20.0, 0.7, 3.5)
        measured = synthetic(RW, params, self.DISTANCES)
        with pytest.raises(DomainError):
            cal.fit_reflection_loss(measured, RW, 20.0, 0.7, (5.0, 5.0))
        with pytest.raises(DomainError):
            cal.fit_reflection_loss(measured, RW, 20.0, 0.7, (0.1, 5.0))


class TestPredictAtDistances:
    def test_reference_offset_anchors_prediction(self):
        params = quiet_params(2.0, 0.82, 7.0)
        distances = np.geomspace(1.5, 30.0, 8)
        measured = synthetic(G05, params, distances, ref=1.5)
        shifted = cal.MeasurementSet(
            points=tuple((d, pl + 12.0) for d, pl in measured.points),
            calibration_ref_m=1.5)
        pred = cal.predict_at_distances(shifted, G05, params)
        # anchored at the reference point, the constant shift drops out
        assert pred[0] == pytest.approx(shifted.points[0][1])
        assert cal.rms_error(shifted, pred) < 1e-9


class TestSensitivitySweep:
    R_GRID = [100.0, 200.0, 400.0]

    def test_zero_delta_identity(self):
        base = quiet_params(20.0, 0.7, 3.0)
        sweep = cal.sensitivity_sweep(base, RW, self.R_GRID, 0.0)
        assert all(v == 0.0 for v in sweep.max_deviation_db.values())

    def test_ten_percent_finite_and_ordered(self):
        base = quiet_params(20.0, 0.7, 3.0)
        sweep = cal.sensitivity_sweep(base, RW, self.R_GRID, 0.10)
        assert set(sweep.max_deviation_db) == {"a", "p", "L"}
        assert all(0.0 < v < 50.0 for v in sweep.max_deviation_db.values())
        # perturbed curve families keep a consistent ordering across r:
        # e.g. larger cell side always means less loss
        base_pl = [pr.path_loss_db for pr in sweep.base]
        a_plus = [pr.path_loss_db for pr in sweep.variants["a+"]]
        a_minus = [pr.path_loss_db for pr in sweep.variants["a-"]]
        assert all(lo < b < hi for lo, b, hi in zip(a_plus, base_pl, a_minus))

    def test_perturbing_p_past_one_rejected(self):
        base = quiet_params(20.0, 0.95, 3.0)
        with pytest.raises(DomainError):
            cal.sensitivity_sweep(base, RW, self.R_GRID, 0.10)


class TestFitDecayShape:
    def test_recovers_pure_shapes(self):
        rs = np.geomspace(100.0, 1000.0, 40)
        for s_true, q_true in ((0.5, 1.0), (1.0 / 3.0, 2.0 / 3.0),
                               (0.75, 0.5)):
            powers = rs ** (-s_true) * np.exp(-0.05 * rs ** q_true) * 1e-3
            q_hat, s_hat = cal.fit_decay_shape(rs, powers)
            assert q_hat == pytest.approx(q_true, rel=1e-3)
            assert s_hat == pytest.approx(s_true, rel=1e-2)

    def test_input_guards(self):
        with pytest.raises(LengthMismatch):
            cal.fit_decay_shape([1.0, 2.0], [1.0])
        with pytest.raises(DomainError):
            cal.fit_decay_shape([1.0, 2.0, 3.0, 4.0], [1.0, -1.0, 1.0, 1.0])


class TestMeasurementCsv:
    def test_round_trip(self, tmp_path):
        ms = cal.MeasurementSet(points=((1.5, 60.0), (10.0, 80.5)),
                                calibration_ref_m=1.5)
        path = tmp_path / "meas.csv"
        cal.write_measurements(path, ms)
        back = cal.read_measurements(path)
        assert back.calibration_ref_m == 1.5
        assert back.points == ms.points

    def test_header_and_comments_skipped(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("# a comment\ndistance_m,path_loss_db\n"
                        "10,55.5\n20,60\n")
        ms = cal.read_measurements(path)
        assert ms.points == ((10.0, 55.5), (20.0, 60.0))
        assert ms.calibration_ref_m is None

    def test_malformed_row_names_line(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("distance_m,path_loss_db\n10,55.5\noops\n")
        with pytest.raises(cal.CsvFormatError, match=":3"):
            cal.read_measurements(path)

    def test_non_numeric_row(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("10,abc\n")
        with pytest.raises(cal.CsvFormatError, match=":1"):
            cal.read_measurements(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("# nothing\n")
        with pytest.raises(cal.CsvFormatError):
            cal.read_measurements(path)
