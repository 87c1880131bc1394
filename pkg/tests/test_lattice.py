import math

import numpy as np
import pytest

from stochray import lattice as lat
from stochray.errors import DomainError


class TestGenerateLattice:
    def test_all_open_at_p_one(self):
        grid = lat.generate_lattice(lat.LatticeSpec(2.0, 1.0, 10, 123))
        assert grid.occupancy.all()
        assert grid.realized_open_fraction == 1.0

    def test_all_closed_at_p_zero(self):
        grid = lat.generate_lattice(lat.LatticeSpec(2.0, 0.0, 10, 123))
        assert not grid.occupancy.any()

    def test_realized_fraction_within_binomial_band(self):
        # 4 sigma band: sigma = sqrt(0.7*0.3/200^2 cells) = 0.00229
        grid = lat.generate_lattice(lat.LatticeSpec(2.0, 0.7, 200, 42))
        assert abs(grid.realized_open_fraction - 0.7) < 0.013

    def test_deterministic_given_spec(self):
        spec = lat.LatticeSpec(2.0, 0.55, 64, 99)
        a = lat.generate_lattice(spec)
        b = lat.generate_lattice(spec)
        assert np.array_equal(a.occupancy, b.occupancy)

    def test_seed_changes_grid(self):
        a = lat.generate_lattice(lat.LatticeSpec(2.0, 0.55, 64, 1))
        b = lat.generate_lattice(lat.LatticeSpec(2.0, 0.55, 64, 2))
        assert not np.array_equal(a.occupancy, b.occupancy)

    def test_occupancy_immutable(self):
        grid = lat.generate_lattice(lat.LatticeSpec(2.0, 0.5, 8, 0))
        with pytest.raises(ValueError):
            grid.occupancy[0, 0] = True

    def test_mean_fraction_over_seeds(self):
        # lighter version of the 100-seed acceptance statistic
        for p in (0.3, 0.9):
            fracs = [lat.generate_lattice(lat.LatticeSpec(2.0, p, 200, s)
                                          ).realized_open_fraction
                     for s in range(20)]
            assert abs(float(np.mean(fracs)) - p) < 0.003

    @pytest.mark.parametrize("bad", [
        dict(cell_side_a=0.0, open_prob_p=0.5, grid_size_N=4, seed=0),
        dict(cell_side_a=1.0, open_prob_p=1.5, grid_size_N=4, seed=0),
        dict(cell_side_a=1.0, open_prob_p=0.5, grid_size_N=0, seed=0),
    ])
    def test_spec_validation(self, bad):
        with pytest.raises(DomainError):
            lat.LatticeSpec(**bad)


class TestMeanObstacleSpacing:
    def test_quarter_closed(self):
        assert lat.mean_obstacle_spacing(2.0, 0.75) == pytest.approx(4.0)

    def test_fully_closed_limit(self):
        assert lat.mean_obstacle_spacing(1.0, 0.0) == pytest.approx(1.0)

    def test_outdoor_value(self):
        # area balance: N^2 (1-p) d^2 = (N a)^2
        assert lat.mean_obstacle_spacing(20.0, 0.7) \
            == pytest.approx(20.0 / math.sqrt(0.3), rel=1e-12)
        assert lat.mean_obstacle_spacing(20.0, 0.7) \
            == pytest.approx(36.51484, abs=5e-5)

    def test_rejects_p_one(self):
        with pytest.raises(DomainError):
            lat.mean_obstacle_spacing(2.0, 1.0)

    def test_monotone_in_p_linear_in_a(self):
        ps = np.linspace(0.0, 0.95, 12)
        vals = [lat.mean_obstacle_spacing(3.0, float(p)) for p in ps]
        assert all(b > a for a, b in zip(vals, vals[1:]))
        assert lat.mean_obstacle_spacing(6.0, 0.5) \
            == pytest.approx(2 * lat.mean_obstacle_spacing(3.0, 0.5))


class TestRegime:
    def test_supercritical(self):
        assert lat.classify_regime(0.7).regime is lat.Regime.SUPERCRITICAL

    def test_subcritical(self):
        assert lat.classify_regime(0.3).regime is lat.Regime.SUBCRITICAL

    def test_boundary_is_subcritical(self):
        res = lat.classify_regime(lat.PERCOLATION_THRESHOLD)
        assert res.regime is lat.Regime.SUBCRITICAL
        assert res.threshold_pc == pytest.approx(0.59275)


class TestTextFixture:
    def test_round_trip(self):
        grid = lat.generate_lattice(lat.LatticeSpec(2.5, 0.6, 12, 77))
        text = lat.lattice_to_text(grid)
        back = lat.lattice_from_text(text)
        assert back.spec == grid.spec
        assert np.array_equal(back.occupancy, grid.occupancy)
        assert back.realized_open_fraction == grid.realized_open_fraction

    def test_header_format(self):
        grid = lat.generate_lattice(lat.LatticeSpec(2.0, 1.0, 3, 5))
        lines = lat.lattice_to_text(grid).splitlines()
        assert lines[0] == "a=2.0 p=1.0 N=3 seed=5"
        assert lines[1:] == ["...", "...", "..."]

    def test_rejects_corrupt_body(self):
        with pytest.raises(DomainError):
            lat.lattice_from_text("a=1.0 p=0.5 N=3 seed=0\n..\n..\n..")
