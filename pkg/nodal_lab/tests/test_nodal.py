"""Tests for nodal measurement, density and the Yau experiment."""
import logging
import math
from types import SimpleNamespace

import pytest

from nodal_lab.errors import BudgetExceeded, NotAZero, PreconditionError
from nodal_lab.field import evaluate, make_harmonic_polynomial, make_torus_eigenfunction, sine_product_modes
from nodal_lab.models.field import BallSpec
from nodal_lab.nodal import (
    density_check,
    f_ratio_experiment,
    hyperplane_nodal_measure,
    lift_zero_slices,
    naive_lower_bound_check,
    nodal_measure,
    yau_experiment,
)

UNIT_DISK = BallSpec(center=[0.0, 0.0], radius=1.0)
UNIT_BALL = BallSpec(center=[0.0, 0.0, 0.0], radius=1.0)


def re_z(d):
    return make_harmonic_polynomial(2, [{"degree": d, "part": "cos", "weight": 1.0}])


class TestNodalMeasure:
    """Tests for lattice nodal measurement."""

    def test_rays_of_re_z8(self):
        """Test that the 8 nodal lines of Re z^8 have length 16 in the unit disk."""
        estimate = nodal_measure(re_z(8), UNIT_DISK, cell_size=1 / 64)
        assert estimate.measure == pytest.approx(16.0, rel=0.01)
        assert estimate.converged
        assert estimate.refinement_history[0][0] == pytest.approx(1 / 64)

    def test_plane_in_unit_ball(self):
        """Test that x1 = 0 cuts a disk of area pi from the unit ball."""
        f = make_harmonic_polynomial(3, [{"degree": 1, "order": 1, "weight": 2 * math.sqrt(math.pi / 3)}])
        assert nodal_measure(f, UNIT_BALL).measure == pytest.approx(math.pi, rel=0.01)

    @pytest.mark.slow
    def test_crossing_planes_in_unit_ball(self):
        """Test that x1 x2 = 0 cuts two disks of total area 2 pi."""
        f = make_harmonic_polynomial(
            3, [{"degree": 2, "order": 2, "part": "sin", "weight": 2 * math.sqrt(math.pi / 15)}]
        )
        estimate = nodal_measure(f, UNIT_BALL, cell_size=1 / 64)
        assert estimate.cell_size <= 1 / 64
        assert estimate.measure == pytest.approx(2 * math.pi, rel=0.01)

    def test_off_center_line(self):
        """Test a single chord of the disk."""
        f = make_torus_eigenfunction(2, [{"k": [1, 0]}])
        region = BallSpec(center=[0.4, 0.1], radius=0.5)
        expected = 2 * math.sqrt(0.25 - 0.16)
        assert nodal_measure(f, region).measure == pytest.approx(expected, rel=0.01)

    def test_sign_definite_field(self):
        """Test that u=1 has an empty zero set."""
        constant = make_harmonic_polynomial(2, [{"degree": 0, "part": "cos", "weight": 1.0}])
        estimate = nodal_measure(constant, UNIT_DISK)
        assert estimate.measure == 0.0
        assert estimate.converged

    def test_budget(self):
        """Test that an initial lattice past the budget raises."""
        with pytest.raises(BudgetExceeded):
            nodal_measure(re_z(2), UNIT_DISK, cell_size=1e-4)

    def test_coarse_cell_rejected(self):
        """Test that cells of at least radius/4 are rejected."""
        with pytest.raises(PreconditionError):
            nodal_measure(re_z(2), UNIT_DISK, cell_size=0.3)

    def test_region_dimension_mismatch(self):
        """Test that a 3D region with a planar field is rejected."""
        with pytest.raises(PreconditionError):
            nodal_measure(re_z(2), UNIT_BALL)


class TestHyperplaneMeasure:
    """Tests for the closed-form nodal measure of sine patterns."""

    def test_single_line(self):
        """Test sin(x1) in the unit disk: one diameter."""
        assert hyperplane_nodal_measure("sine", 1, UNIT_DISK) == pytest.approx(2.0)

    def test_cross(self):
        """Test sin(x1) sin(x2) in the unit disk: two diameters."""
        assert hyperplane_nodal_measure("sine-product", 1, UNIT_DISK) == pytest.approx(4.0)

    def test_parallel_planes(self):
        """Test sin(4 x1) in the unit ball: three parallel disks."""
        t = math.pi / 4
        expected = math.pi + 2 * math.pi * (1 - t * t)
        assert hyperplane_nodal_measure("sine", 4, UNIT_BALL) == pytest.approx(expected)

    def test_unknown_pattern(self):
        """Test that an unknown pattern is rejected."""
        with pytest.raises(PreconditionError):
            hyperplane_nodal_measure("cosine", 2, UNIT_DISK)


class TestNaiveBound:
    """Tests for the naive lower bound at a zero."""

    def test_linear_field(self):
        """Test ratio 2, beta 3/2 and sign balls for x1 at the origin."""
        f = re_z(1)
        record = naive_lower_bound_check(f, [0.0, 0.0], 1.0)
        assert record.ratio == pytest.approx(2.0, rel=0.01)
        assert record.beta == pytest.approx(1.5, abs=1e-9)
        assert record.implied_c1 == pytest.approx(3.0, rel=0.01)
        assert record.positive_ball is not None and record.negative_ball is not None
        assert evaluate(f, record.positive_ball.center) > 0
        assert evaluate(f, record.negative_ball.center) < 0

    def test_not_a_zero(self):
        """Test that a point with u != 0 is rejected."""
        with pytest.raises(NotAZero) as info:
            naive_lower_bound_check(re_z(1), [0.5, 0.0], 0.25)
        assert info.value.exit_code == 2


class TestFRatio:
    """Tests for the F(N) experiment."""

    def test_empty_family(self):
        """Test that no degrees give an empty table."""
        table = f_ratio_experiment(2, [], [0, 1])
        assert table.rows == []
        assert table.trend_slope is None

    def test_small_family(self):
        """Test one row per (degree, seed) with positive ratios through the zero at 0."""
        table = f_ratio_experiment(2, [3, 1], [0, 1])
        assert [(r.degree, r.seed) for r in table.rows] == [(1, 0), (1, 1), (3, 0), (3, 1)]
        assert all(r.ratio > 0 for r in table.rows)
        assert table.min_ratio == min(r.ratio for r in table.rows)
        assert table.low_degree_min == min(r.ratio for r in table.rows if r.degree == 1)

    def test_floor_failure_is_logged(self, monkeypatch, caplog):
        """Test that a higher degree falling below the lowest-degree minimum logs a warning."""
        measures = iter([2.0, 1.0])
        monkeypatch.setattr(
            "nodal_lab.nodal.nodal_measure", lambda f, region, cell_size=None: SimpleNamespace(measure=next(measures))
        )
        with caplog.at_level(logging.WARNING, logger="nodal_lab.nodal"):
            table = f_ratio_experiment(2, [1, 2], [0])
        assert [r.ratio for r in table.rows] == [2.0, 1.0]
        assert not table.floor_holds
        assert "F-ratio floor fails" in caplog.text


class TestDensity:
    """Tests for the nodal density check on the torus."""

    def test_parallel_lines(self):
        """Test that sin(4 x1) has max gap pi/8, so C1 = pi/2."""
        u = make_torus_eigenfunction(2, [{"k": [4, 0]}])
        region = BallSpec(center=[math.pi / 8, 0.1], radius=0.5)
        report = density_check(u, region, 49)
        assert report.max_gap == pytest.approx(math.pi / 8, rel=1e-6)
        assert report.implied_C1 == pytest.approx(math.pi / 2, rel=1e-6)

    @pytest.mark.parametrize("k", [4, 5, 10, 20, 40])
    def test_checkerboard(self, k):
        """Test that the sine product peaks at a square center with C1 = pi/sqrt(2) at every k."""
        u = make_torus_eigenfunction(2, sine_product_modes(2, k))
        middle = math.pi / (2 * k)
        report = density_check(u, BallSpec(center=[middle, middle], radius=0.5), 49)
        assert report.max_gap == pytest.approx(middle, rel=1e-6)
        assert report.implied_C1 == pytest.approx(math.pi / math.sqrt(2), rel=1e-6)
        assert report.argmax == pytest.approx([middle, middle], abs=1e-6)

    def test_single_point_on_zero(self):
        """Test that one sample point sitting on the zero set reports gap 0."""
        u = make_torus_eigenfunction(2, [{"k": [4, 0]}])
        report = density_check(u, BallSpec(center=[0.0, 0.0], radius=0.5), 1)
        assert report.probe_count == 1
        assert report.max_gap == 0.0

    def test_needs_torus_eigenfunction(self):
        """Test that harmonic polynomials are rejected."""
        with pytest.raises(PreconditionError):
            density_check(re_z(2), UNIT_DISK, 9)


class TestYau:
    """Tests for the Yau experiment and the harmonic lift."""

    def test_empty_ks(self):
        """Test that an empty k list gives an empty table."""
        assert yau_experiment([], "sine", UNIT_DISK).rows == []

    def test_parallel_lines_stay_in_band(self):
        """Test measure against the closed form and the ratio band for sin(k x1)."""
        region = BallSpec(center=[0.1, 0.2], radius=1.0)
        table = yau_experiment([2, 4], "sine", region)
        assert [r.k for r in table.rows] == [2, 4]
        for row in table.rows:
            assert row.eigenvalue == row.k**2
            assert row.measure == pytest.approx(row.exact, rel=0.02)
            assert row.ratio == pytest.approx(row.measure / row.k)
        assert table.rows[-1].ball_count >= 1
        assert table.band_holds
        assert table.ratio_max / table.ratio_min <= 4.0

    @pytest.mark.slow
    def test_checkerboard_ratio_spread(self):
        """Test prod sin(k x_i) for k up to 40: measures within 5% and ratios within a factor 1.25."""
        region = BallSpec(center=[0.1, 0.2], radius=1.0)
        table = yau_experiment([5, 10, 20, 40], "sine-product", region)
        assert [r.k for r in table.rows] == [5, 10, 20, 40]
        for row in table.rows:
            assert row.eigenvalue == pytest.approx(2 * row.k**2)
            assert row.exact == pytest.approx(hyperplane_nodal_measure("sine-product", row.k, region))
            assert row.measure == pytest.approx(row.exact, rel=0.05)
        assert table.ratio_max / table.ratio_min <= 1.25
        assert table.band_holds

    def test_nonpositive_k(self):
        """Test that k < 1 is rejected."""
        with pytest.raises(PreconditionError):
            yau_experiment([0], "sine", UNIT_DISK)

    def test_lift_preserves_signs(self):
        """Test that h(x, t) has the sign of u(x) on every slice."""
        u = make_torus_eigenfunction(2, [{"k": [3, 4]}])
        assert lift_zero_slices(u, BallSpec(center=[0.3, 0.2], radius=1.0), [0.0, 0.5, 1.0]) == 0


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
