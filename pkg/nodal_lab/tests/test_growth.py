"""Tests for frequency, sup norms and doubling indices."""
import math

import numpy as np
import pytest

from nodal_lab.errors import DomainViolation, PreconditionError, QuadratureFloorError
from nodal_lab.field import make_harmonic_polynomial, make_torus_eigenfunction, random_harmonic_polynomial
from nodal_lab.growth import (
    CandidateTable,
    doubling_index_ball,
    doubling_index_cube,
    doubling_profile,
    frequency_beta,
    frequency_profile,
    sup_norm,
    sup_with_argmax,
    surface_H,
)
from nodal_lab.models.field import BallSpec, CubeSpec

ORIGIN2 = [0.0, 0.0]
ORIGIN3 = [0.0, 0.0, 0.0]


def re_z(d):
    return make_harmonic_polynomial(2, [{"degree": d, "part": "cos", "weight": 1.0}])


def constant3():
    return make_harmonic_polynomial(3, [{"degree": 0, "order": 0, "weight": 2 * math.sqrt(math.pi)}])


def x1_3():
    return make_harmonic_polynomial(3, [{"degree": 1, "order": 1, "weight": 2 * math.sqrt(math.pi / 3)}])


def homogeneous(n, d):
    """Re z^d in the plane, or the degree-d solid harmonic of order d // 2 in R^3."""
    if n == 2:
        return make_harmonic_polynomial(2, [{"degree": d, "part": "cos", "weight": 1.0}])
    return make_harmonic_polynomial(3, [{"degree": d, "order": d // 2, "part": "cos", "weight": 1.0}])


class TestSurfaceIntegrals:
    """Tests for H(x, r) and beta(x, r)."""

    def test_constant_field_gives_sphere_area(self):
        """Test H of u=1 on the sphere of radius 2 in R^3 is 16 pi."""
        assert surface_H(constant3(), ORIGIN3, 2.0) == pytest.approx(16 * math.pi, rel=1e-12)

    def test_linear_field_on_circle(self):
        """Test H of x1 on the unit circle is pi."""
        assert surface_H(re_z(1), ORIGIN2, 1.0) == pytest.approx(math.pi, rel=1e-12)

    @pytest.mark.parametrize("d", [1, 3, 7])
    def test_homogeneous_planar_frequency(self, d):
        """Test beta = d + 1/2 for Re z^d at the origin."""
        assert frequency_beta(re_z(d), ORIGIN2, 0.7) == pytest.approx(d + 0.5, abs=1e-9)

    def test_homogeneous_solid_frequency(self):
        """Test beta = d + 1 for the degree-2 harmonic x1 x2 in R^3."""
        f = make_harmonic_polynomial(3, [{"degree": 2, "order": 2, "part": "sin", "weight": 1.0}])
        assert frequency_beta(f, ORIGIN3, 0.5) == pytest.approx(3.0, abs=1e-9)

    def test_constant_frequency(self):
        """Test beta = 1 for u=1 in R^3."""
        assert frequency_beta(constant3(), ORIGIN3, 1.3) == pytest.approx(1.0, abs=1e-12)

    def test_quadrature_floor(self):
        """Test that an H underflowing the floor raises instead of dividing."""
        with pytest.raises(QuadratureFloorError):
            frequency_beta(re_z(40), ORIGIN2, 1e-4)

    def test_low_quadrature_order_rejected(self):
        """Test that quadrature orders below 8 are rejected."""
        with pytest.raises(PreconditionError):
            surface_H(re_z(1), ORIGIN2, 1.0, order=1)

    def test_sphere_outside_domain(self):
        """Test that spheres reaching past the domain raise."""
        with pytest.raises(DomainViolation):
            surface_H(re_z(1), [3.5, 0.0], 1.0)


class TestHomogeneousClosedForms:
    """Tests for beta and the doubling index of homogeneous harmonics."""

    @pytest.mark.parametrize("r", [0.1, 0.5, 1.0])
    @pytest.mark.parametrize("n", [2, 3])
    @pytest.mark.parametrize("d", range(31))
    def test_frequency_is_degree_plus_half_codimension(self, d, n, r):
        """Test beta(0, r) = d + (n - 1)/2 at every radius."""
        origin = [0.0] * n
        assert frequency_beta(homogeneous(n, d), origin, r) == pytest.approx(d + (n - 1) / 2, abs=1e-6)

    @pytest.mark.parametrize("r", [0.1, 0.5, 1.0])
    @pytest.mark.parametrize("n", [2, 3])
    @pytest.mark.parametrize("d", range(31))
    def test_doubling_index_is_degree(self, d, n, r):
        """Test that the ball doubling index at the origin is d at every radius."""
        origin = [0.0] * n
        assert doubling_index_ball(homogeneous(n, d), origin, r) == pytest.approx(d, abs=1e-6)


class TestFrequencyProfile:
    """Tests for sampled frequency profiles."""

    def test_homogeneous_profile_is_flat(self):
        """Test that every beta sample of Re z^3 equals 3.5."""
        profile = frequency_profile(re_z(3), ORIGIN2, 0.1, 1.0, 8)
        assert len(profile.samples) == 8
        for sample in profile.samples:
            assert sample.beta == pytest.approx(3.5, abs=1e-9)
        assert profile.identity_residual < 1e-8

    def test_profile_is_monotone_for_harmonic_fields(self):
        """Test that beta is nondecreasing in r for a harmonic polynomial."""
        f = random_harmonic_polynomial(2, 6, seed=3)
        profile = frequency_profile(f, [0.2, 0.1], 0.05, 1.5, 16)
        betas = np.array([s.beta for s in profile.samples])
        assert np.all(np.diff(betas) >= -1e-9 * betas[1:])
        assert profile.identity_residual < 1e-4

    @pytest.mark.slow
    @pytest.mark.parametrize("n,degree", [(2, 6), (3, 4)])
    def test_random_profiles_are_monotone(self, n, degree):
        """Test nondecreasing beta and the log-derivative identity over seeds, centers and radii."""
        rng = np.random.default_rng(20240601)
        centers = rng.uniform(-0.5, 0.5, size=(5, n))
        for seed in range(20):
            f = random_harmonic_polynomial(n, degree, seed=seed)
            for center in centers:
                profile = frequency_profile(f, center.tolist(), 0.05, 1.5, 16)
                betas = np.array([s.beta for s in profile.samples])
                assert len(betas) == 16
                assert np.all(np.diff(betas) >= -1e-9 * np.abs(betas[1:]))
                assert profile.identity_residual < 1e-4

    def test_short_interval(self):
        """Test a two-sample profile on a very short interval."""
        f = random_harmonic_polynomial(3, 3, seed=2)
        profile = frequency_profile(f, [0.1, 0.0, -0.1], 1.0 - 1e-6, 1.0, 2)
        assert profile.identity_residual < 1e-8

    def test_radii_must_increase(self):
        """Test that r_min >= r_max is rejected."""
        with pytest.raises(PreconditionError):
            frequency_profile(re_z(2), ORIGIN2, 1.0, 0.5, 4)


class TestSupNorm:
    """Tests for sup norms over balls and cubes."""

    def test_linear_sup_on_ball(self):
        """Test sup |x1| over the unit ball is 1 at e_1."""
        value, argmax = sup_with_argmax(x1_3(), BallSpec(center=ORIGIN3, radius=1.0))
        assert value == pytest.approx(1.0, rel=1e-9)
        np.testing.assert_allclose(argmax, [1.0, 0.0, 0.0], atol=1e-9)

    def test_interior_maximum_of_eigenfunction(self):
        """Test sup |sin(5 x1)| over the unit disk is 1."""
        f = make_torus_eigenfunction(2, [{"k": [5, 0]}])
        assert sup_norm(f, BallSpec(center=ORIGIN2, radius=1.0)) == pytest.approx(1.0, rel=1e-3)

    def test_sup_on_cube(self):
        """Test sup |Re z^2| over [0, 1]^2 is 1."""
        cube = CubeSpec(min_corner=ORIGIN2, side=1.0)
        assert sup_norm(re_z(2), cube) == pytest.approx(1.0, rel=1e-9)

    def test_sup_on_symmetric_square(self):
        """Test sup |Re z^4| over [-1, 1]^2 is 4, reached at the corners."""
        cube = CubeSpec(min_corner=[-1.0, -1.0], side=2.0)
        value, argmax = sup_with_argmax(re_z(4), cube)
        assert value == pytest.approx(4.0, rel=1e-12)
        assert np.abs(argmax) == pytest.approx([1.0, 1.0])

    @pytest.mark.parametrize("field,cube", [
        (re_z(4), CubeSpec(min_corner=[-1.0, -1.0], side=2.0)),
        (re_z(3), CubeSpec(min_corner=[0.1, -0.3], side=0.7)),
        (make_torus_eigenfunction(2, [{"k": [5, 0]}]), CubeSpec(min_corner=[0.0, 0.0], side=1.0)),
    ])
    def test_sup_never_decreases_under_doubling(self, field, cube):
        """Test that doubling the starting resolution never lowers the cube sup."""
        values = [sup_norm(field, cube, resolution=res) for res in (8, 16, 32, 64)]
        for coarse, fine in zip(values, values[1:]):
            assert fine >= coarse * (1 - 1e-9)


class TestDoublingIndex:
    """Tests for ball and cube doubling indices."""

    @pytest.mark.parametrize("d", [1, 4, 5])
    def test_homogeneous_ball_index(self, d):
        """Test that Re z^d has doubling index d at the origin."""
        assert doubling_index_ball(re_z(d), ORIGIN2, 0.3) == pytest.approx(d, rel=1e-9)

    def test_constant_ball_index(self):
        """Test that u=1 has doubling index 0."""
        assert doubling_index_ball(constant3(), ORIGIN3, 0.5) == pytest.approx(0.0, abs=1e-12)

    def test_doubling_profile_of_homogeneous_field(self):
        """Test a flat doubling profile with zero monotonicity defect."""
        profile = doubling_profile(re_z(3), ORIGIN2, 1.0, 4)
        assert profile.radii == [0.125, 0.25, 0.5, 1.0]
        for value in profile.indices:
            assert value == pytest.approx(3.0, rel=1e-9)
        assert abs(profile.monotonicity_defect) < 1e-9

    def test_constant_cube_index(self):
        """Test that u=1 has cube index 0."""
        cube = CubeSpec(min_corner=[-0.05, -0.05, -0.05], side=0.1)
        assert doubling_index_cube(constant3(), cube, centers_per_side=2, radii_count=1) == pytest.approx(0.0, abs=1e-12)

    def test_centered_candidate_bounds_cube_index(self):
        """Test N(Q) >= d ln(10 n) for Re z^d on a cube centered at the origin."""
        cube = CubeSpec(min_corner=[-0.05, -0.05], side=0.1)
        index = doubling_index_cube(re_z(3), cube, centers_per_side=3, radii_count=2)
        assert index >= 3 * math.log(20) - 1e-9

    def test_cube_index_matches_dense_candidates(self):
        """Test that Re z^8 on [0.2, 0.4]^2 keeps its cube index within 5% on a 7x denser lattice."""
        f = make_harmonic_polynomial(2, [{"degree": 8, "part": "cos", "weight": 1.0}], domain_radius=8.0)
        cube = CubeSpec(min_corner=[0.2, 0.2], side=0.2)
        coarse = doubling_index_cube(f, cube)
        dense = doubling_index_cube(f, cube, centers_per_side=21)
        assert coarse > 0
        assert coarse == pytest.approx(dense, rel=0.05)

    def test_inflated_balls_must_fit(self):
        """Test that inflated candidate balls outside the domain raise."""
        with pytest.raises(DomainViolation):
            doubling_index_cube(re_z(2), CubeSpec(min_corner=ORIGIN2, side=1.0))

    def test_aligned_subcubes_never_exceed_parent(self):
        """Test N(q) <= N(Q) for every subcube of an aligned table."""
        f = random_harmonic_polynomial(2, 5, seed=11, min_degree=1)
        cube = CubeSpec(min_corner=[-0.05, -0.05], side=0.1)
        table = CandidateTable(f, cube, centers_per_side=3, radii_count=2, align=3)
        parent = table.index()
        for i in range(3):
            for j in range(3):
                assert table.subcube_index((i, j)) <= parent


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
