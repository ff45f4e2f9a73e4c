import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from spherefit import (
    BasisSpec,
    Coefficients,
    FixedHalfspace,
    HilbertSpec,
    SearchConfig,
    best_approximation,
    bounded_above,
    bounded_below,
    build_orthonormal_basis,
    convexity,
    determining_check,
    is_feasible,
    monotonicity,
    most_violated,
    positivity,
    riesz_vector,
    sdist,
    violated_regions,
)

SQ15 = math.sqrt(1.5)


@pytest.fixture(scope="module")
def leg2():
    return build_orthonormal_basis(HilbertSpec(-1.0, 1.0, 0), BasisSpec("polynomial", 2))


@pytest.fixture(scope="module")
def leg3(leg2):
    return build_orthonormal_basis(HilbertSpec(-1.0, 1.0, 0), BasisSpec("polynomial", 3))


def _coeffs(entries, basis):
    return Coefficients(np.asarray(entries, dtype=float), basis)


class TestFamilies:
    def test_constructors(self):
        assert positivity().deriv_order == 0
        assert positivity().sign == "lower"
        assert monotonicity().deriv_order == 1
        assert convexity().deriv_order == 2
        assert bounded_above(0.8).sign == "upper"
        assert bounded_above(0.8).bound == 0.8
        assert bounded_below(-1.0).bound == -1.0

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            positivity(domain=(1.0, -1.0))
        with pytest.raises(ValueError):
            FixedHalfspace(np.zeros(3))

    def test_fixed_halfspace_normalizes(self):
        h = FixedHalfspace(np.array([3.0, 4.0]), offset=10.0)
        assert_allclose(h.normal, [0.6, 0.8], atol=1e-15)
        assert_allclose(h.offset, 2.0, atol=1e-15)


class TestRieszVector:
    def test_lower_bound_convention(self, leg2):
        # positivity at y: unit = -g / ||g||, offset = 0, where g holds the
        # basis values at y.
        rv = riesz_vector(positivity(), leg2, 1.0)
        g = np.array([math.sqrt(0.5), SQ15])
        assert_allclose(rv.unit, -g / np.linalg.norm(g), rtol=1e-14)
        assert rv.offset == 0.0
        assert_allclose(rv.scale, 1.0 / np.linalg.norm(g), rtol=1e-14)

    def test_upper_bound_convention(self, leg2):
        rv = riesz_vector(bounded_above(0.8), leg2, 0.0)
        # g(0) = (1/sqrt(2), 0).
        assert_allclose(rv.unit, [1.0, 0.0], atol=1e-14)
        assert_allclose(rv.offset, 0.8 * math.sqrt(2.0), rtol=1e-14)

    def test_sdist_sign_matches_pointwise_residual(self, leg2):
        # v(y) = sqrt(1.5) y: positive at y = 1, negative at y = -1.
        w = _coeffs([0.0, 1.0], leg2)
        assert sdist(w, riesz_vector(positivity(), leg2, 1.0)) > 0
        assert sdist(w, riesz_vector(positivity(), leg2, -1.0)) < 0

    def test_sdist_value(self, leg2):
        # At y = -1: v = -sqrt(1.5), ||g|| = sqrt(2), so -sqrt(3)/2.
        w = _coeffs([0.0, 1.0], leg2)
        rv = riesz_vector(positivity(), leg2, -1.0)
        assert_allclose(sdist(w, rv), -math.sqrt(3.0) / 2.0, rtol=1e-14)

    def test_degenerate_normal_rejected(self, leg2):
        # All second derivatives of a 2-dimensional polynomial basis vanish.
        with pytest.raises(ValueError):
            riesz_vector(convexity(), leg2, 0.5)


class TestMostViolated:
    def test_pure_slope_against_positivity(self, leg2):
        w = _coeffs([0.0, 1.0], leg2)
        rec = most_violated(w, [positivity()])
        assert rec.family_index == 0
        assert_allclose(rec.param, -1.0, atol=1e-12)
        assert_allclose(rec.signed_distance, -math.sqrt(3.0) / 2.0, rtol=1e-12)

    def test_constant_against_upper_bound(self, leg2):
        # v = 0.9 constant; ||g(y)|| is smallest at y = 0, so the violation
        # is deepest there: (0.8 - 0.9) * sqrt(2).
        w = _coeffs([0.9 * math.sqrt(2.0), 0.0], leg2)
        rec = most_violated(w, [bounded_above(0.8)])
        assert_allclose(rec.param, 0.0, atol=1e-10)
        assert_allclose(rec.signed_distance, -0.1 * math.sqrt(2.0), rtol=1e-12)

    def test_tie_breaks_to_smallest_param(self, leg2):
        # Decreasing line violates monotonicity equally at every y.
        w = _coeffs([0.0, -1.0], leg2)
        rec = most_violated(w, [monotonicity()])
        assert_allclose(rec.signed_distance, -1.0, rtol=1e-14)
        assert_allclose(rec.param, -1.0, atol=1e-14)

    def test_feasible_returns_none(self, leg2):
        w = _coeffs([1.0, 0.0], leg2)
        assert most_violated(w, [positivity()]) is None

    def test_fixed_halfspace_included(self, leg2):
        w = _coeffs([1.0, 0.0], leg2)
        h = FixedHalfspace(np.array([1.0, 0.0]), offset=0.5)
        rec = most_violated(w, [positivity(), h])
        assert rec.family_index == 1
        assert rec.param is None
        assert_allclose(rec.signed_distance, -0.5, rtol=1e-14)

    def test_agrees_with_is_feasible_on_clear_margins(self, leg3):
        rng = np.random.default_rng(13)
        fams = [positivity(), monotonicity()]
        checked = 0
        for _ in range(60):
            w = _coeffs(rng.standard_normal(3), leg3)
            rec = most_violated(w, fams)
            margin = rec.signed_distance if rec is not None else 1.0
            if abs(margin) < 1e-6:
                continue
            checked += 1
            assert is_feasible(w, fams) == (rec is None)
        assert checked >= 50


class TestViolatedRegions:
    def test_half_interval(self, leg2):
        w = _coeffs([0.0, 1.0], leg2)
        regions = violated_regions(w, positivity())
        assert len(regions) == 1
        lo, hi = regions[0]
        assert lo == -1.0
        assert abs(hi) < 1e-11

    def test_feasible_empty(self, leg2):
        w = _coeffs([1.0, 0.0], leg2)
        assert violated_regions(w, positivity()) == []

    def test_interior_dip_endpoints(self, leg3):
        # (y - 0.3)^2 - 1e-2 is negative exactly on (0.2, 0.4).
        w = best_approximation(lambda y: (y - 0.3) ** 2 - 1e-2, leg3)
        regions = violated_regions(w, positivity())
        assert len(regions) == 1
        assert_allclose(regions[0], [0.2, 0.4], atol=1e-10)

    def test_narrow_dip_missed_by_coarse_grid(self, leg3):
        # Negative only on (0.29, 0.31); a 9-point grid has no node inside.
        w = best_approximation(lambda y: (y - 0.3) ** 2 - 1e-4, leg3)
        cfg = SearchConfig(grid_1d=9)
        assert violated_regions(w, positivity(), cfg) == []

    def test_narrow_dip_recovered_by_seed(self, leg3):
        w = best_approximation(lambda y: (y - 0.3) ** 2 - 1e-4, leg3)
        cfg = SearchConfig(grid_1d=9)
        regions = violated_regions(w, positivity(), cfg, include_params=(0.3,))
        assert len(regions) == 1
        assert_allclose(regions[0], [0.29, 0.31], atol=1e-9)

    def test_seed_at_feasible_param_is_ignored(self, leg3):
        w = best_approximation(lambda y: (y - 0.3) ** 2 - 1e-4, leg3)
        cfg = SearchConfig(grid_1d=9)
        assert violated_regions(w, positivity(), cfg, include_params=(-0.5,)) == []

    def test_seed_inside_detected_region_adds_nothing(self, leg2):
        w = _coeffs([0.0, 1.0], leg2)
        base = violated_regions(w, positivity())
        seeded = violated_regions(w, positivity(), include_params=(-0.5,))
        assert seeded == base

    def test_seeded_region_vanishes_once_feasible(self, leg3):
        w = best_approximation(lambda y: (y - 0.3) ** 2 + 1e-6, leg3)
        cfg = SearchConfig(grid_1d=9)
        assert violated_regions(w, positivity(), cfg, include_params=(0.3,)) == []


@pytest.fixture(scope="module")
def tensor3():
    return build_orthonormal_basis(
        HilbertSpec(-1.0, 1.0, 0), BasisSpec("tensor_polynomial_2d", 3)
    )


class TestViolatedRegions2D:
    def _paraboloid(self, tensor3, depth):
        # (x - 0.3)^2 + (y - 0.3)^2 - depth; degree 2 per axis makes the
        # least-squares fit exact.
        def f(x, y):
            return (x - 0.3) ** 2 + (y - 0.3) ** 2 - depth

        xs = np.linspace(-1.0, 1.0, 7)
        xx, yy = np.meshgrid(xs, xs, indexing="xy")
        nodes = np.column_stack([xx.ravel(), yy.ravel()])
        a = tensor3.eval_many(nodes)
        entries, *_ = np.linalg.lstsq(a, f(nodes[:, 0], nodes[:, 1]), rcond=None)
        return Coefficients(entries, tensor3)

    def test_cells_cover_violated_nodes(self, tensor3):
        w = self._paraboloid(tensor3, 0.25)
        cfg = SearchConfig(grid_2d=17)
        cells = violated_regions(w, positivity(), cfg)
        assert cells
        for (xlo, xhi), (ylo, yhi) in cells:
            cx, cy = 0.5 * (xlo + xhi), 0.5 * (ylo + yhi)
            assert (cx - 0.3) ** 2 + (cy - 0.3) ** 2 < 0.25 + 0.05

    def test_sub_grid_disk_recovered_by_seed(self, tensor3):
        # Disk of radius 0.1 around (0.3, 0.3); a 5-point-per-axis grid has
        # no node closer than distance ~0.28.
        w = self._paraboloid(tensor3, 0.01)
        cfg = SearchConfig(grid_2d=5)
        assert violated_regions(w, positivity(), cfg) == []
        cells = violated_regions(w, positivity(), cfg, include_params=((0.3, 0.3),))
        assert len(cells) == 1
        (xlo, xhi), (ylo, yhi) = cells[0]
        assert xlo <= 0.3 <= xhi
        assert ylo <= 0.3 <= yhi


class TestIsFeasible:
    def test_fixed_halfspace(self, leg2):
        h = FixedHalfspace(np.array([1.0, 0.0]), offset=0.5)
        assert is_feasible(_coeffs([0.4, 0.0], leg2), [h])
        assert not is_feasible(_coeffs([0.6, 0.0], leg2), [h])

    def test_tolerance_band(self, leg2):
        h = FixedHalfspace(np.array([1.0, 0.0]), offset=0.5)
        assert is_feasible(_coeffs([0.5 + 1e-12, 0.0], leg2), [h], delta=1e-10)
        assert not is_feasible(_coeffs([0.5 + 1e-8, 0.0], leg2), [h], delta=1e-10)


class TestDeterminingCheck:
    def test_monotonicity_alone_underdetermines(self, leg3):
        # Derivative samples of a 3-dimensional polynomial space span only
        # the 2-dimensional derivative image.
        report = determining_check([monotonicity()], leg3, sample_count=40)
        assert report.dimension == 3
        assert report.rank == 2

    def test_positivity_fills_the_rank(self, leg3):
        report = determining_check(
            [positivity(), monotonicity()], leg3, sample_count=40
        )
        assert report.rank == 3
