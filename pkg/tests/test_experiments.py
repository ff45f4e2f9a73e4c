import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

# Aliased so pytest does not collect the library function as a test.
from spherefit import convergence_sweep, test_function as target
from spherefit.experiments import (
    EXPECTED_CYLINDER,
    EXPECTED_TABLE1,
    EXPECTED_TABLE2,
    EXPECTED_TABLE3,
    m_shape_spec,
    run_experiment_full,
    table1_specs,
    table2_specs,
    table3_spec,
)


class TestTargets:
    def test_registry_names(self):
        for name in ("step_u0", "ramp_u1", "quad_u2", "oscillatory", "m_shape",
                     "cylinder2d"):
            assert target(name).name == name
        with pytest.raises(ValueError):
            target("nope")

    def test_ramp_values(self):
        f = target("ramp_u1")
        assert f.evaluate(0.5) == 0.5
        assert f.evaluate(-0.3) == 0.0
        assert f.breakpoints == (0.0,)

    def test_quad_is_one_sided_square(self):
        f = target("quad_u2")
        assert f.evaluate(0.5) == 0.25
        assert f.evaluate(-0.5) == 0.0

    def test_oscillatory_closed_form(self):
        f = target("oscillatory")
        x = 0.5
        assert_allclose(
            f.evaluate(x), x**2 * math.sin(1.0 / (0.01 + x**2)) ** 2, rtol=1e-15
        )
        assert f.evaluate(0.0) == 0.0

    def test_m_shape_profile(self):
        f = target("m_shape")
        lo, mid, hi = f.breakpoints
        assert f.evaluate(lo * 0.5) == 0.0
        assert f.evaluate(hi + 0.01) == 0.0
        # Continuous at the middle breakpoint.
        assert_allclose(f.evaluate(mid - 1e-9), f.evaluate(mid + 1e-9), atol=1e-7)
        xs = np.linspace(0.0, math.pi, 301)
        assert np.all(f.evaluate(xs) >= 0.0)

    def test_cylinder_indicator(self):
        f = target("cylinder2d")
        pts = np.array([[0.5, 0.5], [0.9, 0.9], [-0.5, -0.5]])
        assert_allclose(f.evaluate(pts), [1.0, 0.0, 0.0], atol=0)
        assert_allclose(f.squared_norm, math.pi / 4.0, rtol=1e-15)

    def test_domain_enforced(self):
        with pytest.raises(ValueError):
            target("ramp_u1").evaluate(1.5)


class TestSpecTables:
    def test_table1_covers_all_solver_dimension_pairs(self):
        keys = set(table1_specs())
        assert keys == {(s, n) for s in ("greedy", "average", "hybrid") for n in (6, 31)}
        assert set(EXPECTED_TABLE1) == keys

    def test_table2_covers_order_dimension_grid(self):
        keys = set(table2_specs())
        assert keys == {(q, n) for q in (0, 1, 2) for n in (6, 31)}
        assert set(EXPECTED_TABLE2) == keys
        for q, n in keys:
            spec = table2_specs()[(q, n)]
            assert spec.space.order == q
            assert spec.basis.dimension == n
            assert spec.solver == "average"

    def test_table3_spec_shape(self):
        spec = table3_spec()
        assert spec["target"] == "oscillatory"
        assert spec["dims"] == (6, 16, 31, 51, 76, 151)
        assert tuple(sorted(EXPECTED_TABLE3)) == spec["dims"]

    def test_m_shape_spec(self):
        spec = m_shape_spec()
        assert spec.target == "m_shape"
        assert spec.basis.family == "cosine"
        assert spec.basis.dimension == 31
        assert spec.space.order == 0

    def test_expected_cylinder_bands(self):
        for _, (center, (lo, hi)) in EXPECTED_CYLINDER.items():
            assert lo < center < hi


@pytest.fixture(scope="module")
def ramp_run():
    return run_experiment_full(table1_specs()[("greedy", 6)])


class TestRunExperiment:
    def test_row_fields(self, ramp_run):
        row = ramp_run.row
        assert row.dimension == 6
        assert row.solver == "greedy"
        assert row.converged
        assert row.iterations > 0
        assert 0.5 < row.rel_change_np < 2.0
        assert row.error is None

    def test_norm_and_energy_preserved(self, ramp_run):
        u = ramp_run.unconstrained.entries
        v = ramp_run.norm_preserving.coeffs.entries
        assert_allclose(np.linalg.norm(v), np.linalg.norm(u), rtol=1e-12)
        assert_allclose(np.sum(v**2), np.sum(u**2), rtol=1e-12)

    def test_linear_baseline_shrinks_norm(self, ramp_run):
        u = ramp_run.unconstrained.entries
        lin = ramp_run.linear_only.coeffs.entries
        assert np.linalg.norm(lin) < np.linalg.norm(u)

    def test_discrepancy_is_coefficient_distance(self, ramp_run):
        row = ramp_run.row
        lin = ramp_run.linear_only.coeffs.entries
        v = ramp_run.norm_preserving.coeffs.entries
        assert_allclose(row.discrepancy, np.linalg.norm(lin - v), rtol=1e-13)

    def test_reported_minima_match_synthesis(self, ramp_run):
        from spherefit import synthesize

        coeffs = ramp_run.norm_preserving.coeffs
        xs = np.linspace(-1.0, 1.0, 10001)
        assert ramp_run.row.min_value <= float(synthesize(coeffs, xs).min()) + 1e-12


class TestConvergenceSweep:
    def test_small_sweep_well_formed(self):
        from spherefit import HilbertSpec, positivity

        table = convergence_sweep(
            "ramp_u1",
            (positivity(),),
            HilbertSpec(-1.0, 1.0, 0),
            dims=(4, 8, 16),
            solver="greedy",
        )
        assert [r.dimension for r in table.rows] == [4, 8, 16]
        errs = [r.err_unconstrained for r in table.rows]
        assert errs[0] > errs[1] > errs[2] > 0
        # Errors fall with dimension, so the log-log slopes are negative.
        assert table.slope_unconstrained < 0
        assert table.slope_np < 0
        for r in table.rows:
            assert r.converged
            assert r.err_np >= r.err_unconstrained - 1e-15
