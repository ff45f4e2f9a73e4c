import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from spherefit import (
    BasisSpec,
    Coefficients,
    HilbertSpec,
    approximation_error,
    best_approximation,
    build_orthonormal_basis,
    gram_matrix,
    inner_product,
    integrate_adaptive,
    synthesize,
)


def _basis(family="polynomial", n=6, lo=-1.0, hi=1.0, order=0):
    return build_orthonormal_basis(HilbertSpec(lo, hi, order), BasisSpec(family, n))


class TestConstruction:
    def test_legendre_values_at_right_endpoint(self):
        # Normalized Legendre on [-1, 1]: pbar_k(1) = sqrt((2k+1)/2).
        b = _basis(n=2)
        assert_allclose(b.eval_one(1.0), [math.sqrt(0.5), math.sqrt(1.5)], rtol=1e-14)

    def test_shifted_interval(self):
        # On [0, 1] the first two are 1 and sqrt(3)(2x - 1).
        b = _basis(n=2, lo=0.0, hi=1.0)
        assert_allclose(b.eval_one(0.75), [1.0, math.sqrt(3.0) * 0.5], rtol=1e-13)

    def test_cosine_values(self):
        b = _basis("cosine", n=3, lo=0.0, hi=math.pi)
        x = 0.4
        expect = [
            1.0 / math.sqrt(math.pi),
            math.cos(x) / math.sqrt(math.pi / 2),
            math.cos(2 * x) / math.sqrt(math.pi / 2),
        ]
        assert_allclose(b.eval_one(x), expect, rtol=1e-14)

    def test_cosine_needs_zero_pi(self):
        with pytest.raises(ValueError):
            _basis("cosine", n=3, lo=0.0, hi=1.0)

    def test_unknown_family_rejected(self):
        with pytest.raises(ValueError):
            BasisSpec("fourier", 4)

    def test_h2_orthonormalization_instability_reported(self):
        # Gram factorization degrades with dimension under H^2; the guard
        # must refuse rather than return a silently skewed basis.
        with pytest.raises(ValueError, match="orthonormalization unstable"):
            _basis(n=51, order=2)


class TestGramIdentity:
    @pytest.mark.parametrize(
        "family,n,order,lo,hi",
        [
            ("polynomial", 8, 0, -1.0, 1.0),
            ("polynomial", 8, 1, -1.0, 1.0),
            ("polynomial", 8, 2, -1.0, 1.0),
            ("polynomial", 12, 0, 0.0, 2.5),
            ("polynomial", 31, 2, -1.0, 1.0),
            ("cosine", 10, 0, 0.0, math.pi),
            ("cosine", 10, 2, 0.0, math.pi),
            ("tensor_polynomial_2d", 5, 0, -1.0, 1.0),
        ],
    )
    def test_gram_is_identity(self, family, n, order, lo, hi):
        b = _basis(family, n, lo, hi, order)
        g = gram_matrix(b)
        assert_allclose(g, np.eye(b.dim), atol=1e-11)


class TestEvaluation:
    def test_scalar_and_array_paths_agree(self):
        # eval_one goes through a plain-float recurrence; it must match the
        # vectorized path to machine precision.
        b = _basis(n=16, order=2)
        rng = np.random.default_rng(2)
        xs = rng.uniform(-1.0, 1.0, size=40)
        for deriv in (0, 1, 2):
            table = b.eval_many(xs, deriv)
            for i, x in enumerate(xs):
                assert_allclose(b.eval_one(float(x), deriv), table[i], rtol=1e-13)

    @pytest.mark.parametrize("family", ["polynomial", "cosine"])
    def test_derivatives_match_finite_differences(self, family):
        lo, hi = (0.0, math.pi) if family == "cosine" else (-1.0, 1.0)
        b = _basis(family, 9, lo, hi, order=0)
        rng = np.random.default_rng(4)
        h1, h2 = 1e-6, 1e-4
        for x in rng.uniform(lo + 0.01, hi - 0.01, size=15):
            fd1 = (b.eval_one(x + h1) - b.eval_one(x - h1)) / (2 * h1)
            assert_allclose(fd1, b.eval_one(x, 1), rtol=2e-8, atol=1e-7)
            fd2 = (
                b.eval_one(x + h2) - 2 * b.eval_one(x) + b.eval_one(x - h2)
            ) / h2**2
            assert_allclose(fd2, b.eval_one(x, 2), rtol=1e-5, atol=1e-5)

    def test_tensor_2d_is_product_of_axes(self):
        b = _basis("tensor_polynomial_2d", 4)
        ax = b.axis_basis
        pts = np.array([[0.3, -0.7], [0.0, 0.0], [-1.0, 1.0]])
        vals = b.eval_many(pts)
        # Pair index is iy * n + ix.
        for k, (x, y) in enumerate(pts):
            outer = np.outer(ax.eval_one(y), ax.eval_one(x)).ravel()
            assert_allclose(vals[k], outer, rtol=1e-13)

    def test_outside_domain_rejected(self):
        b = _basis(n=4)
        with pytest.raises(ValueError):
            b.eval_one(1.5)

    def test_2d_derivatives_rejected(self):
        b = _basis("tensor_polynomial_2d", 3)
        with pytest.raises(ValueError):
            b.eval_many(np.array([[0.0, 0.0]]), 1)


class TestApproximation:
    def test_polynomial_in_span_is_reproduced(self):
        b = _basis(n=4)
        coeffs = best_approximation(lambda x: 2.0 * x + 1.0, b)
        xs = np.linspace(-1.0, 1.0, 17)
        assert_allclose(synthesize(coeffs, xs), 2.0 * xs + 1.0, atol=1e-12)
        assert approximation_error(coeffs, lambda x: 2.0 * x + 1.0) < 1e-12

    def test_h1_projection_of_quadratic_is_exact(self):
        b = _basis(n=3, order=1)
        coeffs = best_approximation(
            lambda x: x**2, b, derivatives=(lambda x: 2.0 * x,)
        )
        xs = np.linspace(-1.0, 1.0, 11)
        assert_allclose(synthesize(coeffs, xs), xs**2, atol=1e-12)

    def test_ramp_coefficients_hand_values(self):
        # <max(x,0), 1/sqrt(2)> = 1/(2 sqrt(2)); against sqrt(3/2) x it is
        # sqrt(3/2)/3.
        b = _basis(n=2)
        coeffs = best_approximation(lambda x: np.maximum(x, 0.0), b, breakpoints=(0.0,))
        assert_allclose(
            coeffs.entries,
            [1.0 / (2.0 * math.sqrt(2.0)), math.sqrt(1.5) / 3.0],
            rtol=1e-12,
        )

    def test_error_decreases_with_dimension(self):
        target = lambda x: np.exp(x)
        errs = [
            approximation_error(best_approximation(target, _basis(n=n)), target)
            for n in (2, 4, 6)
        ]
        assert errs[0] > errs[1] > errs[2]

    def test_parseval_inner_products_h1(self):
        # f = x, g = x^2 under H^1 on [-1, 1]: <f, f> = 2/3 + 2,
        # <g, g> = 2/5 + 8/3, and the cross term vanishes by parity.
        b = _basis(n=3, order=1)
        cf = best_approximation(lambda x: x, b, derivatives=(lambda x: np.ones_like(x),))
        cg = best_approximation(lambda x: x**2, b, derivatives=(lambda x: 2.0 * x,))
        assert_allclose(inner_product(cf, cf), 8.0 / 3.0, rtol=1e-12)
        assert_allclose(inner_product(cg, cg), 46.0 / 15.0, rtol=1e-12)
        assert abs(inner_product(cf, cg)) < 1e-12

    def test_inner_product_methods_agree(self):
        b = _basis(n=5, order=1)
        rng = np.random.default_rng(8)
        f = Coefficients(rng.standard_normal(5), b)
        g = Coefficients(rng.standard_normal(5), b)
        assert_allclose(
            inner_product(f, g, "coordinates"),
            inner_product(f, g, "quadrature"),
            rtol=1e-10,
        )

    def test_synthesize_derivative(self):
        b = _basis(n=4)
        coeffs = best_approximation(lambda x: x**3, b)
        xs = np.linspace(-0.9, 0.9, 7)
        assert_allclose(synthesize(coeffs, xs, deriv=1), 3.0 * xs**2, atol=1e-11)


class TestAdaptiveIntegration:
    def test_smooth(self):
        val = integrate_adaptive(lambda x: x**2, 0.0, 1.0)
        assert_allclose(val, 1.0 / 3.0, rtol=1e-13)

    def test_kink_with_breakpoint(self):
        val = integrate_adaptive(np.abs, -1.0, 1.0, breakpoints=(0.0,))
        assert_allclose(val, 1.0, rtol=1e-13)

    def test_oscillatory(self):
        val = integrate_adaptive(lambda x: np.sin(40.0 * x), 0.0, math.pi)
        exact = (1.0 - math.cos(40.0 * math.pi)) / 40.0
        assert_allclose(val, exact, atol=1e-12)
