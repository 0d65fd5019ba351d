"""Special-function layer: frozen high-precision references, independent
scipy cross-checks, and the invariants the loss-rate integrals lean on."""

import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import gammaln, hyp2f1

from cachenet.special_functions import (
    ConvergenceError,
    DomainError,
    QuadratureConfig,
    QuadratureError,
    gauss_2f1_neg,
    integrate_semi_infinite,
    ln_gamma,
    z1,
)

# 50-digit arbitrary-precision references, computed once up front
LN_GAMMA_3_575 = 1.284631964852003617460079
LN_GAMMA_HALF = 0.5723649429247000870717137
F21_AT_M100 = 0.1471127674303734591852876  # 2F1(1, 1/2; 3/2; -100) = atan(10)/10
F21_03_07_11_M5 = 0.6822061961101949559845606
F21_AT_M1E6 = 0.001569796327128229752564798
Z1_3_4 = 1.813799364234217850594078  # sqrt(3) * atan(sqrt(3))
Z1_2_35 = 1.876960424246227652223281  # beta = 3.5, threshold 2


class TestLnGamma:
    def test_exact_points(self):
        assert ln_gamma(1.0) == pytest.approx(0.0, abs=1e-14)
        assert ln_gamma(2.0) == pytest.approx(0.0, abs=1e-14)
        assert ln_gamma(0.5) == pytest.approx(LN_GAMMA_HALF, rel=1e-13)
        assert ln_gamma(3.575) == pytest.approx(LN_GAMMA_3_575, rel=1e-13)

    def test_against_scipy_wide_range(self):
        x = np.logspace(math.log10(0.5), 6, 300)
        ours = np.array([ln_gamma(v) for v in x])
        np.testing.assert_allclose(ours, gammaln(x), rtol=1e-12, atol=1e-13)

    def test_reflection_region(self):
        x = np.linspace(0.01, 0.49, 60)
        ours = np.array([ln_gamma(v) for v in x])
        np.testing.assert_allclose(ours, gammaln(x), rtol=1e-12, atol=1e-12)

    def test_recurrence(self):
        """Gamma(x+1) = x * Gamma(x), checked in linear space."""
        for x in np.linspace(0.5, 50.0, 100):
            lhs = math.exp(ln_gamma(x + 1.0))
            rhs = x * math.exp(ln_gamma(x))
            assert lhs == pytest.approx(rhs, rel=1e-11)

    def test_domain(self):
        with pytest.raises(DomainError):
            ln_gamma(0.0)
        with pytest.raises(DomainError):
            ln_gamma(-2.5)


class TestGauss2F1:
    def test_unit_at_zero(self):
        for a, b, c in [(1.0, 0.5, 1.5), (0.3, 0.7, 1.1), (-2.0, 4.0, 0.25)]:
            assert gauss_2f1_neg(a, b, c, 0.0) == 1.0

    def test_arctan_identity(self):
        """2F1(1, 1/2; 3/2; -x^2) = atan(x)/x."""
        assert gauss_2f1_neg(1, 0.5, 1.5, -1.0) == pytest.approx(math.pi / 4, rel=1e-12)
        assert gauss_2f1_neg(1, 0.5, 1.5, -100.0) == pytest.approx(F21_AT_M100, rel=1e-11)
        assert gauss_2f1_neg(1, 0.5, 1.5, -1e6) == pytest.approx(F21_AT_M1E6, rel=1e-10)

    def test_frozen_reference(self):
        assert gauss_2f1_neg(0.3, 0.7, 1.1, -5.0) == pytest.approx(F21_03_07_11_M5, rel=1e-11)

    def test_against_scipy_grid(self):
        rng = np.random.default_rng(20240811)
        for _ in range(200):
            a = rng.uniform(-1.5, 2.5)
            b = rng.uniform(0.05, 2.0)
            c = rng.uniform(0.1, 3.0)
            z = -(10.0 ** rng.uniform(-3, 2))
            expected = hyp2f1(a, b, c, z)
            assert gauss_2f1_neg(a, b, c, z) == pytest.approx(expected, rel=1e-9), (a, b, c, z)

    def test_near_integer_parameter_difference(self):
        """The pole cancellation in the large-argument path stays accurate
        down to the switchover distance from integral a - b."""
        for d in (0.05, 1e-3, 2e-4):
            for z in (-10.0, -1e3, -1e5):
                a, b, c = 1.0, 1.0 - d, 1.75
                expected = hyp2f1(a, b, c, z)
                assert gauss_2f1_neg(a, b, c, z) == pytest.approx(expected, rel=2e-10)

    def test_exactly_integer_parameter_difference(self):
        """Integral a - b falls back to the transformed series."""
        for z in (-5.0, -50.0):
            expected = hyp2f1(2.0, 1.0, 2.5, z)
            assert gauss_2f1_neg(2.0, 1.0, 2.5, z) == pytest.approx(expected, rel=1e-9)

    def test_domain_rejections(self):
        with pytest.raises(DomainError):
            gauss_2f1_neg(1.0, 0.5, 1.5, 0.5)
        with pytest.raises(DomainError):
            gauss_2f1_neg(1.0, 0.5, 0.0, -1.0)
        with pytest.raises(DomainError):
            gauss_2f1_neg(1.0, 0.5, -3.0, -1.0)

    def test_term_budget_exhaustion(self):
        with pytest.raises(ConvergenceError) as err:
            gauss_2f1_neg(1.0, 0.5, 1.5, -50.0, max_terms=3)
        assert err.value.estimate is not None


class TestZ1:
    def test_zero_threshold(self):
        assert z1(0.0, 4.0) == 0.0
        assert z1(0.0, 3.1) == 0.0

    def test_beta_four_closed_form(self):
        """For path loss 4 the kernel is sqrt(t) * atan(sqrt(t))."""
        assert z1(1.0, 4.0) == pytest.approx(math.pi / 4, rel=1e-12)
        assert z1(3.0, 4.0) == pytest.approx(Z1_3_4, rel=1e-12)
        for t in np.logspace(-3, 4, 40):
            expected = math.sqrt(t) * math.atan(math.sqrt(t))
            assert abs(z1(t, 4.0) - expected) <= 1e-9 * (1.0 + expected)

    def test_defining_integral_oracle(self):
        """z1 equals 2*Int_1^inf (1 - 1/(1 + t*v^-beta)) v dv (independent quad).

        quad's own accuracy limits the comparison for slowly decaying tails,
        so the tolerance is looser than the frozen-reference checks above.
        """
        import warnings
        from scipy.integrate import IntegrationWarning

        for t, beta in [(1.0, 4.0), (3.0, 4.0), (2.0, 3.5), (0.3, 2.7), (50.0, 5.0)]:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", IntegrationWarning)
                ref, err = quad(
                    lambda v: (1.0 - 1.0 / (1.0 + t * v ** -beta)) * 2.0 * v,
                    1.0, np.inf, epsabs=1e-12, epsrel=1e-10, limit=200,
                )
            assert z1(t, beta) == pytest.approx(ref, rel=3e-7)

    def test_frozen_general_beta(self):
        assert z1(2.0, 3.5) == pytest.approx(Z1_2_35, rel=1e-11)

    def test_strictly_increasing_in_threshold(self):
        for beta in (2.5, 3.0, 4.0, 6.0):
            grid = np.logspace(-3, 3, 50)
            vals = [z1(t, beta) for t in grid]
            assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_steep_path_loss_large_threshold(self):
        """Large exponents push a - b near zero; the kernel must still
        evaluate across the full threshold range."""
        for beta in (20.0, 40.0, 80.0):
            for t in (1.0, 1e2, 1e4):
                want = 2 * t / (beta - 2) * hyp2f1(1.0, 1 - 2 / beta, 2 - 2 / beta, -t)
                assert z1(t, beta) == pytest.approx(want, rel=1e-9)

    def test_domain(self):
        with pytest.raises(DomainError):
            z1(1.0, 2.0)
        with pytest.raises(DomainError):
            z1(-0.5, 4.0)


class TestQuadrature:
    def test_exponential(self):
        assert integrate_semi_infinite(lambda r: math.exp(-r)) == pytest.approx(1.0, rel=1e-10)

    def test_nearest_distance_density_normalizes(self):
        """2 pi phi r exp(-pi phi r^2) integrates to one for any intensity."""
        for phi in (5.0930e-6, 1e-4, 2.0):
            val = integrate_semi_infinite(
                lambda r: 2.0 * math.pi * phi * r * math.exp(-math.pi * phi * r * r)
            )
            assert val == pytest.approx(1.0, rel=1e-9)

    def test_gaussian_moment(self):
        assert integrate_semi_infinite(lambda r: r * math.exp(-r * r)) \
            == pytest.approx(0.5, rel=1e-10)

    def test_known_antiderivatives_meet_tolerance(self):
        cases = [
            (lambda r: math.exp(-3.0 * r), 1.0 / 3.0),
            (lambda r: r * r * math.exp(-r), 2.0),
            (lambda r: 1.0 / (1.0 + r * r), math.pi / 2.0),
            (lambda r: math.exp(-((r - 4.0) ** 2)), None),  # vs scipy below
        ]
        for f, expected in cases:
            if expected is None:
                expected, _ = quad(f, 0, np.inf)
            cfg = QuadratureConfig(rel_tol=1e-9, abs_tol=1e-13, max_subdivisions=400)
            assert integrate_semi_infinite(f, cfg) == pytest.approx(expected, rel=1e-8)

    def test_determinism(self):
        f = lambda r: r * math.exp(-0.3 * r * r)
        assert integrate_semi_infinite(f) == integrate_semi_infinite(f)

    def test_budget_error_carries_estimate(self):
        cfg = QuadratureConfig(rel_tol=1e-15, abs_tol=0.0, max_subdivisions=9)
        with pytest.raises(QuadratureError) as err:
            integrate_semi_infinite(lambda r: math.exp(-((r - 4.0) ** 2)), cfg)
        assert err.value.error_bound > 0.0
        assert math.isfinite(err.value.estimate)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            QuadratureConfig(rel_tol=0.0)
        with pytest.raises(ValueError):
            QuadratureConfig(abs_tol=-1.0)
        with pytest.raises(ValueError):
            QuadratureConfig(max_subdivisions=0)
