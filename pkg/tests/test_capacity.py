"""Closed-form capacity machinery against quadrature oracles and identities."""

import math

import numpy as np
import pytest

from gnormal import (
    DomainError,
    TailQuery,
    VolatilityBand,
    norm_cdf,
    norm_quantile,
    p1,
    p2_approx,
    profile_f,
    profile_f_yy,
    relative_error_bound,
    relative_error_bound_closed_form,
    two_sided_error_bound,
    u_one_sided,
    v_one_sided,
)

import oracles

BAND = VolatilityBand(0.8, 1.0)


class TestVolatilityBand:
    def test_validation(self):
        VolatilityBand(0.0, 1.0)  # degenerate lower edge allowed at the type level
        with pytest.raises(DomainError):
            VolatilityBand(1.0, 0.5)
        with pytest.raises(DomainError):
            VolatilityBand(-0.1, 1.0)
        with pytest.raises(DomainError):
            VolatilityBand(0.0, 0.0)
        with pytest.raises(DomainError):
            VolatilityBand(0.5, math.inf)

    def test_closed_form_requires_positive_lo(self):
        degenerate = VolatilityBand(0.0, 1.0)
        with pytest.raises(DomainError):
            profile_f(0.3, degenerate)
        with pytest.raises(DomainError):
            p1(1.0, degenerate)


class TestProfileF:
    def test_limits(self):
        assert profile_f(math.inf, BAND) == 1.0
        assert profile_f(-math.inf, BAND) == 0.0

    def test_center_value(self):
        # f(0) = sigma_hi / (sigma_hi + sigma_lo); quadrature oracle agrees
        assert profile_f(0.0, BAND) == pytest.approx(1.0 / 1.8, rel=1e-15)
        assert float(oracles.profile_f_quad(0.0, 0.8, 1.0)) == pytest.approx(
            1.0 / 1.8, rel=1e-12
        )

    def test_against_quadrature_oracle(self):
        for y in (-3.0, -1.2, -0.4, 0.0, 0.7, 1.9, 4.0):
            expected = float(oracles.profile_f_quad(y, 0.8, 1.0))
            assert profile_f(y, BAND) == pytest.approx(expected, abs=1e-12)

    def test_classical_reduction(self):
        band = VolatilityBand(0.7, 0.7)
        for y in np.linspace(-5, 5, 41):
            assert profile_f(float(y), band) == pytest.approx(
                norm_cdf(float(y) / 0.7), abs=1e-12
            )

    def test_monotone(self):
        ys = np.linspace(-6, 6, 121)
        vals = [profile_f(float(y), BAND) for y in ys]
        assert all(b >= a for a, b in zip(vals, vals[1:]))


class TestProfileFyy:
    def test_zero_at_origin(self):
        assert profile_f_yy(0.0, BAND) == 0.0

    def test_sign(self):
        assert profile_f_yy(-1.0, BAND) > 0.0
        assert profile_f_yy(1.0, BAND) < 0.0

    def test_argmax_at_minus_sigma_hi(self):
        # grid-search oracle over y < 0
        ys = np.linspace(-4, -1e-3, 4001)
        vals = np.array([profile_f_yy(float(y), BAND) for y in ys])
        best = ys[int(vals.argmax())]
        assert best == pytest.approx(-BAND.sigma_hi, abs=2e-3)

    def test_matches_finite_difference_of_f(self):
        h = 1e-4
        for y in (-2.5, -1.0, -0.2, 0.3, 1.5, 3.0):
            central = (
                profile_f(y + h, BAND) - 2 * profile_f(y, BAND) + profile_f(y - h, BAND)
            ) / (h * h)
            assert profile_f_yy(y, BAND) == pytest.approx(central, abs=1e-6)


class TestOneSidedSolutions:
    def test_initial_condition(self):
        assert u_one_sided(TailQuery(c=0.0, t=0.0, x=1.0), BAND) == 1.0
        assert u_one_sided(TailQuery(c=0.0, t=0.0, x=-1.0), BAND) == 0.0
        assert v_one_sided(TailQuery(c=0.5, t=0.0, x=-1.0), BAND) == 1.0

    def test_self_similarity_at_threshold(self):
        f0 = profile_f(0.0, BAND)
        for t in (0.25, 1.0, 4.0):
            assert u_one_sided(TailQuery(c=0.3, t=t, x=0.3), BAND) == pytest.approx(f0)

    def test_center_equals_f0(self):
        assert u_one_sided(TailQuery(c=0.0, t=1.0, x=0.0), BAND) == pytest.approx(
            1.0 / 1.8, rel=1e-15
        )

    def test_self_similarity_property(self):
        c = 0.7
        for a in (0.25, 4.0, 9.0):
            for t in (0.3, 1.0, 2.0):
                for x in (-2.0, 0.1, 1.4, 3.0):
                    lhs = u_one_sided(
                        TailQuery(c=c, t=a * t, x=math.sqrt(a) * (x - c) + c), BAND
                    )
                    rhs = u_one_sided(TailQuery(c=c, t=t, x=x), BAND)
                    assert lhs == pytest.approx(rhs, abs=1e-14)

    def test_v_is_mirror_of_u(self):
        for t in (0.5, 1.0):
            for x in np.linspace(-4, 4, 33):
                q = TailQuery(c=0.9, t=t, x=float(x))
                qm = TailQuery(c=0.9, t=t, x=-float(x))
                assert v_one_sided(q, BAND) == u_one_sided(qm, BAND)

    def test_negative_time_rejected(self):
        with pytest.raises(DomainError):
            TailQuery(c=0.0, t=-1.0, x=0.0)

    def test_pde_residual_shrinks_second_order(self):
        # u_t - G(u_xx) = 0 away from the kink; central differences of the
        # closed form should show O(h^2) residuals.
        def g_of(m):
            return 0.5 * (
                BAND.sigma_hi**2 * max(m, 0.0) + BAND.sigma_lo**2 * min(m, 0.0)
            )

        def residual(h):
            worst = 0.0
            c = 0.4
            for t in np.linspace(0.5, 1.0, 6):
                for x in np.linspace(-3, 3, 25):
                    if abs(x - c) < 0.15:
                        continue  # f_yy jumps at the kink
                    u = lambda tt, xx: u_one_sided(TailQuery(c=c, t=tt, x=xx), BAND)
                    ut = (u(t + h, x) - u(t - h, x)) / (2 * h)
                    uxx = (u(t, x + h) - 2 * u(t, x) + u(t, x - h)) / (h * h)
                    worst = max(worst, abs(ut - g_of(uxx)))
            return worst

        r1, r2 = residual(0.02), residual(0.01)
        assert r2 <= r1 / 3.0


class TestP1:
    def test_classical(self):
        band = VolatilityBand(1.0, 1.0)
        for c in (-1.0, 0.0, 0.5, 1.96, 3.0):
            assert p1(c, band) == pytest.approx(norm_cdf(-c), abs=1e-14)

    def test_alpha_formula(self):
        # p1(sigma_hi * Phi^-1(1-alpha)) = 2 alpha / (1 + sigma_lo/sigma_hi)
        for alpha in (0.01, 0.05, 0.1, 0.5):
            c = BAND.sigma_hi * norm_quantile(1.0 - alpha)
            expected = 2.0 * alpha / (1.0 + BAND.sigma_lo / BAND.sigma_hi)
            assert p1(c, BAND) == pytest.approx(expected, rel=1e-13)

    def test_at_zero(self):
        assert p1(0.0, BAND) == pytest.approx(1.0 / 1.8, rel=1e-15)

    def test_against_quadrature_oracle(self):
        for c in (-2.0, -0.5, 0.0, 0.8, 2.5):
            expected = float(oracles.p1_quad(c, 0.8, 1.0))
            assert p1(c, BAND) == pytest.approx(expected, abs=1e-12)

    def test_monotone_decreasing_and_limits(self):
        cs = np.linspace(-6, 6, 121)
        vals = [p1(float(c), BAND) for c in cs]
        assert all(b <= a for a, b in zip(vals, vals[1:]))
        assert p1(-40.0, BAND) == pytest.approx(1.0)
        assert p1(40.0, BAND) == pytest.approx(0.0, abs=1e-300)

    def test_equals_u_at_unit_time_origin(self):
        for c in (-1.0, 0.0, 0.7, 2.2):
            assert p1(c, BAND) == u_one_sided(TailQuery(c=c, t=1.0, x=0.0), BAND)

    def test_band_monotonicity(self):
        # enlarging the band never decreases p1 for c >= 0
        rng = np.random.default_rng(42)
        for _ in range(200):
            lo, hi = sorted(rng.uniform(0.05, 3.0, size=2))
            c = rng.uniform(0.0, 4.0)
            base = p1(c, VolatilityBand(lo, hi))
            assert p1(c, VolatilityBand(lo * 0.7, hi)) >= base - 1e-15
            assert p1(c, VolatilityBand(lo, hi * 1.3)) >= base - 1e-15


class TestTwoSidedApprox:
    def test_headline_trio(self):
        # the three headline two-sided values; full precision from 2*p1
        a95 = p2_approx(norm_quantile(0.95), BAND)
        a975 = p2_approx(norm_quantile(0.975), BAND)
        a995 = p2_approx(norm_quantile(0.995), BAND)
        assert round(a95.value, 2) == 0.11
        assert round(a975.value, 3) == 0.056
        assert round(a995.value, 3) == 0.011
        assert a95.value == pytest.approx(0.1111111111111111, rel=1e-13)
        assert a975.value == pytest.approx(0.05555555555555556, rel=1e-13)
        assert a995.value == pytest.approx(0.011111111111111112, rel=1e-13)
        assert a95.rel_error_bound < 2e-3
        assert a975.rel_error_bound < 4e-4
        assert a995.rel_error_bound < 5e-6

    def test_precondition(self):
        with pytest.raises(DomainError):
            p2_approx(0.5, BAND)  # = sigma_hi/2 exactly, not strictly above

    def test_classical_case(self):
        band = VolatilityBand(1.0, 1.0)
        approx = p2_approx(1.96, band)
        assert approx.value == pytest.approx(2 * norm_cdf(-1.96), rel=1e-14)
        assert approx.abs_error_bound == 0.0
        assert approx.rel_error_bound == 0.0


class TestErrorBounds:
    def test_classical_vanishes(self):
        band = VolatilityBand(0.9, 0.9)
        assert two_sided_error_bound(1.0, 1.0, band) == 0.0
        assert relative_error_bound(1.0, 1.0, band) == 0.0
        assert relative_error_bound_closed_form(1.0, 1.0, band) == 0.0

    def test_frozen_value(self):
        # 0.4 * Phi(-3.92), derived by direct formula evaluation
        assert two_sided_error_bound(1.96, 1.0, BAND) == pytest.approx(
            1.770979372482829e-05, rel=1e-12
        )

    def test_monotone_in_c(self):
        for c in (0.8, 1.2, 2.0, 3.1):
            assert two_sided_error_bound(2 * c, 1.0, BAND) < two_sided_error_bound(
                c, 1.0, BAND
            )

    def test_preconditions(self):
        with pytest.raises(DomainError):
            two_sided_error_bound(0.4, 1.0, BAND)  # c <= sigma_hi sqrt(t)/2
        with pytest.raises(DomainError):
            relative_error_bound(0.5, 1.0, BAND)
        with pytest.raises(DomainError):
            relative_error_bound(1.0, -1.0, BAND)

    def test_relative_bound_frozen_values(self):
        # sharp ratio bound at the three headline thresholds (t = 1)
        vals = [
            (norm_quantile(0.95), 1.805246e-03),
            (norm_quantile(0.975), 3.188716e-04),
            (norm_quantile(0.995), 4.647465e-06),
        ]
        for c, expected in vals:
            assert relative_error_bound(c, 1.0, BAND) == pytest.approx(
                expected, rel=1e-5
            )

    def test_closed_form_dominates_asymptotic_form(self):
        # at t = 1 the printed expression dominates
        # (1 - lo^2/hi^2)/4 * exp(-3 c^2 / (2 hi^2))
        lo, hi = BAND.sigma_lo, BAND.sigma_hi
        for c in np.linspace(0.6, 5.0, 45):
            asymptotic = (1 - lo**2 / hi**2) / 4 * math.exp(-1.5 * c * c / hi**2)
            assert relative_error_bound_closed_form(float(c), 1.0, BAND) >= asymptotic

    def test_sharp_bound_is_rigorous_and_tighter_than_closed_form(self):
        for c in np.linspace(0.6, 4.0, 35):
            sharp = relative_error_bound(float(c), 1.0, BAND)
            loose = relative_error_bound_closed_form(float(c), 1.0, BAND)
            assert 0.0 < sharp <= loose * 1.0000001


class TestClassicalReduction:
    def test_everything_collapses(self):
        sigma = 1.3
        band = VolatilityBand(sigma, sigma)
        for c in (0.8, 1.5, 2.7):
            assert p1(c, band) == pytest.approx(norm_cdf(-c / sigma), abs=1e-12)
            assert p2_approx(c, band).value == pytest.approx(
                2 * norm_cdf(-c / sigma), abs=1e-12
            )
            for t in (0.5, 1.0):
                for x in (-1.0, 0.0, 2.0):
                    q = TailQuery(c=c, t=t, x=x)
                    assert u_one_sided(q, band) == pytest.approx(
                        norm_cdf((x - c) / (sigma * math.sqrt(t))), abs=1e-12
                    )
