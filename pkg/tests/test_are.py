"""Efficiency functionals, reference tables, Bessel machinery, bounds."""
import numpy as np
import pytest
from scipy.special import jv

from varmarank.are import (
    POWER_EXPONENTIAL_ARE_REFERENCE,
    SPEARMAN_BOUND_REFERENCE,
    are_adaptive,
    are_f_star,
    are_fixed_score,
    are_power_exponential,
    bessel_j,
    ck,
    cross_moment_d_phi,
    dk,
    find_ck,
    spearman_lower_bound,
)
from varmarank.elliptical import (
    RadialLaw,
    gaussian,
    laplace,
    make_score_pair,
    power_exponential,
    student,
)
from conftest import philox


class TestFunctionals:
    def test_vdw_at_gaussian_equals_k(self):
        for k in (1, 2, 3, 5):
            law = RadialLaw(gaussian(), k)
            sp = make_score_pair("vdw", k)
            assert dk(sp.k2, law) == pytest.approx(k, rel=1e-9)
            assert ck(sp.k1, law) == pytest.approx(k, rel=1e-9)

    def test_sign_at_gaussian_chi_mean(self):
        from math import gamma, sqrt

        for k in (1, 2, 4):
            law = RadialLaw(gaussian(), k)
            sp = make_score_pair("sign", k)
            chi_mean = sqrt(2) * gamma((k + 1) / 2) / gamma(k / 2)
            assert dk(sp.k2, law) == pytest.approx(chi_mean, rel=1e-10)
            assert ck(sp.k1, law) == pytest.approx(chi_mean, rel=1e-10)

    def test_spearman_against_mc(self):
        # quadrature vs a direct Monte Carlo of E[U quantile(U)]
        law = RadialLaw(student(5.0), 2)
        sp = make_score_pair("spearman", 2)
        val = dk(sp.k2, law)
        u = philox(10).random(400_000)
        mc = float(np.mean(u * law.quantile(u)))
        assert val == pytest.approx(mc, abs=4 * 2.0 / np.sqrt(4e5))

    def test_d_phi_cross_moment_is_k(self):
        # E[d phi_f(d)] = k under regularity, for every family
        for density, k in [
            (gaussian(), 3),
            (laplace(), 2),
            (student(5.0), 2),
            (power_exponential(0.5), 4),
        ]:
            law = RadialLaw(density, k)
            assert cross_moment_d_phi(law) == pytest.approx(k, rel=1e-8)

    def test_ck_requires_score(self):
        from varmarank.elliptical import custom_density

        grid = np.linspace(1e-3, 12, 200)
        law = RadialLaw(custom_density(grid, np.exp(-grid)), 2)
        with pytest.raises(ValueError):
            ck(make_score_pair("sign", 2).k1, law)


class TestFixedScoreAre:
    def test_vdw_at_gaussian_is_one(self):
        for k in (1, 2, 3):
            rep = are_fixed_score(make_score_pair("vdw", k), RadialLaw(gaussian(), k))
            assert rep.are == pytest.approx(1.0, abs=1e-9)

    def test_sign_at_gaussian_k2(self):
        rep = are_fixed_score(make_score_pair("sign", 2), RadialLaw(gaussian(), 2))
        assert rep.are == pytest.approx((np.pi / 2) ** 2 / 4, rel=1e-9)

    def test_scale_homogeneity(self):
        from varmarank.elliptical import ScorePair

        base = make_score_pair("spearman", 2)
        law = RadialLaw(student(8.0), 2)
        scaled = ScorePair(
            "scaled",
            lambda u: 7.0 * base.k1(u),
            lambda u: 3.0 * base.k2(u),
            49.0 * base.e_k1_sq,
            9.0 * base.e_k2_sq,
        )
        assert are_fixed_score(scaled, law).are == pytest.approx(
            are_fixed_score(base, law).are, rel=1e-9
        )

    def test_fscore_equals_cross_functional_path(self):
        # two independent code paths for the same quantity
        for f_star, f in [(gaussian(), student(8.0)), (laplace(), gaussian())]:
            k = 2
            sp = make_score_pair("fscore", k, f_star)
            a = are_fixed_score(sp, RadialLaw(f, k)).are
            b = are_f_star(f_star, f, k)
            assert a == pytest.approx(b, rel=1e-6)


class TestAdaptiveAre:
    def test_gaussian_is_one(self):
        for k in (1, 2, 4):
            assert are_adaptive(gaussian(), k) == pytest.approx(1.0, rel=1e-10)

    def test_f_star_reduces_to_adaptive_at_own_law(self):
        for density, k in [(laplace(), 2), (student(6.0), 3)]:
            assert are_f_star(density, density, k) == pytest.approx(
                are_adaptive(density, k), rel=1e-6
            )

    def test_power_exponential_cross_validation(self):
        # closed form vs the moment-functional path
        for k, nu in [(2, 0.5), (3, 2.0), (4, 1.0), (6, 5.0)]:
            assert are_adaptive(power_exponential(nu), k) == pytest.approx(
                are_power_exponential(k, nu), rel=1e-9
            )

    def test_heavy_tail_rejected(self):
        with pytest.raises(ValueError):
            are_adaptive(student(2.0), 2)


class TestPowerExponentialTable:
    def test_all_reference_cells(self):
        for (k, nu), ref in POWER_EXPONENTIAL_ARE_REFERENCE.items():
            if ref is None:
                with pytest.raises(ValueError):
                    are_power_exponential(k, nu)
            else:
                assert are_power_exponential(k, nu) == pytest.approx(ref, abs=0.01)

    def test_nu_one_is_exactly_one(self):
        for k in (1, 3, 4, 6, 8, 10):
            assert are_power_exponential(k, 1.0) == pytest.approx(1.0, abs=1e-12)

    def test_constraint_boundary(self):
        with pytest.raises(ValueError):
            are_power_exponential(1, 0.25)  # 4 nu + k - 2 = 0
        assert np.isfinite(are_power_exponential(1, 0.2500001))


class TestBessel:
    def test_against_scipy_grid(self):
        orders = [0.0, 0.5, -0.5, 0.866025, -0.133975, 2.179, 5.0, 9.9875]
        xs = [0.05, 0.7, 3.0, 9.99, 10.01, 14.0, 22.0, 37.0, 60.0]
        for r in orders:
            for x in xs:
                assert bessel_j(r, x) == pytest.approx(jv(r, x), abs=1e-12)

    def test_at_zero(self):
        assert bessel_j(0.0, 0.0) == 1.0
        assert bessel_j(0.5, 0.0) == 0.0

    def test_domain(self):
        with pytest.raises(ValueError):
            bessel_j(0.5, -1.0)
        with pytest.raises(ValueError):
            bessel_j(-1.5, 1.0)

    def test_half_order_closed_form(self):
        x = np.linspace(0.3, 30, 23)
        for xv in x:
            assert bessel_j(0.5, xv) == pytest.approx(
                np.sqrt(2 / (np.pi * xv)) * np.sin(xv), abs=1e-12
            )


class TestSpearmanBound:
    def test_k1_closed_form(self):
        assert find_ck(1) == pytest.approx(np.pi / 2, abs=1e-10)
        assert spearman_lower_bound(1) == pytest.approx(9 * np.pi**4 / 1024, abs=1e-9)

    def test_reference_cells(self):
        for k, ref in SPEARMAN_BOUND_REFERENCE.items():
            assert spearman_lower_bound(k) == pytest.approx(ref, abs=1e-3)

    def test_decreasing_for_k_ge_2(self):
        vals = [spearman_lower_bound(k) for k in (2, 3, 5, 8, 12, 20, 50)]
        assert all(a > b for a, b in zip(vals, vals[1:]))
        assert vals[-1] > 9 / 16


class TestChernoffSavage:
    DENSITIES = [student(5.0), student(8.0), student(15.0),
                 power_exponential(0.5), power_exponential(2.0),
                 power_exponential(5.0), laplace()]

    @pytest.mark.parametrize("k", [1, 2, 3, 4, 6])
    def test_vdw_never_worse_than_gaussian(self, k):
        for f in self.DENSITIES:
            assert are_f_star(gaussian(), f, k) >= 1.0 - 1e-9

    @pytest.mark.parametrize("k", [1, 2, 3, 4, 6])
    def test_equality_only_at_gaussian(self, k):
        assert are_f_star(gaussian(), gaussian(), k) == pytest.approx(1.0, abs=1e-9)
        assert are_f_star(gaussian(), student(5.0), k) > 1.0 + 1e-6
