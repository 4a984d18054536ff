"""Estimated-score machinery: density estimate, score pair, statistic."""
import numpy as np
import pytest

from varmarank.adaptive import (
    adaptive_crosscov,
    adaptive_score_pair,
    estimate_radial_density,
    statistic_adaptive,
)
from varmarank.crosscov import rank_crosscov
from varmarank.elliptical import (
    RadialLaw,
    gaussian,
    make_score_pair,
    sample_elliptical,
)
from varmarank.tyler import tyler_fit, tyler_residuals
from varmarank.util import vec
from varmarank.varma import VarmaSpec, simulate
from conftest import philox


def gaussian_distances(seed, n, k=2):
    return np.sqrt(philox(seed).chisquare(k, size=n))


class TestEstimate:
    def test_canonical_normalization(self):
        est = estimate_radial_density(gaussian_distances(1, 600), 2)
        assert est.second_moment == pytest.approx(1.0, abs=1e-8)

    def test_pdf_properties(self):
        est = estimate_radial_density(gaussian_distances(2, 800), 2)
        r = np.exp(est.grid_log) / est.scale
        pdf = est.scale * est.grid_pdf
        assert (pdf >= 0).all()
        assert np.trapezoid(pdf, r) == pytest.approx(1.0, abs=1e-6)

    def test_cdf_quantile_roundtrip(self):
        est = estimate_radial_density(gaussian_distances(3, 500), 2)
        u = np.linspace(0.05, 0.95, 19)
        q = np.asarray(est.quantile(u))
        assert np.abs(np.asarray(est.cdf(q)) - u).max() < 1e-6

    def test_minimum_sample_size(self):
        with pytest.raises(ValueError):
            estimate_radial_density(gaussian_distances(4, 49), 2)

    def test_positive_distances_required(self):
        d = gaussian_distances(5, 100)
        d[3] = 0.0
        with pytest.raises(ValueError):
            estimate_radial_density(d, 2)

    def test_degenerate_distances_rejected(self):
        with pytest.raises(ValueError):
            estimate_radial_density(np.full(100, 2.0), 2)

    def test_information_near_k_at_gaussian(self):
        # raw-scale information approximates E[phi^2(d)] = k
        est = estimate_radial_density(gaussian_distances(6, 5000), 2, rescale=False)
        assert abs(est.information - 2.0) / 2.0 < 0.10

    def test_score_envelope_vs_vdw(self):
        from scipy.special import gammaincinv

        est = estimate_radial_density(gaussian_distances(7, 5000), 2, rescale=False)
        sp = adaptive_score_pair(est)
        u = np.linspace(0.1, 0.9, 33)
        vdw = np.sqrt(2 * gammaincinv(1.0, u))
        assert np.abs(sp.k1(u) - vdw).max() < 0.15
        assert np.abs(sp.k2(u) - vdw).max() < 0.15

    def test_density_type_invariance(self):
        # the normalization product and canonical scores depend on the data
        # only through the density type (joint rescaling drops out)
        d = gaussian_distances(8, 800)
        e1 = estimate_radial_density(d, 2)
        e2 = estimate_radial_density(3.7 * d, 2)
        assert e1.information * e1.second_moment == pytest.approx(
            e2.information * e2.second_moment, rel=1e-6
        )
        u = np.linspace(0.05, 0.95, 19)
        s1, s2 = adaptive_score_pair(e1), adaptive_score_pair(e2)
        assert np.abs(s1.k1(u) - s2.k1(u)).max() < 1e-6
        assert np.abs(s1.k2(u) - s2.k2(u)).max() < 1e-6

    def test_rescaled_product_matches_raw(self):
        d = gaussian_distances(9, 700)
        raw = estimate_radial_density(d, 2, rescale=False)
        can = estimate_radial_density(d, 2, rescale=True)
        assert raw.information * raw.second_moment == pytest.approx(
            can.information * can.second_moment, rel=1e-10
        )


class TestAdaptiveCrossCov:
    def test_matches_score_pair_form(self):
        rng = philox(21)
        z = sample_elliptical(RadialLaw(gaussian(), 2), np.eye(2), 200, rng)
        fit = tyler_fit(z)
        rr = tyler_residuals(fit, z)
        est = estimate_radial_density(rr.d, 2)
        g1 = adaptive_crosscov(est, rr, fit, 1)
        g2 = rank_crosscov(adaptive_score_pair(est), rr, fit, 1)
        assert np.array_equal(g1, g2)

    def test_close_to_vdw_at_gaussian(self):
        rng = philox(22)
        z = sample_elliptical(RadialLaw(gaussian(), 2), np.eye(2), 3000, rng)
        fit = tyler_fit(z)
        rr = tyler_residuals(fit, z)
        est = estimate_radial_density(rr.d, 2, rescale=False)
        ga = adaptive_crosscov(est, rr, fit, 1)
        gv = rank_crosscov(make_score_pair("vdw", 2), rr, fit, 1)
        assert np.abs(ga - gv).max() < 0.05

    def test_oracle_vs_plugin_gap_shrinks(self):
        # known-scatter scores vs Tyler plug-in scores: the gap between the
        # two cross-covariances shrinks faster than 1/sqrt(n)
        law = RadialLaw(gaussian(), 2)
        med = {}
        for n in (200, 800):
            devs = []
            for rep in range(30):
                rng = philox(40_000 + 13 * rep + n)
                z = sample_elliptical(law, np.eye(2), n, rng)
                fit = tyler_fit(z)
                rr = tyler_residuals(fit, z)
                est_hat = estimate_radial_density(rr.d, 2)
                g_hat = adaptive_crosscov(est_hat, rr, fit, 1)
                from varmarank.tyler import standardized_residuals

                rr0 = standardized_residuals(np.eye(2), z)
                fit0_c = np.eye(2)
                est_chk = estimate_radial_density(rr0.d, 2)
                from varmarank.tyler import TylerFit

                g_chk = adaptive_crosscov(est_chk, rr0, TylerFit(fit0_c, 0, 0.0), 1)
                devs.append(np.sqrt(n) * np.linalg.norm(vec(g_hat - g_chk)))
            med[n] = float(np.median(devs))
        assert med[800] < med[200] * 1.25  # no upward sqrt(n)-scaled trend


class TestAdaptiveStatistic:
    def test_report_contract(self):
        rng = philox(33)
        spec = VarmaSpec(2, 1, 0, (0.4 * np.eye(2),), ())
        eps = sample_elliptical(RadialLaw(gaussian(), 2), np.eye(2), 150, rng)
        series = simulate(spec, eps)
        rep = statistic_adaptive(series, spec, 2, 0)
        assert rep.statistic >= 0
        assert rep.df == 8
        assert rep.scores == "adaptive"
        assert "information_hat" in rep.diagnostics

    def test_df_matches_fixed_score(self):
        from varmarank.teststat import statistic_QK

        rng = philox(34)
        spec = VarmaSpec(2, 0, 0, (), ())
        series = sample_elliptical(RadialLaw(gaussian(), 2), np.eye(2), 120, rng)
        a = statistic_adaptive(series, spec, 1, 0)
        b = statistic_QK(series, spec, 1, 0, make_score_pair("sign", 2))
        assert a.df == b.df == 4

    def test_known_sigma_oracle(self):
        rng = philox(35)
        spec = VarmaSpec(2, 0, 0, (), ())
        series = sample_elliptical(RadialLaw(gaussian(), 2), np.eye(2), 100, rng)
        rep = statistic_adaptive(series, spec, 1, 0, known_sigma=np.eye(2))
        assert rep.diagnostics.get("oracle_scatter") is True
