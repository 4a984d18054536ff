"""K-cross-covariances: rank-based form, parametric oracles, stacking."""
import numpy as np
import pytest

from varmarank.crosscov import (
    crosscov_stack,
    parametric_crosscov,
    rank_crosscov,
    rank_crosscov_all_lags,
    score_parametric_crosscov,
)
from varmarank.elliptical import (
    RadialLaw,
    gaussian,
    make_score_pair,
    sample_elliptical,
)
from varmarank.tyler import tyler_fit, tyler_residuals
from varmarank.util import vec
from conftest import philox


def fit_and_rank(z):
    fit = tyler_fit(z)
    return fit, tyler_residuals(fit, z)


class TestRankCrossCov:
    def test_sign_scores_k1_two_points(self):
        # one product of opposite signs: the lag-1 matrix is -1
        z = np.array([1.7, -0.4])
        fit, rr = fit_and_rank(z)
        g = rank_crosscov(make_score_pair("sign", 1), rr, fit, 1)
        assert g.shape == (1, 1)
        assert g[0, 0] == pytest.approx(-1.0)

    def test_sign_scores_match_direct_formula(self, rng):
        z = rng.standard_normal((30, 2))
        fit, rr = fit_and_rank(z)
        g = rank_crosscov(make_score_pair("sign", 2), rr, fit, 2)
        inner = sum(np.outer(rr.W[t], rr.W[t - 2]) for t in range(2, 30)) / 28
        ct = fit.shape_factor.T
        ref = ct @ inner @ np.linalg.inv(ct)
        assert np.abs(g - ref).max() < 1e-12

    def test_lag_bounds(self, rng):
        z = rng.standard_normal((10, 2))
        fit, rr = fit_and_rank(z)
        sp = make_score_pair("sign", 2)
        with pytest.raises(ValueError):
            rank_crosscov(sp, rr, fit, 0)
        with pytest.raises(ValueError):
            rank_crosscov(sp, rr, fit, 10)

    def test_all_lags_matches_single(self, rng):
        z = rng.standard_normal((40, 2))
        fit, rr = fit_and_rank(z)
        sp = make_score_pair("vdw", 2)
        allg = rank_crosscov_all_lags(sp, rr, fit)
        for lag in (1, 3, 17, 39):
            single = rank_crosscov(sp, rr, fit, lag)
            assert np.abs(allg[lag - 1] - single).max() < 1e-10

    def test_monotone_radial_invariance(self, rng):
        z = rng.standard_normal((50, 2))
        fit, rr = fit_and_rank(z)
        sp = make_score_pair("spearman", 2)
        g1 = rank_crosscov(sp, rr, fit, 1)
        z2 = np.sqrt(rr.d)[:, None] * (z / rr.d[:, None]) * 2.0  # g(r)=2 sqrt(r)
        fit2, rr2 = fit_and_rank(z2)
        g2 = rank_crosscov(sp, rr2, fit2, 1)
        assert np.array_equal(rr.ranks, rr2.ranks)
        assert np.abs(g1 - g2).max() < 1e-9


class TestParametricCrossCov:
    def test_gaussian_identity_scatter_reduces_to_crosscov(self, rng):
        z = rng.standard_normal((25, 2))
        law = RadialLaw(gaussian(), 2)
        g = parametric_crosscov(law, np.eye(2), z, 1)
        ref = sum(np.outer(z[t], z[t - 1]) for t in range(1, 25)) / 24
        assert np.abs(g - ref).max() < 1e-12

    def test_single_term_average(self, rng):
        z = rng.standard_normal((6, 2))
        law = RadialLaw(gaussian(), 2)
        g = parametric_crosscov(law, np.eye(2), z, 5)
        assert np.abs(g - np.outer(z[5], z[0])).max() < 1e-12

    def test_representation_gap_shrinks(self):
        # Prop-2-style trend: sqrt(n) * gap between the rank version and the
        # score-matched oracle should not grow with n
        law = RadialLaw(gaussian(), 2)
        sp = make_score_pair("vdw", 2)
        med = {}
        for n in (100, 400, 1600):
            devs = []
            for rep in range(40):
                g = philox(1000 * n + rep)
                z = sample_elliptical(law, np.eye(2), n, g)
                fit, rr = fit_and_rank(z)
                a = rank_crosscov(sp, rr, fit, 1)
                b = score_parametric_crosscov(sp, law, np.eye(2), z, 1)
                devs.append(np.sqrt(n) * np.linalg.norm(vec(a - b)))
            med[n] = np.median(devs)
        slope = (np.log(med[1600]) - np.log(med[100])) / np.log(16)
        assert slope < 0.1


class TestStack:
    def test_single_lag(self, rng):
        g = rng.standard_normal((1, 2, 2))
        s = crosscov_stack(g, 10)
        assert s.shape == (4,)
        assert np.allclose(s, 3.0 * vec(g[0]))

    def test_zero_matrices(self):
        assert np.abs(crosscov_stack(np.zeros((3, 2, 2)), 9)).max() == 0.0

    def test_dimension(self, rng):
        g = rng.standard_normal((5, 3, 3))
        assert crosscov_stack(g, 100).shape == (45,)

    def test_too_many_lags(self, rng):
        with pytest.raises(ValueError):
            crosscov_stack(rng.standard_normal((10, 2, 2)), 10)


class TestNullMoments:
    def test_mean_and_covariance_under_sphericity(self):
        # MC check of the limiting first two moments of sqrt(n-i) vec(crosscov)
        law = RadialLaw(gaussian(), 2)
        sp = make_score_pair("sign", 2)
        n, reps = 200, 400
        vals = np.empty((reps, 4))
        for rep in range(reps):
            g = philox(777 + rep)
            z = sample_elliptical(law, np.eye(2), n, g)
            fit, rr = fit_and_rank(z)
            vals[rep] = np.sqrt(n - 1) * vec(rank_crosscov(sp, rr, fit, 1))
        # limiting covariance: (E K1^2 E K2^2 / k^2) Sigma o Sigma^{-1} = I/4
        assert np.abs(vals.mean(axis=0)).max() < 4 * 0.5 / np.sqrt(reps) + 0.02
        cov = vals.T @ vals / reps
        assert np.abs(cov - np.eye(4) / 4).max() < 0.08

    def test_cross_lag_independence(self):
        law = RadialLaw(gaussian(), 2)
        sp = make_score_pair("spearman", 2)
        n, reps = 150, 300
        v1 = np.empty((reps, 4))
        v2 = np.empty((reps, 4))
        for rep in range(reps):
            g = philox(31337 + rep)
            z = sample_elliptical(law, np.eye(2), n, g)
            fit, rr = fit_and_rank(z)
            allg = rank_crosscov_all_lags(sp, rr, fit, max_lag=2)
            v1[rep] = np.sqrt(n - 1) * vec(allg[0])
            v2[rep] = np.sqrt(n - 2) * vec(allg[1])
        cross = v1.T @ v2 / reps
        assert np.abs(cross).max() < 0.05
