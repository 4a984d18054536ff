"""Rank-based K-cross-covariance matrices and their parametric oracles.

The lag-i rank cross-covariance conjugates a score-weighted outer-product
average of Tyler residuals by the shape factor; the parametric versions use
the true scatter and radial law instead and serve as test oracles for the
asymptotic representation of the rank statistics.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

from .elliptical import RadialLaw, ScorePair
from .tyler import RankedResiduals, TylerFit, standardized_residuals
from .util import tri_sqrt, vec

__all__ = [
    "rank_crosscov",
    "rank_crosscov_all_lags",
    "parametric_crosscov",
    "score_parametric_crosscov",
    "crosscov_stack",
]


def _conjugate(ct: np.ndarray, inner: np.ndarray) -> np.ndarray:
    """C' inner (C')^{-1} without forming the inverse; ct is C' (lower tri)."""
    # X (C')^{-1} = Y  <=>  C' Y' ... solve on the right via transposes
    rhs = solve_triangular(ct, (ct @ inner).T, lower=True, trans="T").T
    return rhs


def _score_weighted_signs(
    scores: ScorePair, rr: RankedResiduals
) -> tuple[np.ndarray, np.ndarray]:
    u = rr.ranks / (rr.n + 1.0)
    k1, k2 = scores(u)
    return k1[:, None] * rr.W, k2[:, None] * rr.W


def _lagged_outer_sum(y: np.ndarray, v: np.ndarray, i: int) -> np.ndarray:
    """sum_{t=i+1}^{n} y_t v_{t-i}' for one lag (direct, pairwise summation)."""
    return np.einsum("ta,tb->ab", y[i:], v[: y.shape[0] - i], optimize=True)


def _all_lagged_outer_sums(y: np.ndarray, v: np.ndarray) -> np.ndarray:
    """sum_t y_t v_{t-i}' for every lag i = 1..n-1 at once via FFT correlation.

    Returns an (n-1, k, k) array; entry [i-1, a, b] = sum y[t, a] v[t-i, b].
    """
    n, k = y.shape
    m = 1
    while m < 2 * n:
        m *= 2
    fy = np.fft.rfft(y, m, axis=0)
    fv = np.fft.rfft(v, m, axis=0)
    # correlate each component pair: ifft(fy * conj(fv))[i] = sum_t y_t v_{t-i}
    out = np.empty((n - 1, k, k))
    for b in range(k):
        c = np.fft.irfft(fy * np.conj(fv[:, b : b + 1]), m, axis=0)
        out[:, :, b] = c[1:n]
    return out


def rank_crosscov(
    scores: ScorePair, rr: RankedResiduals, fit: TylerFit, lag: int
) -> np.ndarray:
    """Lag-i K-cross-covariance of the ranked Tyler residuals."""
    n = rr.n
    if not 1 <= lag <= n - 1:
        raise ValueError(f"lag must lie in [1, {n - 1}]")
    y, v = _score_weighted_signs(scores, rr)
    inner = _lagged_outer_sum(y, v, lag) / (n - lag)
    return _conjugate(fit.shape_factor.T, inner)


def rank_crosscov_all_lags(
    scores: ScorePair, rr: RankedResiduals, fit: TylerFit, max_lag: int | None = None
) -> np.ndarray:
    """All lag cross-covariances 1..max_lag (default n-1) as (m, k, k)."""
    n = rr.n
    m = n - 1 if max_lag is None else int(max_lag)
    if not 1 <= m <= n - 1:
        raise ValueError(f"max_lag must lie in [1, {n - 1}]")
    y, v = _score_weighted_signs(scores, rr)
    sums = _all_lagged_outer_sums(y, v)[:m]
    ct = fit.shape_factor.T
    out = np.empty_like(sums)
    for i in range(m):
        out[i] = _conjugate(ct, sums[i] / (n - 1 - i))
    return out


def parametric_crosscov(
    law: RadialLaw, sigma: np.ndarray, residuals: np.ndarray, lag: int
) -> np.ndarray:
    """Residual f-cross-covariance of lag i under known scatter and law.

    (n-i)^{-1} S'^{-1/2} [sum phi_f(d_t) d_{t-i} U_t U_{t-i}'] S'^{1/2},
    with distances/directions standardized by the true scatter.
    """
    z = np.asarray(residuals, dtype=float)
    n = z.shape[0]
    if not 1 <= lag <= n - 1:
        raise ValueError(f"lag must lie in [1, {n - 1}]")
    root, inv_root = tri_sqrt(np.asarray(sigma, dtype=float))
    rr = standardized_residuals(sigma, z)
    y = (law.score(rr.d))[:, None] * rr.W
    v = rr.d[:, None] * rr.W
    inner = _lagged_outer_sum(y, v, lag) / (n - lag)
    return inv_root.T @ inner @ root.T


def score_parametric_crosscov(
    scores: ScorePair,
    law: RadialLaw,
    sigma: np.ndarray,
    residuals: np.ndarray,
    lag: int,
) -> np.ndarray:
    """Oracle matching a rank cross-covariance: scores evaluated at the exact
    distance cdf values instead of normalized ranks."""
    z = np.asarray(residuals, dtype=float)
    n = z.shape[0]
    if not 1 <= lag <= n - 1:
        raise ValueError(f"lag must lie in [1, {n - 1}]")
    root, inv_root = tri_sqrt(np.asarray(sigma, dtype=float))
    rr = standardized_residuals(sigma, z)
    u = law.cdf(rr.d)
    k1, k2 = scores(u)
    inner = _lagged_outer_sum(k1[:, None] * rr.W, k2[:, None] * rr.W, lag) / (n - lag)
    return inv_root.T @ inner @ root.T


def crosscov_stack(gammas: np.ndarray, n: int) -> np.ndarray:
    """Weighted stack of vectorized lag matrices: ((n-i)^{1/2} vec G_i)_i."""
    gammas = np.asarray(gammas, dtype=float)
    m = gammas.shape[0]
    if m > n - 1:
        raise ValueError("more lags than n - 1")
    weights = np.sqrt(n - 1.0 - np.arange(m))
    return np.concatenate([weights[i] * vec(gammas[i]) for i in range(m)])
