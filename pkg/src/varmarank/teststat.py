"""Test statistics: the rank-based quadratic form, the Gaussian benchmark,
chi-square calibration, and local-power noncentrality.

Every statistic is a quadratic form T' J^{-1} T in the projected
cross-covariance stack T = n^{-1/2} Q' S, referred to a chi-square law with
k^2 pi0 degrees of freedom.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import gammainc, gammaincc, gammaincinv

from .crosscov import crosscov_stack, rank_crosscov_all_lags
from .elliptical import RadialLaw, ScorePair
from .structmat import StructuralSet, structural_set
from .tyler import TylerFit, standardized_residuals, tyler_fit, tyler_residuals
from .util import tri_sqrt, vec
from .varma import VarmaSpec, check_assumption_A, residuals

__all__ = [
    "TestReport",
    "NumericalError",
    "statistic_QK",
    "statistic_gaussian",
    "noncentrality",
    "gaussian_noncentrality_factor",
    "chi2_quantile",
    "chi2_upper_tail",
    "noncentrality_for_power",
]

_J_COND_LIMIT = 1e12


class NumericalError(RuntimeError):
    pass


@dataclass(frozen=True)
class TestReport:
    """Outcome of one adequacy test."""

    statistic: float
    df: int
    p_value: float
    alpha: float
    reject: bool
    scores: str
    n: int
    k: int
    p0: int
    q0: int
    p1: int
    q1: int
    pi: int
    pi0: int
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "df": self.df,
            "p_value": self.p_value,
            "alpha": self.alpha,
            "reject": self.reject,
            "scores": self.scores,
            "n": self.n,
            "k": self.k,
            "orders": {
                "p0": self.p0,
                "q0": self.q0,
                "p1": self.p1,
                "q1": self.q1,
                "pi": self.pi,
                "pi0": self.pi0,
            },
            "diagnostics": self.diagnostics,
        }


# -- chi-square plumbing ------------------------------------------------------


def chi2_quantile(df: int, u: float) -> float:
    """Lower-u quantile of the central chi-square law."""
    if df < 1:
        raise ValueError("df must be >= 1")
    if not 0.0 < u < 1.0:
        raise ValueError("probability must lie in (0, 1)")
    return float(2.0 * gammaincinv(df / 2.0, u))


def chi2_upper_tail(df: int, x: float, noncentrality: float = 0.0) -> float:
    """P(X > x) for (non)central chi-square; the noncentral tail is the
    Poisson mixture of central tails, truncated below 1e-14 mass."""
    if df < 1:
        raise ValueError("df must be >= 1")
    if noncentrality < 0:
        raise ValueError("noncentrality must be >= 0")
    x = float(x)
    if x <= 0:
        return 1.0
    if noncentrality == 0.0:
        return float(gammaincc(df / 2.0, x / 2.0))
    half = noncentrality / 2.0
    log_w = -half  # log Poisson(0) weight
    total = 0.0
    acc = 0.0  # accumulated Poisson mass
    j = 0
    while True:
        w = math.exp(log_w)
        total += w * float(gammaincc(df / 2.0 + j, x / 2.0))
        acc += w
        if 1.0 - acc < 1e-14 and j > half:
            break
        j += 1
        log_w += math.log(half) - math.log(j)
        if j > 100000:
            raise NumericalError("noncentral chi-square series did not truncate")
    return min(1.0, total)


def noncentrality_for_power(df: int, alpha: float, power: float) -> float:
    """Noncentrality giving the requested asymptotic power at level alpha."""
    crit = chi2_quantile(df, 1.0 - alpha)
    lo, hi = 0.0, 1.0
    while chi2_upper_tail(df, crit, hi) < power:
        hi *= 2.0
        if hi > 1e6:
            raise NumericalError("power target out of reach")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if chi2_upper_tail(df, crit, mid) < power:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# -- shared quadratic-form assembly -------------------------------------------


def _quadratic_form(struct: StructuralSet, stack: np.ndarray, J: np.ndarray) -> tuple[float, float]:
    """(T' J^{-1} T, cond(J)) with T = Q' stack (the n^{1/2} factors cancel
    against the statistic's leading n)."""
    cond = float(np.linalg.cond(J))
    if not np.isfinite(cond) or cond > _J_COND_LIMIT:
        raise NumericalError(f"information factor is ill-conditioned (cond ~ {cond:.2e})")
    t = struct.Q.T @ stack
    sol = cho_solve(cho_factor(J), t)
    return float(t @ sol), cond


def _truncate(struct_Q: np.ndarray, stack: np.ndarray, k2: int, lags: int | None):
    if lags is None:
        return struct_Q, stack, None
    rows = struct_Q.shape[0] // k2
    if not 1 <= lags <= rows:
        raise ValueError(f"lag truncation must lie in [1, {rows}]")
    qt = struct_Q[: lags * k2]
    tail = struct_Q[lags * k2 :]
    neglected = float(np.linalg.norm(tail)) if tail.size else 0.0
    return qt, stack[: lags * k2], neglected


def statistic_QK(
    series: np.ndarray,
    spec: VarmaSpec,
    p1: int,
    q1: int,
    scores: ScorePair,
    alpha: float = 0.05,
    known_sigma: np.ndarray | None = None,
    lags: int | None = None,
    fundamental_mixing: np.ndarray | None = None,
    tyler_tol: float = 1e-12,
    tyler_max_iter: int = 500,
) -> TestReport:
    """Rank-based adequacy statistic for the null spec at orders (p1, q1).

    Pipeline: residuals -> Tyler fit -> ranked residuals -> K-cross-
    covariances over all lags -> weighted stack -> projected quadratic form.
    ``known_sigma`` switches to the known-scatter oracle (exact distances and
    ranks, J built from the true scatter); ``lags`` truncates the lag window
    and records the neglected column mass.
    """
    X = np.asarray(series, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, k = X.shape
    report = check_assumption_A(spec)
    if not report.passed:
        raise ValueError(f"null spec fails stability diagnostics: {report.as_dict()}")
    Z = residuals(spec, X, check=False)

    diagnostics: dict = {}
    if known_sigma is None:
        fit = tyler_fit(Z, tol=tyler_tol, max_iter=tyler_max_iter)
        rr = tyler_residuals(fit, Z)
        sigma_hat = fit.scatter
        diagnostics["tyler_iterations"] = fit.iterations
        diagnostics["tyler_residual"] = fit.residual
    else:
        sigma_hat = np.asarray(known_sigma, dtype=float)
        _, inv_root = tri_sqrt(sigma_hat)
        fit = TylerFit(inv_root / inv_root[0, 0], 0, 0.0)
        # distances under the supplied scatter; the (1,1)-normalized factor
        # only rescales them, leaving ranks and directions unchanged
        rr = tyler_residuals(fit, Z)
        diagnostics["oracle_scatter"] = True

    struct = structural_set(spec, p1, q1, n, fundamental_mixing=fundamental_mixing)
    gammas = rank_crosscov_all_lags(scores, rr, fit)
    stack = crosscov_stack(gammas, n)
    Qm, stack, neglected = _truncate(struct.Q, stack, k * k, lags)
    if lags is not None:
        struct = StructuralSet(
            struct.spec, p1, q1, struct.pi, struct.pi0, struct.D, Qm, struct.M
        )
        diagnostics["neglected_column_mass"] = neglected
    J = struct.J(sigma_hat)
    quad, cond = _quadratic_form(struct, stack, J)
    diagnostics["j_condition"] = cond

    value = k * k / (scores.e_k1_sq * scores.e_k2_sq) * quad
    df = struct.df
    p = float(chi2_upper_tail(df, value))
    return TestReport(
        statistic=value,
        df=df,
        p_value=p,
        alpha=alpha,
        reject=bool(value > chi2_quantile(df, 1.0 - alpha)),
        scores=scores.tag,
        n=n,
        k=k,
        p0=spec.p,
        q0=spec.q,
        p1=p1,
        q1=q1,
        pi=struct.pi,
        pi0=struct.pi0,
        diagnostics=diagnostics,
    )


def statistic_gaussian(
    series: np.ndarray,
    spec: VarmaSpec,
    p1: int,
    q1: int,
    alpha: float = 0.05,
    lags: int | None = None,
) -> TestReport:
    """Parametric Gaussian benchmark (validity needs finite second moments).

    Residuals are standardized by the empirical covariance; the information
    factor uses the empirical covariance of the lag-product summands, making
    the quadratic form self-normalized.
    """
    X = np.asarray(series, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, k = X.shape
    report = check_assumption_A(spec)
    if not report.passed:
        raise ValueError(f"null spec fails stability diagnostics: {report.as_dict()}")
    Z = residuals(spec, X, check=False)
    S_emp = (Z.T @ Z) / n
    try:
        _, inv_root = tri_sqrt(S_emp)
    except ValueError as exc:
        raise NumericalError(f"singular empirical covariance: {exc}") from exc
    Y = Z @ inv_root.T

    # raw cross-covariances of the standardized residuals, all lags
    m = 1
    while m < 2 * n:
        m *= 2
    fy = np.fft.rfft(Y, m, axis=0)
    gammas = np.empty((n - 1, k, k))
    for b in range(k):
        c = np.fft.irfft(fy * np.conj(fy[:, b : b + 1]), m, axis=0)
        gammas[:, :, b] = c[1:n]
    gammas /= (n - 1.0 - np.arange(n - 1))[:, None, None]
    stack = crosscov_stack(gammas, n)

    prods = Y[1:, :, None] * Y[:-1, None, :]  # (n-1, k, k): Y_t Y_{t-1}'
    v = prods.transpose(0, 2, 1).reshape(n - 1, k * k)  # rows vec(Y_t Y_{t-1}')
    gamma_hat = (v.T @ v) / (n - 1.0)

    struct = structural_set(spec, p1, q1, n)
    k2 = k * k
    Qm, stack, neglected = _truncate(struct.Q, stack, k2, lags)
    rows = Qm.shape[0] // k2
    Qb = Qm.reshape(rows, k2, Qm.shape[1])
    tmp = np.einsum("ab,ubc->uac", gamma_hat, Qb, optimize=True)
    J = np.tensordot(Qb, tmp, axes=([0, 1], [0, 1]))
    J = 0.5 * (J + J.T)
    if lags is not None:
        struct = StructuralSet(
            struct.spec, p1, q1, struct.pi, struct.pi0, struct.D, Qm, struct.M
        )
    quad, cond = _quadratic_form(struct, stack, J)

    value = quad
    df = struct.df
    p = float(chi2_upper_tail(df, value))
    diagnostics = {"j_condition": cond}
    if lags is not None:
        diagnostics["neglected_column_mass"] = neglected
    return TestReport(
        statistic=value,
        df=df,
        p_value=p,
        alpha=alpha,
        reject=bool(value > chi2_quantile(df, 1.0 - alpha)),
        scores="gaussian",
        n=n,
        k=k,
        p0=spec.p,
        q0=spec.q,
        p1=p1,
        q1=q1,
        pi=struct.pi,
        pi0=struct.pi0,
        diagnostics=diagnostics,
    )


# -- local power --------------------------------------------------------------


def _dk_ck(scores: ScorePair, law: RadialLaw) -> tuple[float, float]:
    from .are import ck, dk

    return dk(scores.k2, law), ck(scores.k1, law)


def noncentrality(
    tau: np.ndarray,
    N: np.ndarray,
    law: RadialLaw,
    scores: ScorePair | None,
) -> float:
    """Asymptotic noncentrality under the local shift tau.

    For score pair K: (1/k^2) D^2(K2) C^2(K1) / (E K1^2 E K2^2) tau' N tau;
    with scores=None, the Gaussian benchmark's E^2[d phi_f(d)] / k^2 factor.
    """
    tau = np.asarray(tau, dtype=float)
    quad = float(tau @ N @ tau)
    k = law.k
    if scores is None:
        factor = gaussian_noncentrality_factor(law)
    else:
        d, c = _dk_ck(scores, law)
        factor = (d * d / scores.e_k2_sq) * (c * c / scores.e_k1_sq) / (k * k)
    return factor * quad


def gaussian_noncentrality_factor(law: RadialLaw) -> float:
    """E^2[d phi_f(d)] / k^2 for the Gaussian benchmark under law f."""
    from .are import cross_moment_d_phi

    val = cross_moment_d_phi(law)
    return val * val / law.k**2


def adaptive_noncentrality_factor(law: RadialLaw) -> float:
    """E[d^2] E[phi_f(d)^2] / k^2 for the estimated-score statistic."""
    v = law.distance_moment(2)
    i = law.fisher_information()
    if not (np.isfinite(v) and np.isfinite(i)):
        raise NumericalError("law violates the finite-moment requirements")
    return v * i / law.k**2
