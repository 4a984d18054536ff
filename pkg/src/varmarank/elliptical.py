"""Radial densities of elliptical white noise, their scores, and sampling.

An elliptical law on R^k factors into a scatter matrix and a radial density
f on (0, inf); the standardized distance of a draw has the genuine density
f_k(r) = r^(k-1) f(r) / mu_{k-1}.  This module provides the supported radial
families (Gaussian, double-exponential, Student t, power-exponential, custom
tabulated), the score phi_f = -2 (f^{1/2})' / f^{1/2}, score-function pairs
(K1, K2) for rank statistics, and quantile-transform sampling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, interpolate
from scipy.special import (
    betainc,
    betaincinv,
    gammainc,
    gammaincc,
    gammaincinv,
    gammaln,
    ndtr,
)

from .util import is_spd, tri_sqrt

__all__ = [
    "RadialDensity",
    "RadialLaw",
    "ScorePair",
    "gaussian",
    "laplace",
    "student",
    "power_exponential",
    "custom_density",
    "radial_pdf",
    "radial_cdf",
    "radial_quantile",
    "score_phi",
    "make_score_pair",
    "sample_elliptical",
    "sphere_surface",
]

_QUAD_OPTS = dict(epsabs=1e-12, epsrel=1e-9, limit=200)


def sphere_surface(k: int) -> float:
    """Surface measure of the unit sphere S^(k-1) in R^k."""
    return 2.0 * math.pi ** (k / 2.0) / math.gamma(k / 2.0)


@dataclass(frozen=True)
class RadialDensity:
    """A radial density family member.

    The generator f is identified only up to the joint rescaling
    f(r) -> f(a r), Sigma -> a^2 Sigma; no canonical scale is imposed and
    every downstream statistic must be (and is, by tests) a-invariant.

    Student and power-exponential generators depend on the space dimension,
    so the raw callables take (r, k).
    """

    family: str
    param: float | None = None
    _pdf: Callable[[np.ndarray, int], np.ndarray] = field(repr=False, default=None)
    _score: Callable[[np.ndarray, int], np.ndarray] | None = field(repr=False, default=None)

    def pdf(self, r, k: int):
        return self._pdf(np.asarray(r, dtype=float), k)

    @property
    def has_score(self) -> bool:
        return self._score is not None

    def score(self, r, k: int):
        if self._score is None:
            raise ValueError(
                f"radial density {self.family!r} has no differentiable score"
            )
        return self._score(np.asarray(r, dtype=float), k)

    @property
    def tag(self) -> str:
        if self.param is None:
            return self.family
        return f"{self.family}({self.param:g})"


def gaussian() -> RadialDensity:
    return RadialDensity(
        "gaussian",
        None,
        _pdf=lambda r, k: np.exp(-0.5 * r * r),
        _score=lambda r, k: np.asarray(r, dtype=float),
    )


def laplace() -> RadialDensity:
    """Double-exponential generator f(r) = exp(-r)."""
    return RadialDensity(
        "laplace",
        None,
        _pdf=lambda r, k: np.exp(-r),
        _score=lambda r, k: np.ones_like(np.asarray(r, dtype=float)),
    )


def student(nu_dof: float) -> RadialDensity:
    """k-variate t generator with nu_dof degrees of freedom."""
    if nu_dof <= 0:
        raise ValueError("student degrees of freedom must be positive")
    nu = float(nu_dof)
    return RadialDensity(
        "student",
        nu,
        _pdf=lambda r, k: (1.0 + r * r / nu) ** (-(k + nu) / 2.0),
        _score=lambda r, k: (k + nu) * r / (nu + r * r),
    )


def _pe_c0(k: int, nu: float) -> float:
    return k * math.exp(gammaln(k / (2 * nu)) - gammaln((k + 2) / (2 * nu)))


def power_exponential(nu_tail: float) -> RadialDensity:
    """Power-exponential generator exp(-(r^2/c0)^nu); nu = 1 is Gaussian."""
    if nu_tail <= 0:
        raise ValueError("power-exponential tail index must be positive")
    nu = float(nu_tail)

    def pdf(r, k):
        return np.exp(-((r * r / _pe_c0(k, nu)) ** nu))

    def score(r, k):
        return 2.0 * nu * r ** (2 * nu - 1) / _pe_c0(k, nu) ** nu

    return RadialDensity("power-exponential", nu, _pdf=pdf, _score=score)


def custom_density(
    grid: np.ndarray, values: np.ndarray, name: str = "custom"
) -> RadialDensity:
    """Tabulated radial density, log-linearly interpolated, zero beyond grid.

    Custom densities carry no score; operations needing phi_f reject them.
    """
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    if grid.ndim != 1 or grid.shape != values.shape or grid.size < 4:
        raise ValueError("custom density needs matching 1-d grid/values, >= 4 points")
    if np.any(values <= 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("custom density must be positive on an increasing grid")
    logf = interpolate.interp1d(
        grid, np.log(values), kind="linear", bounds_error=False, fill_value=-np.inf
    )

    def pdf(r, k):
        return np.exp(logf(r))

    return RadialDensity(name, None, _pdf=pdf, _score=None)


_BY_NAME = {
    "gaussian": lambda p: gaussian(),
    "normal": lambda p: gaussian(),
    "laplace": lambda p: laplace(),
    "laplace-exponential": lambda p: laplace(),
    "student": lambda p: student(p),
    "power-exponential": lambda p: power_exponential(p),
}


def density_by_name(name: str, param: float | None = None) -> RadialDensity:
    key = name.strip().lower()
    if key not in _BY_NAME:
        raise ValueError(f"unknown radial density family {name!r}")
    if key in ("student", "power-exponential") and param is None:
        raise ValueError(f"{name} density needs a parameter")
    return _BY_NAME[key](param)


class RadialLaw:
    """A radial density bound to a dimension k.

    Provides the distance density f_k, its cdf/quantile, raw generator
    moments mu_l = int r^l f(r) dr, the radial Fisher information
    E[phi_f(d)^2], the elliptical normalizer c_{k,f}, and omega_k.
    """

    def __init__(self, density: RadialDensity, k: int):
        if k < 1:
            raise ValueError("dimension k must be >= 1")
        self.density = density
        self.k = int(k)
        self._mu_cache: dict[int, float] = {}
        mu = self.mu(self.k - 1)
        if not np.isfinite(mu) or mu <= 0:
            raise ValueError(
                f"radial density {density.tag!r} is not normalizable in dimension {k}"
            )

    # -- raw generator moments ------------------------------------------------
    def mu(self, l: int) -> float:
        """mu_l = int_0^inf r^l f(r) dr (may be inf for heavy tails)."""
        if l in self._mu_cache:
            return self._mu_cache[l]
        fam, p, k = self.density.family, self.density.param, self.k
        if fam == "gaussian":
            out = 2.0 ** ((l - 1) / 2.0) * math.gamma((l + 1) / 2.0)
        elif fam == "laplace":
            out = math.gamma(l + 1.0)
        elif fam == "student":
            out = (
                0.5
                * p ** ((l + 1) / 2.0)
                * math.exp(
                    gammaln((l + 1) / 2.0)
                    + gammaln((k + p - l - 1) / 2.0)
                    - gammaln((k + p) / 2.0)
                )
                if l + 1 < k + p
                else math.inf
            )
        elif fam == "power-exponential":
            c0 = _pe_c0(k, p)
            out = c0 ** ((l + 1) / 2.0) / (2 * p) * math.gamma((l + 1) / (2 * p))
        else:
            val, _ = integrate.quad(
                lambda r: r**l * float(self.density.pdf(r, k)), 0, np.inf, **_QUAD_OPTS
            )
            out = val
        self._mu_cache[l] = out
        return out

    @property
    def c_kf(self) -> float:
        """Normalizer of the elliptical density, (omega_k mu_{k-1})^{-1}."""
        return 1.0 / (sphere_surface(self.k) * self.mu(self.k - 1))

    @property
    def omega_k(self) -> float:
        return sphere_surface(self.k)

    def distance_moment(self, m: int) -> float:
        """E[d^m] for d distributed as f_k; mu_{k-1+m}/mu_{k-1}."""
        return self.mu(self.k - 1 + m) / self.mu(self.k - 1)

    def fisher_information(self) -> float:
        """Radial Fisher information E[phi_f(d)^2] (for location: I_{k,f})."""
        fam, p, k = self.density.family, self.density.param, self.k
        if fam == "gaussian":
            return float(k)
        if fam == "laplace":
            return 1.0
        if fam == "student":
            return k * (k + p) / (k + p + 2.0)
        if fam == "power-exponential":
            c0 = _pe_c0(k, p)
            return (
                4.0
                * p
                * p
                / c0
                * math.exp(gammaln((k + 4 * p - 2) / (2 * p)) - gammaln(k / (2 * p)))
                if 4 * p + k - 2 > 0
                else math.inf
            )
        val, _ = integrate.quad(
            lambda r: float(self.density.score(r, k)) ** 2 * float(self.pdf(r)),
            0,
            np.inf,
            **_QUAD_OPTS,
        )
        return val

    # -- distance distribution ------------------------------------------------
    def pdf(self, r):
        """Density f_k of the standardized distance."""
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        pos = r > 0
        if np.any(pos):
            rp = r[pos]
            out[pos] = rp ** (self.k - 1) * self.density.pdf(rp, self.k) / self.mu(self.k - 1)
        return out if out.ndim else float(out)

    def cdf(self, r):
        r = np.asarray(r, dtype=float)
        fam, p, k = self.density.family, self.density.param, self.k
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        out = np.zeros_like(r)
        pos = r > 0
        rp = r[pos]
        if fam == "gaussian":
            out[pos] = gammainc(k / 2.0, rp * rp / 2.0)
        elif fam == "laplace":
            out[pos] = gammainc(float(k), rp)
        elif fam == "student":
            x = (rp * rp / p) / (1.0 + rp * rp / p)
            out[pos] = betainc(k / 2.0, p / 2.0, x)
        elif fam == "power-exponential":
            c0 = _pe_c0(k, p)
            out[pos] = gammainc(k / (2.0 * p), (rp * rp / c0) ** p)
        else:
            out[pos] = [
                integrate.quad(self.pdf, 0.0, float(x), **_QUAD_OPTS)[0] for x in rp
            ]
        out = np.clip(out, 0.0, 1.0)
        return float(out[0]) if scalar else out

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        if np.any((u <= 0) | (u >= 1)):
            raise ValueError("quantile probability must lie in (0, 1)")
        fam, p, k = self.density.family, self.density.param, self.k
        scalar = u.ndim == 0
        u = np.atleast_1d(u)
        if fam == "gaussian":
            out = np.sqrt(2.0 * gammaincinv(k / 2.0, u))
        elif fam == "laplace":
            out = gammaincinv(float(k), u)
        elif fam == "student":
            x = betaincinv(k / 2.0, p / 2.0, u)
            out = np.sqrt(p * x / (1.0 - x))
        elif fam == "power-exponential":
            c0 = _pe_c0(k, p)
            out = np.sqrt(c0 * gammaincinv(k / (2.0 * p), u) ** (1.0 / p))
        else:
            out = np.array([self._quantile_root(float(v)) for v in u])
        return float(out[0]) if scalar else out

    def _quantile_root(self, u: float) -> float:
        """Bracketed bisection on the cdf, Newton-seeded via the pdf."""
        lo, hi = 0.0, 1.0
        while self.cdf(hi) < u:
            hi *= 2.0
            if hi > 1e12:
                raise ArithmeticError("quantile bracketing failed")
        x = 0.5 * (lo + hi)
        for _ in range(200):
            c = self.cdf(x)
            if c > u:
                hi = x
            else:
                lo = x
            d = self.pdf(x)
            if d > 0:  # Newton step, kept inside the bracket
                xn = x - (c - u) / d
                x = xn if lo < xn < hi else 0.5 * (lo + hi)
            else:
                x = 0.5 * (lo + hi)
            if hi - lo < 1e-12 * max(1.0, hi):
                break
        return 0.5 * (lo + hi)

    def score(self, r):
        return self.density.score(r, self.k)


# -- spec'd operation wrappers ----------------------------------------------


def radial_pdf(law: RadialLaw, r):
    """Distance density f_k(r); zero at r <= 0."""
    return law.pdf(r)


def radial_cdf(law: RadialLaw, r):
    return law.cdf(r)


def radial_quantile(law: RadialLaw, u):
    return law.quantile(u)


def score_phi(density: RadialDensity, r, k: int):
    """phi_f(r) = -2 (f^{1/2})'(r) / f^{1/2}(r) for a differentiable generator."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("score is defined for r > 0")
    return density.score(r, k)


@dataclass(frozen=True)
class ScorePair:
    """Score functions (K1, K2) on (0,1) with their exact second moments.

    Scores are only ever evaluated at u = t/(n+1), t <= n, so the open-interval
    endpoints are never hit and no clipping is applied.
    """

    tag: str
    k1: Callable[[np.ndarray], np.ndarray]
    k2: Callable[[np.ndarray], np.ndarray]
    e_k1_sq: float
    e_k2_sq: float

    def __call__(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        u = np.asarray(u, dtype=float)
        return self.k1(u), self.k2(u)


def _score_second_moment(fn, exact: float | None) -> float:
    if exact is not None:
        return exact
    val, _ = integrate.quad(lambda u: float(fn(u)) ** 2, 0.0, 1.0, **_QUAD_OPTS)
    return val


def make_score_pair(
    kind: str, k: int, density: RadialDensity | None = None
) -> ScorePair:
    """Build a score pair: sign, spearman, vdw, laplace, or f-scores.

    f-scores are (phi_{f*} o F_k^{-1}, F_k^{-1}) for the supplied generator,
    which must have a differentiable score and finite E[K^2] moments.
    """
    kind = kind.strip().lower()
    if kind == "sign":
        one = lambda u: np.ones_like(np.asarray(u, dtype=float))
        return ScorePair("sign", one, one, 1.0, 1.0)
    if kind == "spearman":
        ident = lambda u: np.asarray(u, dtype=float)
        return ScorePair("spearman", ident, ident, 1.0 / 3.0, 1.0 / 3.0)
    if kind in ("vdw", "van-der-waerden"):
        vdw = lambda u: np.sqrt(2.0 * gammaincinv(k / 2.0, np.asarray(u, dtype=float)))
        return ScorePair(f"vdw(k={k})", vdw, vdw, float(k), float(k))
    if kind == "laplace":
        one = lambda u: np.ones_like(np.asarray(u, dtype=float))
        q = lambda u: gammaincinv(float(k), np.asarray(u, dtype=float))
        return ScorePair(f"laplace(k={k})", one, q, 1.0, float(k * (k + 1)))
    if kind in ("f-score", "fscore"):
        if density is None:
            raise ValueError("f-scores need a radial density")
        if not density.has_score:
            raise ValueError("f-scores need a differentiable radial density")
        law = RadialLaw(density, k)
        e2 = law.distance_moment(2)
        e1 = law.fisher_information()
        if not (np.isfinite(e1) and np.isfinite(e2)):
            raise ValueError(
                f"density {density.tag!r} violates the score moment conditions"
            )
        k1 = lambda u: law.score(law.quantile(u))
        k2 = lambda u: law.quantile(u)
        return ScorePair(f"fscore:{density.tag}(k={k})", k1, k2, e1, e2)
    raise ValueError(f"unknown score kind {kind!r}")


def sample_directions(k: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. points uniform on the unit sphere S^(k-1), as an (n, k) array."""
    g = rng.standard_normal((n, k))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sample_elliptical(
    law: RadialLaw, sigma: np.ndarray, n: int, rng: np.random.Generator
) -> np.ndarray:
    """n draws of elliptical white noise with scatter sigma, as an (n, k) array.

    Each draw is quantile-transform radial times sigma^(1/2) times a uniform
    unit direction, with sigma^(1/2) the inverse of the upper-triangular
    standardizing factor.
    """
    sigma = np.asarray(sigma, dtype=float)
    if not is_spd(sigma):
        raise ValueError("scatter matrix must be symmetric positive definite")
    if sigma.shape[0] != law.k:
        raise ValueError("scatter dimension does not match the law")
    if n == 0:
        return np.empty((0, law.k))
    root, _ = tri_sqrt(sigma)
    d = law.quantile(rng.random(n))
    u = sample_directions(law.k, n, rng)
    return (d[:, None] * u) @ root.T


def gaussian_cdf(x):
    """Standard normal cdf (shared by the adaptive kernel machinery)."""
    return ndtr(x)


def chi2_cdf_df(x, df: float):
    return gammainc(df / 2.0, np.asarray(x, dtype=float) / 2.0)


def chi2_sf_df(x, df: float):
    return gammaincc(df / 2.0, np.asarray(x, dtype=float) / 2.0)
