"""VARMA parameterization, stability diagnostics, Green's matrices, residuals.

Model convention: (I - sum_i A_i L^i) X_t = (I + sum_j B_j L^j) eps_t.
Green's matrices are the impulse responses of the inverted AR and MA
operators; under causality/invertibility they decay exponentially, which
drives every truncation bound downstream.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "VarmaSpec",
    "GreenSeq",
    "AssumptionReport",
    "check_assumption_A",
    "green_matrices",
    "residuals",
    "residuals_green_oracle",
    "simulate",
]


@dataclass(frozen=True)
class VarmaSpec:
    """Parameter theta of a VARMA(p, q) model in dimension k."""

    k: int
    p: int
    q: int
    A: tuple[np.ndarray, ...] = field(default=())
    B: tuple[np.ndarray, ...] = field(default=())

    def __post_init__(self):
        if self.k < 1 or self.p < 0 or self.q < 0:
            raise ValueError("need k >= 1 and orders >= 0")
        A = tuple(np.ascontiguousarray(a, dtype=float) for a in self.A)
        B = tuple(np.ascontiguousarray(b, dtype=float) for b in self.B)
        if len(A) != self.p or len(B) != self.q:
            raise ValueError("coefficient count must match the orders")
        for m in (*A, *B):
            if m.shape != (self.k, self.k):
                raise ValueError(f"coefficient matrices must be {self.k}x{self.k}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def theta(self) -> np.ndarray:
        """(vec A_1, ..., vec A_p, vec B_1, ..., vec B_q), column-major vecs."""
        parts = [m.reshape(-1, order="F") for m in (*self.A, *self.B)]
        return np.concatenate(parts) if parts else np.empty(0)

    def perturbed(self, tau: np.ndarray, p1: int, q1: int, n: int) -> "VarmaSpec":
        """The local alternative theta + n^{-1/2} tau at orders (p1, q1).

        tau packs (vec gamma_1..gamma_p1, vec delta_1..delta_q1); missing
        high-order null coefficients are zero.
        """
        k = self.k
        tau = np.asarray(tau, dtype=float)
        if tau.shape != (k * k * (p1 + q1),):
            raise ValueError("shift dimension must be k^2 (p1 + q1)")
        step = tau.reshape(-1, k * k) / np.sqrt(n)
        A = [np.zeros((k, k)) for _ in range(p1)]
        B = [np.zeros((k, k)) for _ in range(q1)]
        for i, a in enumerate(self.A):
            A[i] = a.copy()
        for j, b in enumerate(self.B):
            B[j] = b.copy()
        for i in range(p1):
            A[i] = A[i] + step[i].reshape(k, k, order="F")
        for j in range(q1):
            B[j] = B[j] + step[p1 + j].reshape(k, k, order="F")
        return VarmaSpec(k, p1, q1, tuple(A), tuple(B))

    def is_scalar(self) -> bool:
        """True when every coefficient is a multiple of the identity."""
        eye = np.eye(self.k)
        return all(
            np.allclose(m, m[0, 0] * eye, atol=1e-14) for m in (*self.A, *self.B)
        )


@dataclass(frozen=True)
class GreenSeq:
    """Green's matrices H_0..H_m (H_0 = I) of an invertible operator."""

    mats: np.ndarray  # (m+1, k, k)

    def __getitem__(self, u: int) -> np.ndarray:
        if u < 0:
            return np.zeros_like(self.mats[0])
        if u >= self.mats.shape[0]:
            return np.zeros_like(self.mats[0])
        return self.mats[u]

    @property
    def horizon(self) -> int:
        return self.mats.shape[0] - 1

    def decay_index(self, tol: float = 1e-12) -> int | None:
        """First u with max|H_u| below tol, or None if never within horizon."""
        mx = np.abs(self.mats).max(axis=(1, 2))
        idx = np.nonzero(mx < tol)[0]
        return int(idx[0]) if idx.size else None


@dataclass(frozen=True)
class AssumptionReport:
    """Diagnostics for the causality/invertibility assumption."""

    min_root_modulus_ar: float
    min_root_modulus_ma: float
    leading_ar_singular: bool
    leading_ma_singular: bool
    coprimeness_checked: bool
    passed: bool

    def as_dict(self) -> dict:
        return {
            "min_root_modulus_ar": self.min_root_modulus_ar,
            "min_root_modulus_ma": self.min_root_modulus_ma,
            "leading_ar_singular": self.leading_ar_singular,
            "leading_ma_singular": self.leading_ma_singular,
            "coprimeness_checked": self.coprimeness_checked,
            "passed": self.passed,
        }


def _min_root_modulus(coeffs: list[np.ndarray], k: int) -> float:
    """Smallest |z| among roots of det(I + sum C_i z^i), via the companion
    matrix of x_t = -sum C_i x_{t-i}; empty operator has no roots (inf)."""
    s = len(coeffs)
    if s == 0:
        return np.inf
    comp = np.zeros((k * s, k * s))
    for i, c in enumerate(coeffs):
        comp[:k, i * k : (i + 1) * k] = -c
    if s > 1:
        comp[k:, :-k] = np.eye(k * (s - 1))
    ev = np.abs(np.linalg.eigvals(comp))
    ev = ev[ev > 1e-14]
    return float(1.0 / ev.max()) if ev.size else np.inf


_ROOT_THRESHOLD = 1.0 + 1e-8  # avoid borderline false passes


def check_assumption_A(spec: VarmaSpec) -> AssumptionReport:
    """Root-modulus stability report; left-coprimeness is not verified
    (a violation surfaces as a singular structural solve instead)."""
    ar = _min_root_modulus([-a for a in spec.A], spec.k)
    ma = _min_root_modulus(list(spec.B), spec.k)
    ar_sing = spec.p > 0 and abs(np.linalg.det(spec.A[-1])) < 1e-12
    ma_sing = spec.q > 0 and abs(np.linalg.det(spec.B[-1])) < 1e-12
    passed = (
        ar > _ROOT_THRESHOLD and ma > _ROOT_THRESHOLD and not ar_sing and not ma_sing
    )
    return AssumptionReport(ar, ma, ar_sing, ma_sing, False, passed)


def green_matrices(
    coeffs: list[np.ndarray], horizon: int, k: int | None = None
) -> GreenSeq:
    """Green's matrices of C(L) = I + sum C_i L^i up to the horizon.

    H_0 = I and sum_{i<=min(s,u)} C_i H_{u-i} = 0 for u >= 1.  For the AR
    operator I - sum A_i L^i pass the sign-adjusted coefficients -A_i.
    An empty coefficient list (order zero) needs an explicit k.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    coeffs = [np.asarray(c, dtype=float) for c in coeffs]
    if coeffs:
        k = coeffs[0].shape[0]
    elif k is None:
        raise ValueError("order-zero operator needs an explicit dimension")
    H = np.zeros((horizon + 1, k, k))
    H[0] = np.eye(k)
    s = len(coeffs)
    for u in range(1, horizon + 1):
        acc = np.zeros((k, k))
        for i in range(1, min(s, u) + 1):
            acc += coeffs[i - 1] @ H[u - i]
        H[u] = -acc
    return GreenSeq(H)


def green_for_spec(spec: VarmaSpec, horizon: int) -> tuple[GreenSeq, GreenSeq]:
    """(G, H): Green's matrices of the AR and MA operators of the spec."""
    G = green_matrices([-a for a in spec.A], horizon, k=spec.k)
    H = green_matrices(list(spec.B), horizon, k=spec.k)
    return G, H


def residuals(spec: VarmaSpec, series: np.ndarray, check: bool = True) -> np.ndarray:
    """Model residuals with zero initial values.

    Z_t = X_t - sum A_i X_{t-i} - sum B_j Z_{t-j} with X_s = Z_s = 0, s <= 0.
    """
    X = np.asarray(series, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, k = X.shape
    if k != spec.k:
        raise ValueError(f"series has {k} columns, spec expects {spec.k}")
    if check and not check_assumption_A(spec).passed:
        raise ValueError(
            "null spec fails the stability diagnostics; pass check=False to override"
        )
    Z = np.zeros_like(X)
    for t in range(n):
        acc = X[t].copy()
        for i in range(1, min(spec.p, t) + 1):
            acc -= spec.A[i - 1] @ X[t - i]
        for j in range(1, min(spec.q, t) + 1):
            acc -= spec.B[j - 1] @ Z[t - j]
        Z[t] = acc
    return Z


def residuals_green_oracle(spec: VarmaSpec, series: np.ndarray) -> np.ndarray:
    """Test oracle: the explicit double-sum residual formula, zero initials.

    Z_t = sum_{i=0}^{t-1} H_i (X_{t-i} - sum_{j=1}^{p} A_j X_{t-i-j}).
    """
    X = np.asarray(series, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, k = X.shape
    if k != spec.k:
        raise ValueError(f"series has {k} columns, spec expects {spec.k}")
    _, H = green_for_spec(spec, max(n, 1))
    # AR-filtered series: A(L) X with zero pre-sample values
    Y = np.zeros_like(X)
    for t in range(n):
        acc = X[t].copy()
        for j in range(1, min(spec.p, t) + 1):
            acc -= spec.A[j - 1] @ X[t - j]
        Y[t] = acc
    Z = np.zeros_like(X)
    for t in range(n):
        acc = np.zeros(k)
        for i in range(t + 1):
            acc += H[i] @ Y[t - i]
        Z[t] = acc
    return Z


def simulate(
    spec: VarmaSpec, innovations: np.ndarray, burn_in: int = 0
) -> np.ndarray:
    """Run the difference equation forward from zero pre-sample values.

    X_t = sum A_i X_{t-i} + eps_t + sum B_j eps_{t-j}.  With burn_in > 0 the
    first burn_in outputs are discarded (the caller supplies burn_in extra
    innovations), giving an approximately stationary start.
    """
    eps = np.asarray(innovations, dtype=float)
    if eps.ndim == 1:
        eps = eps[:, None]
    n, k = eps.shape
    if k != spec.k:
        raise ValueError(f"innovations have {k} columns, spec expects {spec.k}")
    if burn_in < 0 or burn_in >= n:
        raise ValueError("burn-in must lie in [0, len(innovations))")
    X = np.zeros_like(eps)
    for t in range(n):
        acc = eps[t].copy()
        for j in range(1, min(spec.q, t) + 1):
            acc += spec.B[j - 1] @ eps[t - j]
        for i in range(1, min(spec.p, t) + 1):
            acc += spec.A[i - 1] @ X[t - i]
        X[t] = acc
    return X[burn_in:]
