"""Structural matrices of the test: the annihilating operator D(L), a
fundamental system of its homogeneous solutions, and the M, P, Q, J, N
matrices that realize the full-rank factorization of the singular
information matrix.

Conventions: for a null spec at orders (p0, q0) tested inside (p1, q1),
pi = max(p1-p0, q1-q0) and pi0 = pi + p0 + q0; the statistic has k^2 pi0
degrees of freedom.  Q is always kept tall-and-skinny, k^2(n-1) x k^2 pi0,
and J is accumulated block-row by block-row.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .util import is_spd
from .varma import VarmaSpec, green_for_spec

__all__ = [
    "StructuralError",
    "orders",
    "operator_D",
    "fundamental_system",
    "build_M",
    "build_Q",
    "build_J",
    "build_N",
    "StructuralSet",
    "structural_set",
]

_COND_LIMIT = 1e10


class StructuralError(RuntimeError):
    pass


def orders(p0: int, q0: int, p1: int, q1: int) -> tuple[int, int]:
    """(pi, pi0) for the null orders inside the alternative orders."""
    if p1 < p0 or q1 < q0:
        raise ValueError("alternative orders must dominate the null orders")
    pi = max(p1 - p0, q1 - q0)
    return pi, pi + p0 + q0


def operator_D(spec: VarmaSpec) -> np.ndarray:
    """Coefficients D_1..D_{p0+q0} of the annihilating operator
    D(L) = I + sum D_i L^i, as a (p0+q0, k, k) array.

    Solves the stacked block system built from Green's matrices; the solution
    satisfies D(L) G_t' = 0 for t > q0 and D(L) H_t' = 0 for t > p0, which is
    re-verified post hoc.
    """
    k, p0, q0 = spec.k, spec.p, spec.q
    s = p0 + q0
    if s == 0:
        return np.zeros((0, k, k))
    G, H = green_for_spec(spec, 2 * s + 1)

    def g(u):
        return G[u] if u >= 0 else np.zeros((k, k))

    def h(u):
        return H[u] if u >= 0 else np.zeros((k, k))

    lhs = np.zeros((k * s, k * s))
    rhs = np.zeros((k * s, k))
    for i in range(1, p0 + 1):
        for j in range(1, s + 1):
            lhs[(i - 1) * k : i * k, (j - 1) * k : j * k] = g(q0 + i - j)
        rhs[(i - 1) * k : i * k] = g(q0 + i)
    for i in range(1, q0 + 1):
        r = p0 + i - 1
        for j in range(1, s + 1):
            lhs[r * k : (r + 1) * k, (j - 1) * k : j * k] = h(p0 + i - j)
        rhs[r * k : (r + 1) * k] = h(p0 + i)

    cond = np.linalg.cond(lhs)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise StructuralError(
            f"annihilator system is ill-conditioned (cond ~ {cond:.2e}); "
            "the null operators are probably not left-coprime"
        )
    sol = np.linalg.solve(lhs, -rhs)  # stacked D_1', ..., D_s'
    D = np.empty((s, k, k))
    for i in range(s):
        D[i] = sol[i * k : (i + 1) * k].T

    # post hoc annihilation check
    for t in range(q0 + 1, s + 1):
        resid = g(t) + sum(g(t - i) @ sol[(i - 1) * k : i * k] for i in range(1, s + 1))
        if np.abs(resid).max() > 1e-9:
            raise StructuralError("annihilation of the AR Green sequence failed")
    for t in range(p0 + 1, s + 1):
        resid = h(t) + sum(h(t - i) @ sol[(i - 1) * k : i * k] for i in range(1, s + 1))
        if np.abs(resid).max() > 1e-9:
            raise StructuralError("annihilation of the MA Green sequence failed")
    return D


def fundamental_system(
    D: np.ndarray, pi: int, horizon: int, k: int, mixing: np.ndarray | None = None
) -> np.ndarray:
    """Solution blocks Psi_t^{(j)} of x_t + sum D_i x_{t-i} = 0.

    Canonical initial conditions Psi_{pi+i}^{(j)} = delta_{ij} I make the
    Casorati matrix the identity.  Returns a (horizon - pi, s, k, k) array
    indexed [t - pi - 1, j].  A nonsingular ``mixing`` of shape (ks, ks)
    produces the alternative system Psi-bar (mixing o I) used to verify that
    the statistic does not depend on the choice.
    """
    s = D.shape[0]
    if horizon <= pi:
        raise ValueError("horizon must exceed pi")
    out = np.zeros((horizon - pi, s, k, k))
    # seed rows t = pi+1 .. pi+s
    for i in range(min(s, horizon - pi)):
        out[i, i] = np.eye(k)
    for t in range(s, horizon - pi):
        for j in range(s):
            acc = np.zeros((k, k))
            for i in range(1, s + 1):
                acc += D[i - 1] @ out[t - i, j]
            out[t, j] = -acc
    if mixing is not None:
        mixing = np.asarray(mixing, dtype=float)
        if mixing.shape != (k * s, k * s):
            raise ValueError(f"mixing must be {(k * s, k * s)}")
        flat = out.transpose(0, 2, 1, 3).reshape(horizon - pi, k, k * s)
        mixed = flat @ mixing
        out = mixed.reshape(horizon - pi, k, s, k).transpose(0, 2, 1, 3).copy()
    return out


def psi_bar(psi: np.ndarray) -> np.ndarray:
    """Stack the fundamental system into the (rows x cols) block matrix with
    k^2 x k^2 blocks Psi_t^{(j)} o I_k."""
    m, s, k, _ = psi.shape
    out = np.zeros((m * k * k, s * k * k))
    eye = np.eye(k)
    for t in range(m):
        for j in range(s):
            out[t * k * k : (t + 1) * k * k, j * k * k : (j + 1) * k * k] = np.kron(
                psi[t, j], eye
            )
    return out


def build_M(spec: VarmaSpec, p1: int, q1: int) -> np.ndarray:
    """The k^2 pi0 x k^2 (p1+q1) selection matrix (G'-block | H'-block),
    lower block-Toeplitz in the transposed Green's matrices."""
    k = spec.k
    pi, pi0 = orders(spec.p, spec.q, p1, q1)
    if pi0 == 0:
        raise ValueError("pi0 must be >= 1")
    G, H = green_for_spec(spec, pi0 + 1)
    eye = np.eye(k)
    M = np.zeros((k * k * pi0, k * k * (p1 + q1)))
    for i in range(1, pi0 + 1):
        for j in range(1, p1 + 1):
            if i >= j:
                M[
                    (i - 1) * k * k : i * k * k, (j - 1) * k * k : j * k * k
                ] = np.kron(G[i - j].T, eye)
        for j in range(1, q1 + 1):
            if i >= j:
                c = p1 + j - 1
                M[(i - 1) * k * k : i * k * k, c * k * k : (c + 1) * k * k] = np.kron(
                    H[i - j].T, eye
                )
    return M


def _ma_kron_seq(spec: VarmaSpec, length: int) -> np.ndarray:
    """F_m = sum_b B_b o H_{m-b}: the block-Toeplitz symbol of the product of
    the right-MA-inverse and left-MA factors, for m = 0..length-1."""
    k = spec.k
    _, H = green_for_spec(spec, length)
    B = [np.eye(k)] + [np.asarray(b) for b in spec.B]
    F = np.zeros((length, k * k, k * k))
    for m in range(length):
        acc = np.zeros((k * k, k * k))
        for b in range(0, min(spec.q, m) + 1):
            acc += np.kron(B[b], H[m - b])
        F[m] = acc
    return F


def _matrix_conv(F: np.ndarray, P: np.ndarray) -> np.ndarray:
    """out[u] = sum_t F[u-t] @ P[t] for u = 0..len(F)-1, via FFT."""
    rows = F.shape[0]
    m = 1
    while m < 2 * rows:
        m *= 2
    ff = np.fft.rfft(F, m, axis=0)
    fp = np.fft.rfft(P, m, axis=0)
    prod = np.einsum("wab,wbc->wac", ff, fp, optimize=True)
    return np.fft.irfft(prod, m, axis=0)[:rows]


def build_Q(
    spec: VarmaSpec,
    pi: int,
    n: int,
    psi: np.ndarray | None = None,
) -> np.ndarray:
    """The k^2(n-1) x k^2 pi0 column matrix of the statistic.

    Column blocks are the convolution of the MA block-Toeplitz symbol against
    either a unit block (first k^2 pi columns) or a fundamental-system column;
    the k^2(n-1)-square factors are never materialized.
    """
    k = spec.k
    s = spec.p + spec.q
    pi0 = pi + s
    if n < pi0 + 2:
        raise ValueError("need n >= pi0 + 2")
    rows = n - 1
    if psi is None and s > 0:
        psi = fundamental_system(operator_D(spec), pi, rows, k)
    F = _ma_kron_seq(spec, rows)
    k2 = k * k
    Q = np.zeros((rows * k2, pi0 * k2))
    # identity part: column block c (1-based, c <= pi) holds F_{u-c} at row u
    for c in range(1, pi + 1):
        blocks = F[: rows - c + 1].reshape((rows - c + 1) * k2, k2)
        Q[(c - 1) * k2 :, (c - 1) * k2 : c * k2] = blocks
    # fundamental-system part: convolve F against each Psi-bar column
    if s > 0:
        psi_len = psi.shape[0]  # solution rows t = pi+1 .. pi+psi_len
        eye = np.eye(k)
        for j in range(s):
            P = np.zeros((rows, k2, k2))
            for t in range(min(psi_len, rows - pi)):
                P[pi + t] = np.kron(psi[t, j], eye)
            col = _matrix_conv(F, P)
            Q[:, (pi + j) * k2 : (pi + j + 1) * k2] = col.reshape(rows * k2, k2)
    return Q


def build_J(Q: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """J = Q' [I o (Sigma o Sigma^{-1})] Q, accumulated over block rows.

    The Kronecker factor is scale-free in Sigma; the scatter is normalized by
    its (1,1) entry first so that scalings commute exactly with the result
    (bitwise for power-of-two factors).
    """
    sigma = np.asarray(sigma, dtype=float)
    if not is_spd(sigma):
        raise ValueError("scatter matrix must be symmetric positive definite")
    k = sigma.shape[0]
    s = sigma / sigma[0, 0]
    kron = np.kron(s, np.linalg.inv(s))
    k2 = k * k
    rows = Q.shape[0] // k2
    Qb = Q.reshape(rows, k2, Q.shape[1])
    tmp = np.einsum("ab,ubc->uac", kron, Qb, optimize=True)
    J = np.tensordot(Qb, tmp, axes=([0, 1], [0, 1]))
    return 0.5 * (J + J.T)


def build_N(M: np.ndarray, P: np.ndarray | None, J: np.ndarray) -> np.ndarray:
    """Noncentrality core N = M' P' J P M (P defaults to the identity that
    the canonical fundamental system produces)."""
    PM = M if P is None else P @ M
    return PM.T @ J @ PM


@dataclass(frozen=True)
class StructuralSet:
    """Everything the statistic needs for one (theta0, p1, q1, n) instance."""

    spec: VarmaSpec
    p1: int
    q1: int
    pi: int
    pi0: int
    D: np.ndarray
    Q: np.ndarray
    M: np.ndarray

    @property
    def df(self) -> int:
        return self.spec.k**2 * self.pi0

    def J(self, sigma: np.ndarray) -> np.ndarray:
        return build_J(self.Q, sigma)

    def N(self, sigma: np.ndarray) -> np.ndarray:
        return build_N(self.M, None, self.J(sigma))


def structural_set(
    spec: VarmaSpec,
    p1: int,
    q1: int,
    n: int,
    fundamental_mixing: np.ndarray | None = None,
) -> StructuralSet:
    """Assemble D, Q, M for a null spec inside alternative orders.

    ``fundamental_mixing`` switches to a non-canonical fundamental system
    (test hook for the choice-independence property); it does not alter M.
    """
    pi, pi0 = orders(spec.p, spec.q, p1, q1)
    if pi0 < 1:
        raise ValueError("the testing problem is empty (pi0 = 0)")
    D = operator_D(spec)
    psi = None
    if spec.p + spec.q > 0:
        psi = fundamental_system(D, pi, n - 1, spec.k, mixing=fundamental_mixing)
    Q = build_Q(spec, pi, n, psi=psi)
    M = build_M(spec, p1, q1)
    return StructuralSet(spec, p1, q1, pi, pi0, D, Q, M)
