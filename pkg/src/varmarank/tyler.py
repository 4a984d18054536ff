"""Tyler's scatter estimator, Tyler residuals, and pseudo-Mahalanobis ranks.

The shape factor C is the unique (for n > k(k-1)) upper-triangular matrix
with positive diagonal and unit (1,1) entry that sphericizes the normed
residuals: (1/n) sum (C Z_t / |C Z_t|)(C Z_t / |C Z_t|)' = I/k.  Because the
defining equation only involves directions, inputs are normalized to unit
vectors first; this makes the fit exactly invariant under per-point positive
rescalings (bitwise so for power-of-two factors) and immune to heavy-tail
overflow.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .util import tri_sqrt

__all__ = ["TylerFit", "RankedResiduals", "tyler_fit", "tyler_residuals"]


class TylerConvergenceError(RuntimeError):
    def __init__(self, residual: float, iterations: int):
        super().__init__(
            f"fixed point not reached: residual {residual:.3e} after "
            f"{iterations} iterations"
        )
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class TylerFit:
    """Converged shape factor and derived scatter estimate."""

    shape_factor: np.ndarray  # C: upper triangular, diag > 0, C[0,0] = 1
    iterations: int
    residual: float

    @property
    def scatter(self) -> np.ndarray:
        """Sigma-hat = (C'C)^{-1}, consistent for the scatter up to scale."""
        c = self.shape_factor
        return np.linalg.inv(c.T @ c)

    @property
    def k(self) -> int:
        return self.shape_factor.shape[0]


def _fixed_point_residual(c: np.ndarray, s: np.ndarray) -> tuple[float, np.ndarray]:
    """Frobenius residual of the defining equation at shape factor c,
    for unit-normalized inputs s (n, k); also returns the W matrix."""
    k = c.shape[0]
    w = s @ c.T
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    m = (w.T @ w) / s.shape[0]
    return float(np.linalg.norm(m - np.eye(k) / k)), w


def tyler_fit(
    data: np.ndarray, tol: float = 1e-12, max_iter: int = 500
) -> TylerFit:
    """Iterate the scatter fixed point to the shape factor C.

    Requires n > k(k-1) observations and no zero vectors.  Identity
    initialization; the iteration is globally convergent under the
    uniqueness condition.
    """
    z = np.asarray(data, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    n, k = z.shape
    if n <= k * (k - 1):
        raise ValueError(f"need n > k(k-1) = {k * (k - 1)} points, got {n}")
    norms = np.linalg.norm(z, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("zero residual vector: directions undefined")
    s = z / norms[:, None]
    if k == 1:
        return TylerFit(np.array([[1.0]]), 0, 0.0)

    v = np.eye(k)  # current shape estimate (up to scale)
    res = np.inf
    for it in range(1, max_iter + 1):
        vinv = np.linalg.inv(v)
        d2 = np.einsum("ti,ij,tj->t", s, vinv, s)
        v = (k / n) * np.einsum("t,ti,tj->ij", 1.0 / d2, s, s)
        v = 0.5 * (v + v.T)
        v /= np.trace(v) / k
        _, inv_root = tri_sqrt(v)
        c = inv_root / inv_root[0, 0]
        res, _ = _fixed_point_residual(c, s)
        if res <= tol:
            return TylerFit(c, it, res)
    raise TylerConvergenceError(res, max_iter)


@dataclass(frozen=True)
class RankedResiduals:
    """Tyler residuals (multivariate signs), distances, and their ranks."""

    W: np.ndarray  # (n, k) unit vectors
    d: np.ndarray  # (n,) pseudo-Mahalanobis distances
    ranks: np.ndarray  # (n,) a permutation of 1..n, ties broken by time index

    @property
    def n(self) -> int:
        return self.W.shape[0]

    @property
    def k(self) -> int:
        return self.W.shape[1]


def _ranks_with_index_ties(d: np.ndarray) -> np.ndarray:
    order = np.argsort(d, kind="stable")
    ranks = np.empty(d.shape[0], dtype=np.int64)
    ranks[order] = np.arange(1, d.shape[0] + 1)
    return ranks


def tyler_residuals(fit: TylerFit, data: np.ndarray) -> RankedResiduals:
    """W_t = C Z_t / |C Z_t|, d_t = |C Z_t| (= |Z_t| in the scatter metric,
    up to the estimator's arbitrary global scale), and the ranks of d_t."""
    z = np.asarray(data, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    if z.shape[1] != fit.k:
        raise ValueError("data dimension does not match the fit")
    y = z @ fit.shape_factor.T
    d = np.linalg.norm(y, axis=1)
    if np.any(d == 0.0):
        raise ValueError("zero residual vector: directions undefined")
    w = y / d[:, None]
    return RankedResiduals(w, d, _ranks_with_index_ties(d))


def standardized_residuals(sigma: np.ndarray, data: np.ndarray) -> RankedResiduals:
    """Known-scatter oracle: exact distances/directions/ranks under sigma."""
    _, inv_root = tri_sqrt(np.asarray(sigma, dtype=float))
    z = np.asarray(data, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    y = z @ inv_root.T
    d = np.linalg.norm(y, axis=1)
    if np.any(d == 0.0):
        raise ValueError("zero residual vector: directions undefined")
    w = y / d[:, None]
    return RankedResiduals(w, d, _ranks_with_index_ties(d))
