"""Shared linear-algebra helpers: column-major vec, triangular scatter roots."""
from __future__ import annotations

import numpy as np
from scipy.linalg import cholesky, solve_triangular

__all__ = ["vec", "unvec", "tri_sqrt", "is_spd"]


def vec(a: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization, so that vec(B X C) = (C' o B) vec(X)."""
    return np.asarray(a).reshape(-1, order="F")


def unvec(v: np.ndarray, k: int) -> np.ndarray:
    """Inverse of :func:`vec` for a k x k matrix."""
    return np.asarray(v).reshape((k, k), order="F")


def is_spd(sigma: np.ndarray, tol: float = 1e-10) -> bool:
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        return False
    if not np.allclose(sigma, sigma.T, rtol=1e-8, atol=1e-12):
        return False
    try:
        w = np.linalg.eigvalsh(0.5 * (sigma + sigma.T))
    except np.linalg.LinAlgError:
        return False
    return bool(w.min() > tol * max(w.max(), 1.0))


def tri_sqrt(sigma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Upper-triangular square roots of an SPD matrix.

    Returns ``(root, inv_root)`` where both factors are upper triangular with
    positive diagonal, ``root @ root.T == sigma`` and
    ``inv_root.T @ inv_root == inv(sigma)``; ``inv_root`` is the unique
    standardizing factor used throughout (``inv_root = root^{-1}``).
    """
    sigma = np.asarray(sigma, dtype=float)
    if not is_spd(sigma):
        raise ValueError("matrix is not symmetric positive definite")
    k = sigma.shape[0]
    if k == 1:
        r = float(np.sqrt(sigma[0, 0]))
        return np.array([[r]]), np.array([[1.0 / r]])
    # reverse Cholesky: flip, factor, flip back -> upper-triangular V, sigma = V V'
    flip = np.arange(k)[::-1]
    low = cholesky(sigma[np.ix_(flip, flip)], lower=True)
    root = np.ascontiguousarray(low[np.ix_(flip, flip)])  # upper tri, positive diag
    inv_root = solve_triangular(root, np.eye(k))
    return root, inv_root
