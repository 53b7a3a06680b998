"""Lowest eigenpair of a real symmetric operator.

Small problems go to a dense ``eigh``.  Larger ones use a thick-restart
Lanczos iteration with full (twice-iterated classical Gram-Schmidt)
reorthogonalisation.  Because every new vector is projected against the
whole basis, the projection coefficients give the projected matrix
column directly, so after a restart the arrowhead block needs no special
handling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import EigensolverError

DENSE_MAX_DIM = 256


@dataclass
class Eigenpair:
    energy: float
    vector: np.ndarray
    residual: float
    gap: float
    iterations: int = 0

    def __iter__(self):
        # unpacks like the (E0, vec) pair
        yield self.energy
        yield self.vector


def fix_sign(vec: np.ndarray) -> np.ndarray:
    """Flip ``vec`` so its first non-negligible component is positive."""
    scale = np.max(np.abs(vec)) if vec.size else 0.0
    nz = np.flatnonzero(np.abs(vec) > 1e-12 * scale)
    if nz.size and vec[nz[0]] < 0:
        return -vec
    return vec


def dense_lowest(matrix: np.ndarray) -> Eigenpair:
    w, v = np.linalg.eigh(matrix)
    vec = fix_sign(v[:, 0])
    residual = float(np.linalg.norm(matrix @ vec - w[0] * vec))
    gap = float(w[1] - w[0]) if len(w) > 1 else np.inf
    return Eigenpair(float(w[0]), vec, residual, gap)


def lanczos_lowest(
    matvec: Callable[[np.ndarray], np.ndarray],
    dim: int,
    v0: np.ndarray | None = None,
    *,
    tol: float = 1e-10,
    krylov_dim: int = 64,
    n_keep: int = 8,
    max_restarts: int = 2000,
    seed: int = 0,
) -> Eigenpair:
    """Lowest eigenpair; converged when ||A v - E v|| <= tol * max(1, |E|)."""
    m = min(krylov_dim, dim)
    if m < 2:
        v = np.ones(dim)
        e = float(v @ matvec(v))
        return Eigenpair(e, v, 0.0, np.inf)
    n_keep = max(1, min(n_keep, m - 2))
    V = np.zeros((m + 1, dim))
    T = np.zeros((m, m))
    if v0 is None:
        v0 = np.random.default_rng(seed).standard_normal(dim)
    v0 = np.asarray(v0, dtype=float)
    V[0] = v0 / np.linalg.norm(v0)
    start = 0
    best = np.inf
    total = 0
    for restart in range(max_restarts):
        size = m
        beta = 0.0
        for j in range(start, m):
            w = matvec(V[j])
            total += 1
            basis = V[: j + 1]
            h = basis @ w
            w -= h @ basis
            h2 = basis @ w
            w -= h2 @ basis
            h += h2
            T[: j + 1, j] = h
            T[j, : j + 1] = h
            beta = float(np.linalg.norm(w))
            if beta <= 1e-13 * max(1.0, abs(h[j])):
                # invariant subspace: Ritz values are exact
                size = j + 1
                beta = 0.0
                break
            V[j + 1] = w / beta
        theta, S = np.linalg.eigh(T[:size, :size])
        e0 = float(theta[0])
        estimate = abs(beta * S[size - 1, 0])
        threshold = tol * max(1.0, abs(e0))
        if estimate <= threshold or beta == 0.0:
            vec = S[:, 0] @ V[:size]
            vec /= np.linalg.norm(vec)
            residual = float(np.linalg.norm(matvec(vec) - e0 * vec))
            best = min(best, residual)
            gap = float(theta[1] - theta[0]) if size > 1 else np.inf
            if residual <= threshold:
                return Eigenpair(e0, fix_sign(vec), residual, gap, total)
            if beta == 0.0:
                # lost accuracy inside an exhausted subspace; restart from the Ritz vector
                V[0] = vec
                T[:] = 0.0
                start = 0
                continue
        best = min(best, estimate)
        p = min(n_keep, size - 1)
        kept = S[:, :p].T @ V[:size]
        V[:p] = kept
        V[p] = V[size]
        T[:] = 0.0
        T[np.arange(p), np.arange(p)] = theta[:p]
        T[p, :p] = T[:p, p] = beta * S[size - 1, :p]
        start = p
    raise EigensolverError(
        f"Lanczos did not converge after {max_restarts} restarts", best_residual=best
    )


def lowest_eigenpair(operator, dim: int, dense_max: int = DENSE_MAX_DIM, v0=None, tol=1e-10) -> Eigenpair:
    """Dispatch on size: dense for ``dim <= dense_max``, Lanczos otherwise.

    ``operator`` must offer ``toarray()`` and ``matvec(v)``.
    """
    if dim < 1:
        raise ValueError("empty operator")
    if dim <= dense_max:
        return dense_lowest(operator.toarray())
    return lanczos_lowest(operator.matvec, dim, v0=v0, tol=tol)
