"""Thick-restart Lanczos for the lowest eigenpairs of a Hermitian operator.

Every new Krylov vector is orthogonalized twice against the whole basis
(classical Gram-Schmidt, repeated), so the projected matrix is kept as a full
Hermitian array rather than a tridiagonal one. On restart the lowest Ritz
vectors are kept together with the last residual direction. Convergence is
decided on the Ritz estimate and then confirmed with an explicit residual.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .errors import ConvergenceError


@dataclass
class LanczosResult:
    values: np.ndarray
    vectors: np.ndarray  # (n, k)
    residuals: np.ndarray
    matvecs: int
    restarts: int


def _orthogonalize(w: np.ndarray, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Remove the span of ``rows`` (orthonormal basis vectors stored as rows) from w."""
    coeffs = np.conj(rows @ np.conj(w))
    w = w - rows.T @ coeffs
    again = np.conj(rows @ np.conj(w))
    w = w - rows.T @ again
    return w, coeffs + again


def thick_restart_lanczos(
    matvec: Callable[[np.ndarray], np.ndarray],
    n: int,
    k: int = 1,
    tol: float = 1e-10,
    krylov_dim: int = 40,
    max_matvecs: int = 20000,
    seed: int = 0,
    start: np.ndarray | None = None,
) -> LanczosResult:
    """Lowest ``k`` eigenpairs with ||A y - theta y|| <= tol for each."""
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    if k < 1 or k > n:
        raise ValueError(f"cannot compute {k} eigenpairs of a dimension-{n} operator")
    m = min(max(krylov_dim, 2 * k + 8), n)
    keep = min(max(k + (m - k) // 2, k + 1), m - 1) if m > k + 1 else k

    rng = np.random.default_rng(seed)
    if start is None:
        v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    else:
        v = np.asarray(start, dtype=complex).copy()
    v /= np.linalg.norm(v)

    basis = np.zeros((m + 1, n), dtype=complex)  # one Krylov vector per row
    proj = np.zeros((m + 1, m + 1), dtype=complex)
    basis[0] = v
    j0 = 0
    matvecs = 0
    restarts = 0
    best = np.inf

    while True:
        beta = 0.0
        j = j0
        for j in range(j0, m):
            w = np.asarray(matvec(basis[j]), dtype=complex)
            matvecs += 1
            w, h = _orthogonalize(w, basis[: j + 1])
            proj[: j + 1, j] = h
            proj[j, : j + 1] = np.conj(h)
            beta = float(np.linalg.norm(w))
            if beta <= 1e-14 * max(1.0, float(np.max(np.abs(h)))):
                # invariant subspace: continue with a fresh random direction
                w = rng.standard_normal(n) + 1j * rng.standard_normal(n)
                w, _ = _orthogonalize(w, basis[: j + 1])
                w /= np.linalg.norm(w)
                beta = 0.0
            else:
                w /= beta
            basis[j + 1] = w
            proj[j + 1, j] = beta
            proj[j, j + 1] = beta
        size = j + 1

        sub = proj[:size, :size]
        theta, s = sla.eigh((sub + sub.conj().T) / 2.0)
        estimates = np.abs(beta * s[size - 1, :k])
        best = min(best, float(np.max(estimates)))

        if np.all(estimates <= 0.5 * tol) or matvecs >= max_matvecs or size == n:
            vecs = basis[:size].T @ s[:, :k]
            vecs /= np.linalg.norm(vecs, axis=0)
            av = np.column_stack([matvec(vecs[:, i]) for i in range(k)])
            matvecs += k
            res = np.linalg.norm(av - vecs * theta[:k], axis=0)
            best = min(best, float(np.max(res)))
            if np.all(res <= tol):
                return LanczosResult(theta[:k].copy(), vecs, res, matvecs, restarts)
            if matvecs >= max_matvecs or size == n:
                raise ConvergenceError("Lanczos did not converge", best_residual=best, iterations=matvecs)

        # thick restart: lowest `keep` Ritz vectors plus the residual direction
        restarts += 1
        ritz = (basis[:size].T @ s[:, :keep]).T
        tail = basis[size].copy()
        coupling = beta * s[size - 1, :keep]
        basis[:] = 0.0
        proj[:] = 0.0
        basis[:keep] = ritz
        basis[keep] = tail
        proj[np.arange(keep), np.arange(keep)] = theta[:keep]
        proj[keep, :keep] = coupling
        proj[:keep, keep] = np.conj(coupling)
        j0 = keep
