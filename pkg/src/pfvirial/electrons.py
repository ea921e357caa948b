"""Electronic configuration space on a uniform grid.

One electron lives on the ``n = prod(points)`` grid points. Two electrons live
on the exchange sector of the pair space: ordered pairs (i <= j) for the
symmetric sector, (i < j) for the antisymmetric one. The isometry ``S`` maps
sector coefficients to the full n*n pair amplitude, so a one-body operator A
becomes S^T (A x 1 + 1 x A) S.

Stencils are second order and central: the Laplacian is (1, -2, 1)/h^2 and the
gradient (-1, 0, 1)/(2h), with the wavefunction zero outside the box.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .model import CUBE_INVERSE_DISTANCE, SystemSpec


def _axis_operator(mat: sp.spmatrix, axis: int, points: tuple[int, ...]) -> sp.csr_matrix:
    before = int(np.prod(points[:axis]))
    after = int(np.prod(points[axis + 1:]))
    return sp.kron(sp.kron(sp.identity(before), mat), sp.identity(after), format="csr")


def second_difference(n: int, h: float) -> sp.csr_matrix:
    e = np.ones(n - 1)
    return sp.diags([e, -2.0 * np.ones(n), e], [-1, 0, 1], format="csr") / h**2


def central_difference(n: int, h: float) -> sp.csr_matrix:
    e = np.ones(n - 1)
    return sp.diags([-e, e], [-1, 1], format="csr") / (2.0 * h)


def grid_laplacian(grid) -> sp.csr_matrix:
    """Second-order Laplacian on a hard-wall grid."""
    out = sp.csr_matrix((grid.size, grid.size))
    for a, (n, h) in enumerate(zip(grid.points, grid.spacing)):
        out = out + _axis_operator(second_difference(n, h), a, grid.points)
    return out.tocsr()


def central_gradient(values: np.ndarray, grid) -> np.ndarray:
    """Central-difference gradient of a grid function, shape (size, ndim).

    Interior points use (f[j+1] - f[j-1]) / 2h; the two edge points per axis
    fall back to one-sided second-order differences.
    """
    f = np.asarray(values, dtype=float).reshape(grid.points)
    grads = np.gradient(f, *grid.spacing, edge_order=2) if grid.ndim > 1 else [np.gradient(f, grid.spacing[0], edge_order=2)]
    return np.stack([g.ravel() for g in grads], axis=-1)


class ElectronBasis:
    """Configuration basis and one-/two-body operator assembly for a system."""

    def __init__(self, spec: SystemSpec):
        self.spec = spec
        self.grid = spec.grid
        self.count = spec.electrons.count
        self.exchange = spec.electrons.exchange
        self.points = self.grid.coordinates()
        self.n_single = self.points.shape[0]
        if self.count == 1:
            self.first = np.arange(self.n_single)
            self.second = None
        else:
            offset = 0 if self.exchange == "symmetric" else 1
            i, j = np.triu_indices(self.n_single, k=offset)
            self.first, self.second = i, j
        self.dim = self.first.shape[0]

    # ---- single-particle stencils -------------------------------------------

    @cached_property
    def laplacian(self) -> sp.csr_matrix:
        return grid_laplacian(self.grid)

    @cached_property
    def gradients(self) -> list[sp.csr_matrix]:
        g = self.grid
        return [_axis_operator(central_difference(n, h), a, g.points)
                for a, (n, h) in enumerate(zip(g.points, g.spacing))]

    def directional_gradient(self, direction: np.ndarray) -> sp.csr_matrix:
        out = sp.csr_matrix((self.n_single, self.n_single))
        for comp, grad in zip(direction, self.gradients):
            if comp != 0.0:
                out = out + comp * grad
        return out.tocsr()

    @cached_property
    def position_gradient(self) -> sp.csr_matrix:
        """sum_a x_a d/dx_a with position applied after the derivative."""
        out = sp.csr_matrix((self.n_single, self.n_single))
        for a, grad in enumerate(self.gradients):
            out = out + sp.diags(self.points[:, a]) @ grad
        return out.tocsr()

    # ---- lifting to the configuration space ---------------------------------

    @cached_property
    def isometry(self) -> sp.csr_matrix | None:
        if self.count == 1:
            return None
        n = self.n_single
        i, j = self.first, self.second
        cols = np.arange(self.dim)
        diag = i == j
        off = ~diag
        sign = 1.0 if self.exchange == "symmetric" else -1.0
        rows = np.concatenate([i[off] * n + j[off], j[off] * n + i[off], i[diag] * n + i[diag]])
        cc = np.concatenate([cols[off], cols[off], cols[diag]])
        vals = np.concatenate([np.full(off.sum(), 2**-0.5), np.full(off.sum(), sign * 2**-0.5),
                               np.ones(diag.sum())])
        return sp.csr_matrix((vals, (rows, cc)), shape=(n * n, self.dim))

    def one_body(self, single: sp.spmatrix) -> sp.csr_matrix:
        """Sum over electrons of a single-particle operator."""
        single = sp.csr_matrix(single)
        if self.count == 1:
            return single
        eye = sp.identity(self.n_single, format="csr")
        full = sp.kron(single, eye, format="csr") + sp.kron(eye, single, format="csr")
        s = self.isometry
        return (s.T @ full @ s).tocsr()

    def one_body_diagonal(self, values: np.ndarray) -> np.ndarray:
        """Diagonal of sum_i f(r_i) on the configuration basis."""
        values = np.asarray(values)
        out = values[self.first].copy()
        if self.count == 2:
            out = out + values[self.second]
        return out

    def pair_distances(self) -> np.ndarray:
        if self.count == 1:
            return np.zeros(0)
        diff = self.points[self.first] - self.points[self.second]
        return np.sqrt(np.sum(diff**2, axis=1))

    def coincident_coulomb(self) -> float:
        h = self.grid.cell_volume ** (1.0 / self.grid.ndim)
        return CUBE_INVERSE_DISTANCE / h

    # ---- states -------------------------------------------------------------

    def lift(self, psi: np.ndarray) -> np.ndarray:
        """Configuration coefficients (dim, ...) -> amplitudes (n, [n,] ...)."""
        psi = np.asarray(psi)
        rest = psi.shape[1:]
        if self.count == 1:
            return psi
        full = self.isometry @ psi.reshape(self.dim, -1)
        return full.reshape((self.n_single, self.n_single) + rest)

    def density(self, psi: np.ndarray) -> np.ndarray:
        """One-particle density on the grid (per unit volume), integrating to N."""
        amp = self.lift(psi)
        weights = np.abs(amp) ** 2
        axes = tuple(range(1, weights.ndim))
        return self.count * np.sum(weights, axis=axes) / self.grid.cell_volume

    # ---- inversion r -> -r --------------------------------------------------

    def single_mirror(self) -> np.ndarray | None:
        """Index of -r for every grid point, or None if the grid is not centred."""
        g = self.grid
        for lo, hi in zip(g.lower, g.upper):
            if abs(lo + hi) > 1e-12 * max(1.0, hi - lo):
                return None
        idx = np.arange(self.n_single).reshape(g.points)
        return idx[tuple(slice(None, None, -1) for _ in g.points)].ravel()

    def mirror(self) -> tuple[np.ndarray, np.ndarray] | None:
        """Signed permutation (perm, sign) of configurations under inversion."""
        m = self.single_mirror()
        if m is None:
            return None
        if self.count == 1:
            return m, np.ones(self.dim)
        n = self.n_single
        lookup = np.full((n, n), -1, dtype=np.int64)
        lookup[self.first, self.second] = np.arange(self.dim)
        a, b = m[self.first], m[self.second]
        swapped = a > b
        lo, hi = np.where(swapped, b, a), np.where(swapped, a, b)
        perm = lookup[lo, hi]
        sign = np.ones(self.dim)
        if self.exchange == "antisymmetric":
            sign[swapped] = -1.0
        return perm, sign
