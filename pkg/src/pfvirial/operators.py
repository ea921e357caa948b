"""Hamiltonian terms, virial operators and the hypervirial oracle.

Operators on the product basis (electronic configurations x Fock spaces) are
stored as sums of tensor products. Slot 0 is the electronic factor, slot
``alpha + 1`` the Fock factor of mode ``alpha``; a factor missing from a
product acts as the identity. A factor is either a matrix (scipy sparse for
the electronic slot, dense numpy for modes) or a 1-D array meaning a diagonal.

Application is matrix-free: a state is reshaped to
``(n_el, n_max_1 + 1, ...)`` and each factor acts on its own axis.

Ladder convention: q = sqrt(w/2)(a + a^dag), p = i(a^dag - a)/sqrt(2w), so that
[q, p] = i below the Fock cutoff and (w^2 p^2 + q^2)/2 = w(n + 1/2) there.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .electrons import ElectronBasis
from .errors import SpecError
from .model import ModeSpec, SystemSpec, check_system, hilbert_dimension


class TermId(enum.Enum):
    KINETIC = "kinetic"
    EXTERNAL_POTENTIAL = "external_potential"
    INTERACTION = "interaction"
    FIELD_ENERGY = "field_energy"
    DIPOLE_COUPLING = "dipole_coupling"
    DIPOLE_SELF_ENERGY = "dipole_self_energy"
    EXTERNAL_DRIVE = "external_drive"
    TOTAL = "total"
    TOTAL_TRANSFORMED = "total_transformed"


HAMILTONIAN_TERMS = (
    TermId.KINETIC,
    TermId.EXTERNAL_POTENTIAL,
    TermId.INTERACTION,
    TermId.FIELD_ENERGY,
    TermId.DIPOLE_COUPLING,
    TermId.DIPOLE_SELF_ENERGY,
    TermId.EXTERNAL_DRIVE,
)


# --------------------------------------------------------------------------
# factor algebra


def _is_diag(f) -> bool:
    return isinstance(f, np.ndarray) and f.ndim == 1


def _factor_matmul(a, b):
    if _is_diag(a) and _is_diag(b):
        return a * b
    if _is_diag(a):
        return sp.diags(a) @ b if sp.issparse(b) else a[:, None] * b
    if _is_diag(b):
        return a @ sp.diags(b) if sp.issparse(a) else a * b[None, :]
    return a @ b


def _factor_adjoint(f):
    if _is_diag(f):
        return np.conj(f)
    return f.conj().T


def _factor_to_sparse(f) -> sp.csr_matrix:
    if _is_diag(f):
        return sp.diags(f, format="csr")
    return sp.csr_matrix(f)


def _factor_add(a, b):
    if _is_diag(a) and _is_diag(b):
        return a + b
    if sp.issparse(a) or sp.issparse(b):
        return (_factor_to_sparse(a) + _factor_to_sparse(b)).tocsr()
    a = np.diag(a) if _is_diag(a) else a
    b = np.diag(b) if _is_diag(b) else b
    return a + b


@dataclass(frozen=True)
class ProductTerm:
    coeff: complex
    factors: tuple  # ((slot, factor), ...) sorted by slot

    def slots(self) -> tuple[int, ...]:
        return tuple(s for s, _ in self.factors)


class SparseOperator:
    """Linear operator on the product basis, stored as a sum of tensor products."""

    def __init__(self, shape: Sequence[int], terms: Sequence[ProductTerm] = (), hermitian: bool = False,
                 name: str = ""):
        self.shape = tuple(int(s) for s in shape)
        self.terms = tuple(terms)
        self.hermitian = hermitian
        self.name = name

    @property
    def dim(self) -> int:
        return int(np.prod(self.shape))

    @classmethod
    def product(cls, shape, factors: dict, coeff: complex = 1.0, hermitian: bool = False, name: str = ""):
        term = ProductTerm(complex(coeff), tuple(sorted(factors.items(), key=lambda kv: kv[0])))
        return cls(shape, [term], hermitian=hermitian, name=name)

    @classmethod
    def identity(cls, shape, coeff: complex = 1.0, name: str = "identity"):
        return cls(shape, [ProductTerm(complex(coeff), ())], hermitian=True, name=name)

    @classmethod
    def zero(cls, shape, name: str = "zero"):
        return cls(shape, [], hermitian=True, name=name)

    # ---- algebra --------------------------------------------------------------

    def __add__(self, other: "SparseOperator") -> "SparseOperator":
        self._check(other)
        return SparseOperator(self.shape, self.terms + other.terms, self.hermitian and other.hermitian,
                              name=f"{self.name}+{other.name}")

    def __sub__(self, other: "SparseOperator") -> "SparseOperator":
        return self + (-1.0) * other

    def __neg__(self) -> "SparseOperator":
        return (-1.0) * self

    def __mul__(self, scalar) -> "SparseOperator":
        scalar = complex(scalar)
        herm = self.hermitian and scalar.imag == 0.0
        return SparseOperator(self.shape, [ProductTerm(t.coeff * scalar, t.factors) for t in self.terms],
                              hermitian=herm, name=self.name)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, SparseOperator):
            return self.compose(other)
        return self.apply(other)

    def compose(self, other: "SparseOperator") -> "SparseOperator":
        """Operator product self @ other."""
        self._check(other)
        terms = []
        for a in self.terms:
            for b in other.terms:
                fa, fb = dict(a.factors), dict(b.factors)
                merged = {}
                for slot in sorted(set(fa) | set(fb)):
                    if slot in fa and slot in fb:
                        merged[slot] = _factor_matmul(fa[slot], fb[slot])
                    else:
                        merged[slot] = fa.get(slot, fb.get(slot))
                terms.append(ProductTerm(a.coeff * b.coeff, tuple(sorted(merged.items(), key=lambda kv: kv[0]))))
        return SparseOperator(self.shape, terms, hermitian=False, name=f"({self.name})({other.name})")

    def adjoint(self) -> "SparseOperator":
        return SparseOperator(self.shape, [ProductTerm(np.conj(t.coeff), tuple((s, _factor_adjoint(f)) for s, f in t.factors))
                                           for t in self.terms], hermitian=self.hermitian, name=f"{self.name}^dag")

    def consolidated(self) -> "SparseOperator":
        """Merge all terms that act on the same single slot into one factor."""
        single: dict[int, object] = {}
        scalar = 0.0 + 0.0j
        multi = []
        for t in self.terms:
            if len(t.factors) == 0:
                scalar += t.coeff
            elif len(t.factors) == 1:
                slot, f = t.factors[0]
                scaled = f * t.coeff if not sp.issparse(f) else (f * t.coeff).tocsr()
                single[slot] = scaled if slot not in single else _factor_add(single[slot], scaled)
            else:
                multi.append(t)
        terms = [ProductTerm(1.0 + 0j, ((slot, f),)) for slot, f in sorted(single.items(), key=lambda kv: kv[0])]
        if scalar != 0:
            terms.append(ProductTerm(scalar, ()))
        return SparseOperator(self.shape, terms + multi, hermitian=self.hermitian, name=self.name)

    def _check(self, other):
        if self.shape != other.shape:
            raise ValueError(f"operator shapes differ: {self.shape} vs {other.shape}")

    # ---- application ----------------------------------------------------------

    def apply(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v)
        if v.shape[0] != self.dim:
            raise ValueError(f"dimension mismatch: operator {self.dim}, vector {v.shape[0]}")
        vec = v.ndim == 1
        block = v.reshape(self.dim, -1)
        k = block.shape[1]
        tensor = block.reshape(self.shape + (k,))
        out = np.zeros(self.shape + (k,), dtype=np.result_type(v.dtype, np.complex128))
        for term in self.terms:
            out += term.coeff * self._apply_factors(term.factors, tensor)
        out = out.reshape(self.dim, k)
        return out[:, 0] if vec else out

    def _apply_factors(self, factors, t: np.ndarray) -> np.ndarray:
        for slot, f in factors:
            if _is_diag(f):
                bshape = [1] * t.ndim
                bshape[slot] = f.shape[0]
                t = f.reshape(bshape) * t
            elif slot == 0:
                t = np.asarray(f @ t.reshape(self.shape[0], -1)).reshape(t.shape)
            else:
                t = np.moveaxis(np.tensordot(f, t, axes=([1], [slot])), 0, slot)
        return t

    # ---- assembled views ------------------------------------------------------

    def to_sparse(self) -> sp.csr_matrix:
        total = sp.csr_matrix((self.dim, self.dim), dtype=complex)
        for term in self.terms:
            fac = dict(term.factors)
            mat = sp.identity(1, format="csr", dtype=complex)
            for slot, n in enumerate(self.shape):
                f = fac.get(slot)
                mat = sp.kron(mat, _factor_to_sparse(f) if f is not None else sp.identity(n), format="csr")
            total = total + term.coeff * mat
        return total.tocsr()

    def diagonal(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=complex)
        for term in self.terms:
            fac = dict(term.factors)
            block = np.array(term.coeff)
            for slot, n in enumerate(self.shape):
                f = fac.get(slot)
                d = np.ones(n) if f is None else (f if _is_diag(f) else np.asarray(f.diagonal()).ravel())
                block = np.multiply.outer(block, d)
            out += block
        return out.ravel()

    @property
    def triplets(self):
        """(slot, rows, cols, values) when the operator touches a single factor, else None."""
        slots = {t.slots() for t in self.terms}
        if len(slots) != 1:
            return None
        (only,) = slots
        if len(only) != 1:
            return None
        mat = None
        for t in self.terms:
            f = _factor_to_sparse(t.factors[0][1]) * t.coeff
            mat = f if mat is None else mat + f
        coo = sp.coo_matrix(mat)
        return only[0], coo.row, coo.col, coo.data

    def __repr__(self) -> str:
        return f"SparseOperator(name={self.name!r}, shape={self.shape}, terms={len(self.terms)})"


# --------------------------------------------------------------------------
# modes


def mode_ladder_matrices(mode: ModeSpec) -> tuple[np.ndarray, np.ndarray]:
    """Truncated q and p matrices of size (n_max + 1)^2 in the number basis."""
    if mode.n_max < 1:
        raise SpecError("mode cutoff n_max must be at least 1")
    w = mode.omega
    a = np.diag(np.sqrt(np.arange(1, mode.n_max + 1, dtype=float)), 1)
    q = np.sqrt(w / 2.0) * (a + a.T)
    p = 1j * (a.T - a) / np.sqrt(2.0 * w)
    return q, p


def _compact(mat: np.ndarray):
    off = mat - np.diag(np.diag(mat))
    if not np.any(off):
        d = np.diag(mat)
        return d.real.copy() if not np.any(d.imag) else d.copy()
    return mat


# --------------------------------------------------------------------------
# discretized system


@dataclass(frozen=True)
class MeanField:
    """Classical-field parameters: displacements <p_a> and dipoles sum_j <lam_a . r_j>."""

    displacements: tuple[float, ...]
    dipoles: tuple[float, ...]


class Discretization:
    """Every grid- and Fock-space ingredient of one SystemSpec, built once."""

    def __init__(self, spec: SystemSpec):
        check_system(spec)
        self.spec = spec
        self.basis = ElectronBasis(spec)
        self.shape = (self.basis.dim,) + tuple(m.n_max + 1 for m in spec.modes)
        self.dim = hilbert_dimension(spec)
        self.ladders = [mode_ladder_matrices(m) for m in spec.modes]

    # electronic pieces, all on the configuration basis
    @cached_property
    def kinetic(self) -> sp.csr_matrix:
        return self.basis.one_body(-0.5 * self.basis.laplacian)

    @cached_property
    def potential_values(self) -> np.ndarray:
        return self.spec.potential.evaluate(self.basis.points)

    @cached_property
    def external(self) -> np.ndarray:
        return self.basis.one_body_diagonal(self.potential_values)

    @cached_property
    def r_grad_v(self) -> np.ndarray:
        return self.basis.one_body_diagonal(self.spec.potential.r_dot_gradient(self.basis.points))

    @cached_property
    def interaction(self) -> np.ndarray:
        if self.basis.count == 1:
            return np.zeros(self.basis.dim)
        return self.spec.interaction.evaluate(self.basis.pair_distances(), self.basis.coincident_coulomb())

    @cached_property
    def interaction_virial(self) -> np.ndarray:
        if self.basis.count == 1:
            return np.zeros(self.basis.dim)
        return self.spec.interaction.virial_kernel(self.basis.pair_distances(), self.basis.coincident_coulomb())

    def dipole(self, alpha: int) -> np.ndarray:
        lam = self.spec.modes[alpha].coupling_vector
        return self.basis.one_body_diagonal(self.basis.points @ lam)

    @cached_property
    def self_energy(self) -> np.ndarray:
        out = np.zeros(self.basis.dim)
        for alpha in range(len(self.spec.modes)):
            out += 0.5 * self.dipole(alpha) ** 2
        return out

    @cached_property
    def position_gradient(self) -> sp.csr_matrix:
        return self.basis.one_body(self.basis.position_gradient)

    def coupling_gradient(self, alpha: int) -> sp.csr_matrix:
        """sum_j lam_a . grad_j on the configuration basis."""
        lam = self.spec.modes[alpha].coupling_vector
        return self.basis.one_body(self.basis.directional_gradient(lam))

    def field_energy_factor(self, alpha: int):
        q, p = self.ladders[alpha]
        w = self.spec.modes[alpha].omega
        return _compact(0.5 * (w**2 * (p @ p) + q @ q))

    # assembled helpers
    def electronic(self, factor, hermitian=True, name="") -> SparseOperator:
        return SparseOperator.product(self.shape, {0: factor}, hermitian=hermitian, name=name)

    def modal(self, alpha: int, factor, coeff=1.0, hermitian=True, name="") -> SparseOperator:
        return SparseOperator.product(self.shape, {alpha + 1: factor}, coeff=coeff, hermitian=hermitian, name=name)

    def zero(self, name="zero") -> SparseOperator:
        return SparseOperator.zero(self.shape, name=name)


@lru_cache(maxsize=16)
def discretize(spec: SystemSpec) -> Discretization:
    return Discretization(spec)


# --------------------------------------------------------------------------
# Hamiltonian terms


def build_term(spec: SystemSpec, term: TermId, mean_field: MeanField | None = None) -> SparseOperator:
    """Assemble one Hamiltonian term on the product basis.

    For ``field_treatment == "classical"`` the dipole coupling (and therefore
    the total) is the mean-field substitution and needs ``mean_field``.
    """
    disc = discretize(spec)
    modes = spec.modes
    classical = spec.field_treatment == "classical"

    if term is TermId.KINETIC:
        return disc.electronic(disc.kinetic, name="T")
    if term is TermId.EXTERNAL_POTENTIAL:
        return disc.electronic(disc.external, name="V")
    if term is TermId.INTERACTION:
        return disc.electronic(disc.interaction, name="W")
    if term is TermId.DIPOLE_SELF_ENERGY:
        return disc.electronic(disc.self_energy, name="Hd")
    if term is TermId.FIELD_ENERGY:
        op = disc.zero("Hb")
        for a in range(len(modes)):
            op = op + disc.modal(a, disc.field_energy_factor(a))
        op.name = "Hb"
        return op
    if term is TermId.EXTERNAL_DRIVE:
        op = disc.zero("Hext")
        for a, m in enumerate(modes):
            if m.drive != 0.0:
                op = op + disc.modal(a, disc.ladders[a][1], coeff=m.drive / m.omega)
        op.name = "Hext"
        return op
    if term is TermId.DIPOLE_COUPLING:
        if classical:
            if mean_field is None:
                raise SpecError("invalid term for field treatment: classical coupling needs mean-field parameters")
            return _meanfield_coupling(disc, mean_field)
        op = disc.zero("Hc")
        for a, m in enumerate(modes):
            d = disc.dipole(a)
            if np.any(d):
                op = op + SparseOperator.product(disc.shape, {0: d, a + 1: disc.ladders[a][1]}, coeff=-m.omega,
                                                 hermitian=True)
        op.hermitian = True
        op.name = "Hc"
        return op
    if term is TermId.TOTAL:
        op = disc.zero()
        for t in HAMILTONIAN_TERMS:
            op = op + build_term(spec, t, mean_field)
        op = op.consolidated()
        op.hermitian = True
        op.name = "H"
        return op
    if term is TermId.TOTAL_TRANSFORMED:
        if classical:
            raise SpecError("invalid term for field treatment: transformed form is quantum only")
        return _transformed_total(spec, disc)
    raise SpecError(f"unknown term {term!r}")


def _meanfield_coupling(disc: Discretization, mf: MeanField) -> SparseOperator:
    modes = disc.spec.modes
    if len(mf.displacements) != len(modes) or len(mf.dipoles) != len(modes):
        raise SpecError("mean-field parameters must have one entry per mode")
    op = disc.zero("Hc_mf")
    for a, m in enumerate(modes):
        p_mean, d_mean = mf.displacements[a], mf.dipoles[a]
        op = op + disc.modal(a, disc.ladders[a][1], coeff=-m.omega * d_mean)
        op = op + disc.electronic(-m.omega * p_mean * disc.dipole(a))
        op = op + SparseOperator.identity(disc.shape, coeff=m.omega * d_mean * p_mean)
    op.hermitian = True
    op.name = "Hc_mf"
    return op


def _transformed_total(spec: SystemSpec, disc: Discretization) -> SparseOperator:
    # T + V + W + 1/2 sum_a ((w p_a - lam_a . sum r)^2 + q_a^2) + Hext, squares by operator algebra
    op = disc.electronic(disc.kinetic) + disc.electronic(disc.external) + disc.electronic(disc.interaction)
    for a, m in enumerate(spec.modes):
        q, p = disc.ladders[a]
        shifted = disc.modal(a, p, coeff=m.omega) - disc.electronic(disc.dipole(a))
        op = op + 0.5 * shifted.compose(shifted) + 0.5 * disc.modal(a, q).compose(disc.modal(a, q))
    op = op + build_term(spec, TermId.EXTERNAL_DRIVE)
    op = op.consolidated()
    op.hermitian = True
    op.name = "H_transformed"
    return op


# --------------------------------------------------------------------------
# auxiliary operators used by the virial identities


def mode_operator(spec: SystemSpec, alpha: int, which: str) -> SparseOperator:
    """q, p, q^2 or w^2 p^2 of one mode, as a product-basis operator."""
    disc = discretize(spec)
    if not 0 <= alpha < len(spec.modes):
        raise SpecError(f"unknown mode index {alpha}")
    q, p = disc.ladders[alpha]
    w = spec.modes[alpha].omega
    factor = {"q": q, "p": p, "q2": _compact(q @ q), "w2p2": _compact(w**2 * (p @ p))}[which]
    return disc.modal(alpha, factor, name=f"{which}[{alpha}]")


def dipole_operator(spec: SystemSpec, alpha: int) -> SparseOperator:
    disc = discretize(spec)
    return disc.electronic(disc.dipole(alpha), name=f"D[{alpha}]")


def build_virial_operator(spec: SystemSpec, kind: str, alpha: int | None = None) -> SparseOperator:
    """Electronic (sum r.grad), mode (sum q p) or mixed (sum_i (lam_a . r_i) q_a) virial operator."""
    disc = discretize(spec)
    if kind == "electronic":
        return disc.electronic(disc.position_gradient, hermitian=False, name="A_elec")
    if kind == "mode":
        op = disc.zero("A_mode")
        for a in range(len(spec.modes)):
            q, p = disc.ladders[a]
            op = op + disc.modal(a, q @ p, hermitian=False)
        op.hermitian = False
        op.name = "A_mode"
        return op
    if kind == "mixed":
        if alpha is None or not 0 <= alpha < len(spec.modes):
            raise SpecError(f"unknown mode index {alpha}")
        q, _ = disc.ladders[alpha]
        return SparseOperator.product(disc.shape, {0: disc.dipole(alpha), alpha + 1: q}, hermitian=False,
                                      name=f"A_mixed[{alpha}]")
    raise SpecError(f"unknown virial operator kind {kind!r}")


def velocity_coupling_operator(spec: SystemSpec, alpha: int) -> SparseOperator:
    """i w_a^-1 sum_j (lam_a . grad_j) q_a; Hermitian, its expectation is M_a."""
    disc = discretize(spec)
    q, _ = disc.ladders[alpha]
    w = spec.modes[alpha].omega
    return SparseOperator.product(disc.shape, {0: disc.coupling_gradient(alpha), alpha + 1: q}, coeff=1j / w,
                                  hermitian=True, name=f"M[{alpha}]")


# --------------------------------------------------------------------------
# expectation values


def _vector(state) -> np.ndarray:
    return state.coefficients if hasattr(state, "coefficients") else np.asarray(state)


def expectation(op: SparseOperator, state) -> complex:
    """<psi, op psi>. Inner products use numpy's vdot, whose order is fixed."""
    psi = _vector(state)
    if psi.shape[0] != op.dim:
        raise ValueError(f"dimension mismatch: operator {op.dim}, state {psi.shape[0]}")
    return complex(np.vdot(psi, op.apply(psi)))


def real_expectation(op: SparseOperator, state, rtol: float = 1e-10) -> float:
    """Expectation of a Hermitian operator; the imaginary part is checked, then dropped."""
    psi = _vector(state)
    opsi = op.apply(psi)
    val = complex(np.vdot(psi, opsi))
    scale = max(abs(val), float(np.linalg.norm(opsi)), 1e-300)
    if abs(val.imag) > rtol * scale:
        raise ValueError(f"expectation of {op.name} has imaginary part {val.imag:.3e}")
    return val.real


def commutator_expectation(h: SparseOperator, a: SparseOperator, state) -> complex:
    """<H psi, A psi> - <psi, A H psi>, i.e. <[H, A]> for Hermitian H."""
    psi = _vector(state)
    if psi.shape[0] != h.dim or h.dim != a.dim:
        raise ValueError("dimension mismatch in commutator expectation")
    hpsi = h.apply(psi)
    return complex(np.vdot(hpsi, a.apply(psi)) - np.vdot(psi, a.apply(hpsi)))


def hermiticity_defect(op: SparseOperator, trials: int = 100, seed: int = 0) -> float:
    """Largest relative |<u, Op v> - conj(<v, Op u>)| over random complex pairs."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        u = rng.standard_normal(op.dim) + 1j * rng.standard_normal(op.dim)
        v = rng.standard_normal(op.dim) + 1j * rng.standard_normal(op.dim)
        ou, ov = op.apply(u), op.apply(v)
        lhs, rhs = np.vdot(u, ov), np.conj(np.vdot(v, ou))
        scale = max(abs(lhs), np.linalg.norm(u) * np.linalg.norm(ov), 1e-300)
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst
