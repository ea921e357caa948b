"""Eigenstates of the quantum Hamiltonian and the classical-field mean-field cycle.

Dense path. With the ladder convention used here every matrix element of the
Hamiltonian picks up a factor i per unit change of photon number, so the
diagonal phase i^(n_1 + n_2 + ...) makes the matrix real symmetric. When the
grid is centred and the potential even, inversion (r -> -r together with
(-1)^n on every mode) commutes with H and the matrix splits into two blocks.
Both reductions are detected numerically on the assembled matrix, never
assumed, and the dense cap applies to the largest block actually diagonalized.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import ConvergenceError, DenseCapError, ScfError, SpecError
from .lanczos import thick_restart_lanczos
from .model import SystemSpec, check_system
from .operators import MeanField, TermId, build_term, discretize
from .state import QuantumState

log = logging.getLogger(__name__)

DEFAULT_DENSE_CAP = 5000


@dataclass(frozen=True)
class EigenSolveConfig:
    which: str = "ground"  # "ground" or "lowest_k"
    k: int = 1
    max_iterations: int = 20000  # operator applications
    krylov_dim: int = 40
    tol: float = 1e-10
    seed: int = 0
    dense_cap: int = DEFAULT_DENSE_CAP
    method: str = "auto"  # "auto", "dense" or "lanczos"

    def __post_init__(self):
        if self.which not in ("ground", "lowest_k"):
            raise SpecError(f"unknown eigenpair selection {self.which!r}")
        if self.tol <= 0:
            raise SpecError("eigensolver tolerance must be positive")
        if self.k < 1:
            raise SpecError("k must be at least 1")
        if self.krylov_dim < 2 * self.count + 8:
            raise SpecError(f"Krylov dimension must be at least 2k+8 = {2 * self.count + 8}")
        if self.method not in ("auto", "dense", "lanczos"):
            raise SpecError(f"unknown eigensolver method {self.method!r}")

    @property
    def count(self) -> int:
        return 1 if self.which == "ground" else self.k


@dataclass(frozen=True)
class ScfConfig:
    mixing: float = 0.5
    tol: float = 1e-10
    max_cycles: int = 200
    dense_cap: int = DEFAULT_DENSE_CAP
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.mixing <= 1.0:
            raise SpecError("mixing factor must lie in (0, 1]")
        if self.tol <= 0:
            raise SpecError("SCF tolerance must be positive")
        if self.max_cycles < 1:
            raise SpecError("max_cycles must be at least 1")


@dataclass
class MeanFieldSolution:
    spec: SystemSpec
    electronic: np.ndarray  # coefficients on the electronic configuration basis
    electronic_energy: float
    photon_states: list[np.ndarray]
    photon_energies: list[float]
    displacements: tuple[float, ...]  # <p_a> used in the electronic Hamiltonian
    dipoles: tuple[float, ...]  # dipoles used in the photon Hamiltonians
    electronic_dipoles: tuple[float, ...]  # dipoles of the final electronic state
    total_energy: float
    cycles: int
    converged: bool
    history: list[float] = field(default_factory=list)

    @property
    def mean_field(self) -> MeanField:
        return MeanField(self.displacements, self.dipoles)

    def product_state(self) -> QuantumState:
        vec = self.electronic.astype(complex)
        for chi in self.photon_states:
            vec = np.kron(vec, chi)
        state = QuantumState.normalized(vec, energy=self.total_energy)
        state.residual = eigenstate_residual(self.spec, state, self.mean_field)
        return state

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "cycles": self.cycles,
            "total_energy": self.total_energy,
            "electronic_energy": self.electronic_energy,
            "photon_energies": list(self.photon_energies),
            "displacements": list(self.displacements),
            "dipoles": list(self.electronic_dipoles),
            "dipole_change_history": list(self.history),
        }


# --------------------------------------------------------------------------
# helpers


def _require_quantum(spec: SystemSpec) -> None:
    if spec.field_treatment != "quantum":
        raise SpecError("eigensolvers act on the quantum Hamiltonian; use scf_meanfield for classical fields")


def hamiltonian(spec: SystemSpec, mean_field: MeanField | None = None):
    return build_term(spec, TermId.TOTAL, mean_field)


def spectral_scale(spec: SystemSpec, energy: float, mean_field: MeanField | None = None) -> float:
    """max(|E|, max |diag H|), the scale used for relative eigen-tolerances."""
    diag = hamiltonian(spec, mean_field).diagonal()
    return max(abs(energy), float(np.max(np.abs(diag))))


def eigenstate_residual(spec: SystemSpec, psi, mean_field: MeanField | None = None) -> float:
    """||H psi - <H> psi||_2 for a normalized state."""
    vec = psi.coefficients if isinstance(psi, QuantumState) else np.asarray(psi, dtype=complex)
    h = hamiltonian(spec, mean_field)
    if vec.shape[0] != h.dim:
        raise ValueError(f"dimension mismatch: Hamiltonian {h.dim}, state {vec.shape[0]}")
    hv = h.apply(vec)
    energy = np.vdot(vec, hv).real / np.vdot(vec, vec).real
    return float(np.linalg.norm(hv - energy * vec))


def _photon_phase(shape: tuple[int, ...]) -> np.ndarray:
    total = np.zeros(shape[1:], dtype=int)
    for axis, n in enumerate(shape[1:]):
        occ = np.arange(n).reshape([-1 if a == axis else 1 for a in range(len(shape) - 1)])
        total = total + occ
    phase = (1j ** (total % 4)).ravel() if len(shape) > 1 else np.ones(1, dtype=complex)
    return np.tile(phase, shape[0])


def _parity(spec: SystemSpec) -> tuple[np.ndarray, np.ndarray] | None:
    disc = discretize(spec)
    mirror = disc.basis.mirror()
    if mirror is None:
        return None
    perm_e, sign_e = mirror
    fock = disc.shape[1:]
    n_fock = int(np.prod(fock)) if fock else 1
    sign_f = np.ones(fock) if fock else np.ones(())
    for axis, n in enumerate(fock):
        occ = np.arange(n).reshape([-1 if a == axis else 1 for a in range(len(fock))])
        sign_f = sign_f * (-1.0) ** occ
    perm = (perm_e[:, None] * n_fock + np.arange(n_fock)[None, :]).ravel()
    sign = (sign_e[:, None] * np.ravel(sign_f)[None, :]).ravel()
    return perm, sign


def _parity_blocks(perm: np.ndarray, sign: np.ndarray) -> list[sp.csr_matrix]:
    n = perm.shape[0]
    idx = np.arange(n)
    fixed = perm == idx
    lead = idx < perm
    blocks = []
    for parity in (1.0, -1.0):
        singles = idx[fixed & (sign == parity)]
        pairs = idx[lead]
        rows = np.concatenate([singles, pairs, perm[pairs]])
        cols = np.concatenate([np.arange(singles.size), singles.size + np.arange(pairs.size),
                               singles.size + np.arange(pairs.size)])
        vals = np.concatenate([np.ones(singles.size), np.full(pairs.size, 2**-0.5),
                               parity * sign[pairs] * 2**-0.5])
        blocks.append(sp.csr_matrix((vals, (rows, cols)), shape=(n, singles.size + pairs.size)))
    return blocks


def _reduced_blocks(spec: SystemSpec):
    """(phase vector, real-or-complex sparse H in the rotated frame, list of block isometries)."""
    disc = discretize(spec)
    mat = hamiltonian(spec).to_sparse()
    phase = _photon_phase(disc.shape)
    rotated = (sp.diags(np.conj(phase)) @ mat @ sp.diags(phase)).tocsr()
    scale = float(np.max(np.abs(rotated.data))) if rotated.nnz else 1.0
    if rotated.nnz == 0 or float(np.max(np.abs(rotated.data.imag))) <= 1e-14 * scale:
        rotated = rotated.real.tocsr()
    else:
        phase = np.ones(disc.dim, dtype=complex)
        rotated = mat
    blocks = [sp.identity(disc.dim, format="csr")]
    parity = _parity(spec)
    if parity is not None:
        perm, sign = parity
        pi = sp.csr_matrix((sign, (perm, np.arange(disc.dim))), shape=(disc.dim, disc.dim))
        defect = pi @ rotated @ pi.T - rotated
        if defect.nnz == 0 or float(np.max(np.abs(defect.data))) <= 1e-13 * scale:
            blocks = [b for b in _parity_blocks(perm, sign) if b.shape[1] > 0]
    return phase, rotated, blocks


# --------------------------------------------------------------------------
# eigensolvers


def dense_eigensolve(spec: SystemSpec, config: EigenSolveConfig = EigenSolveConfig()) -> list[QuantumState]:
    """Lowest eigenpairs by dense diagonalization of the symmetry-reduced blocks."""
    _require_quantum(spec)
    check_system(spec)
    k = config.count
    phase, rotated, blocks = _reduced_blocks(spec)
    largest = max(b.shape[1] for b in blocks)
    if largest > config.dense_cap:
        raise DenseCapError(f"dense block of size {largest} exceeds the dense cap {config.dense_cap}; "
                            "use the iterative (Lanczos) path")
    found: list[tuple[float, np.ndarray]] = []
    for iso in blocks:
        block = (iso.T @ rotated @ iso).toarray()
        kk = min(k, block.shape[0])
        vals, vecs = sla.eigh(block, subset_by_index=(0, kk - 1), driver="evr")
        for i in range(kk):
            found.append((float(vals[i]), phase * (iso @ vecs[:, i])))
    found.sort(key=lambda pair: pair[0])
    states = []
    for energy, vec in found[:k]:
        state = QuantumState.normalized(vec, energy=energy)
        state.residual = eigenstate_residual(spec, state)
        states.append(state)
    return states


def lanczos_lowest(spec: SystemSpec, config: EigenSolveConfig = EigenSolveConfig()) -> list[QuantumState]:
    _require_quantum(spec)
    check_system(spec)
    h = hamiltonian(spec)
    result = thick_restart_lanczos(h.apply, h.dim, k=config.count, tol=config.tol,
                                   krylov_dim=config.krylov_dim, max_matvecs=config.max_iterations,
                                   seed=config.seed)
    states = []
    for i in range(config.count):
        state = QuantumState.normalized(result.vectors[:, i], energy=float(result.values[i]))
        state.residual = float(result.residuals[i])
        states.append(state)
    log.info("Lanczos: %d operator applications, %d restarts", result.matvecs, result.restarts)
    return states


def lanczos_ground_state(spec: SystemSpec, config: EigenSolveConfig = EigenSolveConfig()) -> QuantumState:
    """Ground state with ||H psi - E psi|| <= config.tol; raises ConvergenceError otherwise."""
    return lanczos_lowest(spec, EigenSolveConfig(**{**config.__dict__, "which": "ground", "k": 1}))[0]


def solve(spec: SystemSpec, config: EigenSolveConfig = EigenSolveConfig()) -> list[QuantumState]:
    """Dispatch to the dense or the Lanczos path; ``auto`` prefers dense when it fits the cap."""
    if config.method == "dense":
        return dense_eigensolve(spec, config)
    if config.method == "lanczos":
        return lanczos_lowest(spec, config)
    if discretize(spec).dim <= 2 * config.dense_cap:
        try:
            return dense_eigensolve(spec, config)
        except DenseCapError:
            pass
    return lanczos_lowest(spec, config)


# --------------------------------------------------------------------------
# classical-field mean field


def electronic_hamiltonian(spec: SystemSpec, displacements) -> sp.csr_matrix:
    """T + V + W + H_d - sum_a w_a <p_a> (lam_a . sum_i r_i) on the electronic basis."""
    disc = discretize(spec)
    diag = disc.external + disc.interaction + disc.self_energy
    for a, m in enumerate(spec.modes):
        diag = diag - m.omega * displacements[a] * disc.dipole(a)
    return (disc.kinetic + sp.diags(diag)).tocsr()


def photon_hamiltonian(spec: SystemSpec, alpha: int, dipole: float) -> np.ndarray:
    """H_b - w d p + (f/w) p for one mode, as a dense Fock matrix."""
    disc = discretize(spec)
    m = spec.modes[alpha]
    hb = disc.field_energy_factor(alpha)
    hb = np.diag(hb) if hb.ndim == 1 else hb
    return hb + (-m.omega * dipole + m.drive / m.omega) * disc.ladders[alpha][1]


def _electronic_ground(spec: SystemSpec, displacements, config: ScfConfig) -> tuple[float, np.ndarray]:
    h = electronic_hamiltonian(spec, displacements)
    if h.shape[0] <= config.dense_cap:
        vals, vecs = sla.eigh(h.toarray(), subset_by_index=(0, 0), driver="evr")
        return float(vals[0]), vecs[:, 0]
    res = thick_restart_lanczos(lambda v: h @ v, h.shape[0], k=1, seed=config.seed)
    vec = res.vectors[:, 0]
    big = vec[int(np.argmax(np.abs(vec)))]
    return float(res.values[0]), (vec * abs(big) / big).real


def scf_meanfield(spec: SystemSpec, config: ScfConfig = ScfConfig()) -> MeanFieldSolution:
    """Self-consistent product state for a classical field.

    Each cycle puts every mode in the ground state of its displaced oscillator
    for the current dipole, whose <p_a> equals d_a/w_a - f_a/w_a^3, re-solves
    the electronic problem in that field and mixes the new dipole linearly.
    """
    if spec.field_treatment != "classical":
        raise SpecError("scf_meanfield needs field_treatment = classical")
    check_system(spec)
    disc = discretize(spec)
    n_modes = len(spec.modes)
    dip_ops = [disc.dipole(a) for a in range(n_modes)]
    d = np.zeros(n_modes)
    history: list[float] = []
    cycles = 0
    converged = False
    while cycles < config.max_cycles:
        cycles += 1
        chis, eps_ph, p = [], [], np.zeros(n_modes)
        for a in range(n_modes):
            vals, vecs = np.linalg.eigh(photon_hamiltonian(spec, a, d[a]))
            chi = vecs[:, 0]
            chis.append(chi)
            eps_ph.append(float(vals[0]))
            p[a] = float(np.real(np.vdot(chi, disc.ladders[a][1] @ chi)))
        eps_el, phi = _electronic_ground(spec, p, config)
        d_new = np.array([float(np.dot(np.abs(phi) ** 2, op)) for op in dip_ops])
        change = float(np.max(np.abs(d_new - d))) if n_modes else 0.0
        history.append(change)
        if change <= config.tol:
            converged = True
            break
        if len(history) >= 10 and all(b >= a for a, b in zip(history[-10:], history[-9:])):
            raise ScfError("SCF oscillation: dipole change did not decrease over 10 cycles",
                           best_residual=min(history), iterations=cycles)
        d = (1.0 - config.mixing) * d + config.mixing * d_new
    if not converged:
        raise ScfError("SCF did not converge within max_cycles", best_residual=min(history), iterations=cycles)
    shift = sum(m.omega * d[a] * p[a] for a, m in enumerate(spec.modes))
    return MeanFieldSolution(
        spec=spec, electronic=phi, electronic_energy=eps_el, photon_states=chis, photon_energies=eps_ph,
        displacements=tuple(float(x) for x in p), dipoles=tuple(float(x) for x in d),
        electronic_dipoles=tuple(float(x) for x in d_new), total_energy=eps_el + sum(eps_ph) + shift,
        cycles=cycles, converged=True, history=history,
    )
