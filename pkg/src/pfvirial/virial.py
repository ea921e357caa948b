"""Energy expectations and the virial / force-balance identities as signed residuals.

Every identity is written as ``residual = sum(terms)`` that vanishes for an
exact stationary state. The scale is the sum of |terms| (floored), except for
the force balance, see below. Where a commutator form exists, the hypervirial
oracle <[H, A]> is evaluated alongside; it is zero for any discrete eigenstate
up to the eigenresidual, while the closed-form residual also carries the
finite-difference and Fock-truncation errors of the individual terms.

Sign conventions follow the commutator algebra of the Hamiltonian as built in
``operators``. Where a printed form with different signs is in circulation it
is evaluated too and stored as ``paper_form_residual``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import SpecError
from .model import FreeSpaceModeSetSpec, SystemSpec, freespace_mode_arrays
from .operators import (
    MeanField,
    TermId,
    build_term,
    build_virial_operator,
    commutator_expectation,
    discretize,
    dipole_operator,
    mode_operator,
    real_expectation,
    velocity_coupling_operator,
)
from .state import QuantumState

SCALE_FLOOR = 1e-12

DEFAULT_TOLERANCES = {
    "electronic": 1e-4,
    "field_mode": 1e-8,
    "force_balance": 1e-8,
    "mixed": 1e-6,
    "ext_force_sum": 1e-8,
    "combined": 1e-4,
    "positivity": 1e-10,
    "eigen_gate": 1e-8,
}


# --------------------------------------------------------------------------
# expectations


@dataclass
class EnergyBreakdown:
    kinetic: float
    external: float
    interaction: float
    field_energy: float
    dipole_coupling: float
    self_energy: float
    drive: float
    total: float
    q2: list[float]
    w2p2: list[float]
    p: list[float]
    p_norm: list[float]  # ||p_a psi||
    dipoles: list[float]  # <lam_a . sum_i r_i>
    dipole_norm: list[float]  # ||(lam_a . sum_i r_i) psi||
    dipole_squares: list[float]
    mixed: list[float]  # M_a = i/w_a sum_j <(lam_a . grad_j) q_a>
    gradient_squares: list[float]  # K_a = sum_j <(-i lam_a . grad_j)^2>
    r_grad_v: float  # sum_i <r_i . grad v(r_i)>
    interaction_virial: float
    interaction_kernel: str
    eigen_residual: float
    is_eigenstate: bool
    field_treatment: str = "quantum"
    mean_field: MeanField | None = None

    @property
    def terms(self) -> dict[str, float]:
        return {
            "kinetic": self.kinetic, "external_potential": self.external, "interaction": self.interaction,
            "field_energy": self.field_energy, "dipole_coupling": self.dipole_coupling,
            "dipole_self_energy": self.self_energy, "external_drive": self.drive,
        }

    def to_dict(self) -> dict:
        out = dict(self.terms)
        out.update(
            total=self.total, q2=self.q2, w2p2=self.w2p2, p=self.p, dipoles=self.dipoles, mixed=self.mixed,
            r_grad_v=self.r_grad_v, interaction_virial=self.interaction_virial,
            interaction_kernel=self.interaction_kernel, eigen_residual=self.eigen_residual,
            is_eigenstate=self.is_eigenstate, field_treatment=self.field_treatment,
        )
        return out


def _unpack(spec: SystemSpec, psi, mean_field: MeanField | None):
    """Accept a QuantumState, a bare vector or a MeanFieldSolution."""
    if hasattr(psi, "product_state") and hasattr(psi, "mean_field"):
        return psi.product_state(), psi.mean_field
    if not isinstance(psi, QuantumState):
        psi = QuantumState.normalized(psi)
    if spec.field_treatment == "classical" and mean_field is None:
        raise SpecError("classical-field states need their mean-field parameters")
    return psi, mean_field


def _quantum(spec: SystemSpec) -> SystemSpec:
    return spec if spec.field_treatment == "quantum" else spec.replace(field_treatment="quantum")


def energy_breakdown(spec: SystemSpec, psi, mean_field: MeanField | None = None,
                     gate: float = DEFAULT_TOLERANCES["eigen_gate"]) -> EnergyBreakdown:
    """All expectation values entering the identities.

    The seven Hamiltonian terms are always those of the quantum Hamiltonian;
    for a classical-field product state this makes <H_c> = -sum w <D><p>.
    ``is_eigenstate`` records whether the eigenresidual (with respect to the
    Hamiltonian the state solves) is below ``gate``.
    """
    state, mf = _unpack(spec, psi, mean_field)
    qspec = _quantum(spec)
    disc = discretize(qspec)
    if state.dim != disc.dim:
        raise ValueError(f"dimension mismatch: system {disc.dim}, state {state.dim}")
    vec = state.coefficients

    vals = {t: real_expectation(build_term(qspec, t), vec) for t in
            (TermId.KINETIC, TermId.EXTERNAL_POTENTIAL, TermId.INTERACTION, TermId.FIELD_ENERGY,
             TermId.DIPOLE_COUPLING, TermId.DIPOLE_SELF_ENERGY, TermId.EXTERNAL_DRIVE)}
    total = real_expectation(build_term(qspec, TermId.TOTAL), vec)

    q2, w2p2, p, p_norm, dip, dip_norm, dip_sq, mixed, grad_sq = ([] for _ in range(9))
    for a, mode in enumerate(spec.modes):
        q2.append(real_expectation(mode_operator(qspec, a, "q2"), vec))
        w2p2.append(real_expectation(mode_operator(qspec, a, "w2p2"), vec))
        pop = mode_operator(qspec, a, "p")
        p.append(real_expectation(pop, vec))
        p_norm.append(float(np.linalg.norm(pop.apply(vec))))
        dop = dipole_operator(qspec, a)
        dvec = dop.apply(vec)
        dip.append(float(np.vdot(vec, dvec).real))
        dip_norm.append(float(np.linalg.norm(dvec)))
        dip_sq.append(float(np.vdot(dvec, dvec).real))
        mixed.append(real_expectation(velocity_coupling_operator(qspec, a), vec))
        g = disc.coupling_gradient(a)
        grad_sq.append(real_expectation(disc.electronic(-(g @ g)), vec))

    r_grad_v = real_expectation(disc.electronic(disc.r_grad_v), vec)
    kind = spec.interaction.kind
    if kind in ("none", "coulomb3d"):
        w_vir, label = vals[TermId.INTERACTION], "W" if kind == "coulomb3d" else "none"
    else:
        w_vir, label = real_expectation(disc.electronic(disc.interaction_virial), vec), "-s*w'(s)"

    if spec.field_treatment == "classical":
        from .solver import eigenstate_residual

        eps = eigenstate_residual(spec, vec, mf)
    else:
        h = build_term(qspec, TermId.TOTAL)
        hv = h.apply(vec)
        eps = float(np.linalg.norm(hv - np.vdot(vec, hv).real * vec))

    return EnergyBreakdown(
        kinetic=vals[TermId.KINETIC], external=vals[TermId.EXTERNAL_POTENTIAL],
        interaction=vals[TermId.INTERACTION], field_energy=vals[TermId.FIELD_ENERGY],
        dipole_coupling=vals[TermId.DIPOLE_COUPLING], self_energy=vals[TermId.DIPOLE_SELF_ENERGY],
        drive=vals[TermId.EXTERNAL_DRIVE], total=total, q2=q2, w2p2=w2p2, p=p, p_norm=p_norm, dipoles=dip,
        dipole_norm=dip_norm, dipole_squares=dip_sq, mixed=mixed, gradient_squares=grad_sq, r_grad_v=r_grad_v,
        interaction_virial=w_vir, interaction_kernel=label, eigen_residual=eps, is_eigenstate=eps <= gate,
        field_treatment=spec.field_treatment, mean_field=mf,
    )


# --------------------------------------------------------------------------
# residual entries


@dataclass
class ResidualEntry:
    identity: str
    residual: float
    scale: float
    tolerance: float
    terms: dict[str, float] = field(default_factory=dict)
    oracle: float | None = None
    oracle_bound: float | None = None
    paper_form_residual: float | None = None
    notes: dict = field(default_factory=dict)

    @property
    def relative(self) -> float:
        return abs(self.residual) / max(self.scale, SCALE_FLOOR)

    @property
    def passed(self) -> bool:
        return bool(self.relative <= self.tolerance)

    @property
    def oracle_passed(self) -> bool | None:
        if self.oracle is None or self.oracle_bound is None:
            return None
        return bool(self.oracle <= self.oracle_bound)

    def to_dict(self) -> dict:
        return {
            "identity": self.identity,
            "residual": self.residual,
            "scale": self.scale,
            "relative": self.relative,
            "oracle": self.oracle,
            "paper_form_residual": self.paper_form_residual,
            "pass": self.passed,
            "tolerance": self.tolerance,
            "oracle_bound": self.oracle_bound,
            "oracle_pass": self.oracle_passed,
            "terms": dict(self.terms),
            "notes": dict(self.notes),
        }


def _entry(identity: str, terms: dict[str, float], tol: float, **kw) -> ResidualEntry:
    return ResidualEntry(identity=identity, residual=float(sum(terms.values())),
                         scale=float(sum(abs(v) for v in terms.values())), tolerance=tol, terms=terms, **kw)


def _hamiltonian_for(spec: SystemSpec, b: EnergyBreakdown):
    return build_term(spec, TermId.TOTAL, b.mean_field if spec.field_treatment == "classical" else None)


def _oracle(spec: SystemSpec, b: EnergyBreakdown, vec: np.ndarray, ops, weights) -> tuple[float, float]:
    """|sum_k c_k <[H, A_k]>| and the bound 10 eps sum_k |c_k| ||A_k psi||."""
    h = _hamiltonian_for(spec, b)
    hv_norm = float(np.linalg.norm(h.apply(vec)))
    eps = max(b.eigen_residual, 1e-16 * hv_norm)
    value, bound = 0.0 + 0.0j, 0.0
    for op, c in zip(ops, weights):
        value += c * commutator_expectation(h, op, vec)
        bound += 10.0 * eps * abs(c) * float(np.linalg.norm(op.apply(vec)))
    return float(abs(value)), bound


def _vector(psi) -> np.ndarray:
    if hasattr(psi, "product_state"):
        return psi.product_state().coefficients
    return psi.coefficients if isinstance(psi, QuantumState) else np.asarray(psi, dtype=complex)


def electronic_virial_residual(spec: SystemSpec, psi, breakdown: EnergyBreakdown,
                               tol: float = DEFAULT_TOLERANCES["electronic"]) -> ResidualEntry:
    """2<T> + <W_vir> - <H_c> - 2<H_d> - sum_i <r_i . grad v>."""
    b = breakdown
    terms = {"2T": 2 * b.kinetic, "W_vir": b.interaction_virial, "-Hc": -b.dipole_coupling,
             "-2Hd": -2 * b.self_energy, "-r.grad_v": -b.r_grad_v}
    vec = _vector(psi)
    oracle, bound = _oracle(spec, b, vec, [build_virial_operator(spec, "electronic")], [1.0])
    return _entry("electronic_virial", terms, tol, oracle=oracle, oracle_bound=bound,
                  notes={"interaction_kernel": b.interaction_kernel})


def field_mode_virial_residual(spec: SystemSpec, psi, breakdown: EnergyBreakdown,
                               tol: float = DEFAULT_TOLERANCES["field_mode"]) -> ResidualEntry:
    """sum_a <w_a^2 p_a^2 - q_a^2> + <H_c> + <H_ext>.

    The printed variant, <H_ext> - [sum_a w_a^2 <p_a^2 - q_a^2> - <H_c>], is
    stored as ``paper_form_residual``.
    """
    b = breakdown
    terms = {"w2p2": float(sum(b.w2p2)), "-q2": -float(sum(b.q2)), "Hc": b.dipole_coupling, "Hext": b.drive}
    printed_lhs = sum(b.w2p2[a] - m.omega**2 * b.q2[a] for a, m in enumerate(spec.modes)) - b.dipole_coupling
    vec = _vector(psi)
    oracle, bound = (None, None)
    if spec.modes:
        oracle, bound = _oracle(spec, b, vec, [build_virial_operator(spec, "mode")], [1.0])
    return _entry("field_mode_virial", terms, tol, oracle=oracle, oracle_bound=bound,
                  paper_form_residual=float(b.drive - printed_lhs))


def force_balance_residual(spec: SystemSpec, psi, breakdown: EnergyBreakdown, alpha: int,
                           tol: float = DEFAULT_TOLERANCES["force_balance"]) -> ResidualEntry:
    """w^2 <p_a> - w sum_j <lam_a . r_j> + f_a / w.

    The scale uses norms, w^2 ||p psi|| + w ||D psi|| + |f/w|, rather than the
    absolute expectation values: for inversion-symmetric states both
    expectations vanish and a scale built from them would turn roundoff into
    an O(1) relative residual. The sum-of-|terms| scale is kept in ``notes``.
    """
    if not 0 <= alpha < len(spec.modes):
        raise SpecError(f"unknown mode index {alpha}")
    b = breakdown
    m = spec.modes[alpha]
    terms = {"w2p": m.omega**2 * b.p[alpha], "-w*dipole": -m.omega * b.dipoles[alpha], "f/w": m.drive / m.omega}
    entry = _entry(f"force_balance[{alpha}]", terms, tol)
    entry.notes["expectation_scale"] = entry.scale
    entry.scale = m.omega**2 * b.p_norm[alpha] + m.omega * b.dipole_norm[alpha] + abs(m.drive / m.omega)
    vec = _vector(psi)
    entry.oracle, entry.oracle_bound = _oracle(spec, b, vec, [mode_operator(spec, alpha, "q")], [1.0])
    return entry


def _mixed_self_term(spec: SystemSpec, b: EnergyBreakdown) -> tuple[float, str]:
    if spec.field_treatment == "classical" and b.mean_field is not None:
        # commutator of the substituted coupling: sum_a d_a <D_a> instead of <D_a^2>
        return float(sum(d * e for d, e in zip(b.mean_field.dipoles, b.dipoles))), "mean-field sum d_a <D_a>"
    return 2 * b.self_energy, "2Hd"


def mixed_virial_residual(spec: SystemSpec, psi, breakdown: EnergyBreakdown,
                          tol: float = DEFAULT_TOLERANCES["mixed"]) -> ResidualEntry:
    """sum_a M_a + <H_c> + 2<H_d> - sum_a (f_a / w_a^2) <lam_a . sum r>."""
    b = breakdown
    self_term, label = _mixed_self_term(spec, b)
    drive = float(sum(m.drive / m.omega**2 * b.dipoles[a] for a, m in enumerate(spec.modes)))
    terms = {"M": float(sum(b.mixed)), "Hc": b.dipole_coupling, "2Hd": self_term, "-drive": -drive}
    vec = _vector(psi)
    ops = [build_virial_operator(spec, "mixed", a) for a in range(len(spec.modes))]
    weights = [1.0 / (1j * m.omega) for m in spec.modes]
    oracle, bound = _oracle(spec, b, vec, ops, weights) if ops else (None, None)
    return _entry("mixed_virial", terms, tol, oracle=oracle, oracle_bound=bound,
                  paper_form_residual=float(sum(terms.values()) + 2 * drive), notes={"self_term": label})


def ext_force_sum_residual(spec: SystemSpec, psi, breakdown: EnergyBreakdown,
                           tol: float = DEFAULT_TOLERANCES["ext_force_sum"]) -> ResidualEntry:
    """sum_a (f_a/w_a^2) <lam_a . sum r> - (<H_ext> + sum_a f_a^2 / w_a^4), each side evaluated on its own."""
    b = breakdown
    lhs = float(sum(m.drive / m.omega**2 * b.dipoles[a] for a, m in enumerate(spec.modes)))
    f4 = float(sum(m.drive**2 / m.omega**4 for m in spec.modes))
    entry = _entry("ext_force_sum", {"lhs": lhs, "-Hext": -b.drive, "-f2/w4": -f4}, tol)
    entry.notes.update(lhs=lhs, rhs=b.drive + f4)
    return entry


def combined_virial_residual(spec: SystemSpec, psi, breakdown: EnergyBreakdown,
                             tol: float = DEFAULT_TOLERANCES["combined"]) -> ResidualEntry:
    """Sum of the electronic and field-mode residuals, in which H_c cancels."""
    b = breakdown
    terms = {"2T": 2 * b.kinetic, "W_vir": b.interaction_virial, "-2Hd": -2 * b.self_energy,
             "-r.grad_v": -b.r_grad_v, "w2p2": float(sum(b.w2p2)), "-q2": -float(sum(b.q2)), "Hext": b.drive}
    entry = _entry("combined_virial", terms, tol)
    elec = 2 * b.kinetic + b.interaction_virial - b.dipole_coupling - 2 * b.self_energy - b.r_grad_v
    mode = float(sum(b.w2p2)) - float(sum(b.q2)) + b.dipole_coupling + b.drive
    entry.notes["consistency"] = entry.residual - (elec + mode)
    return entry


# --------------------------------------------------------------------------
# positivity and the estimate


@dataclass
class PositivityReport:
    term_checks: dict[str, dict]
    squares: list[dict]  # one per (mode, particle)
    estimate: dict
    tolerance: float

    @property
    def passed(self) -> bool:
        return (all(c["pass"] for c in self.term_checks.values()) and all(s["pass"] for s in self.squares)
                and self.estimate["pass"])

    def to_dict(self) -> dict:
        return {"pass": self.passed, "tolerance": self.tolerance, "terms": self.term_checks,
                "squares": self.squares, "estimate": self.estimate}


def positivity_estimate_check(spec: SystemSpec, psi, breakdown: EnergyBreakdown,
                              tol: float = DEFAULT_TOLERANCES["positivity"]) -> PositivityReport:
    """Sign checks of the positive operators and of the mode/gradient estimate.

    Per mode a and particle j the square <(-i w^-1 lam . grad_j + q)^2> is
    reported; in an exchange sector all particles give the same value, so it
    is obtained from the particle sum divided by N.
    """
    b = breakdown
    n = spec.electrons.count
    scale = float(sum(abs(v) for v in b.terms.values()))
    checks = {}
    for name, val, t in (("kinetic", b.kinetic, 1e-12), ("interaction", b.interaction, 1e-12),
                         ("dipole_self_energy", b.self_energy, 1e-12), ("field_energy", b.field_energy, 1e-12),
                         ("field_coupling_self", b.field_energy + b.dipole_coupling + b.self_energy, tol)):
        checks[name] = {"value": val, "bound": -t * scale, "pass": bool(val >= -t * scale)}
    squares = []
    lhs = rhs = 0.0
    for a, m in enumerate(spec.modes):
        total = b.gradient_squares[a] / m.omega**2 + n * b.q2[a] - 2.0 * b.mixed[a]
        sq_scale = b.gradient_squares[a] / m.omega**2 + n * b.q2[a] + 2.0 * abs(b.mixed[a])
        for j in range(n):
            value = total / n
            squares.append({"mode": a, "particle": j, "value": value,
                            "pass": bool(value >= -tol * max(sq_scale / n, SCALE_FLOOR))})
        lhs += 0.5 * b.gradient_squares[a] / m.omega**2 + 0.5 * n * b.q2[a]
        rhs += b.mixed[a]
    est_scale = max(abs(lhs) + abs(rhs), SCALE_FLOOR)
    estimate = {"lhs": lhs, "rhs": rhs, "gap": lhs - rhs, "pass": bool(lhs >= rhs - tol * est_scale)}
    return PositivityReport(checks, squares, estimate, tol)


# --------------------------------------------------------------------------
# mass renormalization and the isotropic inequality


@dataclass
class MassRenormResult:
    mu_continuum: float
    mu_discrete: float
    cutoff: float
    box_length: float
    c: float
    mode_count: int

    @property
    def relative_deviation(self) -> float:
        return (self.mu_discrete - self.mu_continuum) / self.mu_continuum

    def to_dict(self) -> dict:
        return {"mu_continuum": self.mu_continuum, "mu_discrete": self.mu_discrete,
                "ratio": self.mu_discrete / self.mu_continuum, "relative_deviation": self.relative_deviation,
                "cutoff": self.cutoff, "box_length": self.box_length, "c": self.c, "mode_count": self.mode_count}


def mass_renorm(spec: FreeSpaceModeSetSpec) -> MassRenormResult:
    """mu = 4 Lambda / (3 pi c^2) against (1/3) sum over modes of lam^2 / w^2.

    The 1/3 counts one full contribution per three mutually orthogonal
    polarizations, which is what turns the shell density into 8 pi k^2 / 3.
    """
    _, omega, pol = freespace_mode_arrays(spec)
    lam2 = np.sum(pol**2, axis=1)
    mu_d = float(np.sum(lam2 / omega**2)) / 3.0
    mu_c = 4.0 * spec.cutoff / (3.0 * math.pi * spec.c**2)
    return MassRenormResult(mu_c, mu_d, spec.cutoff, spec.box_length, spec.c, int(omega.size))


def coupling_tensor(spec: SystemSpec) -> np.ndarray:
    """sum_a lam_a lam_a^T / w_a^2."""
    d = spec.electrons.dims
    out = np.zeros((d, d))
    for m in spec.modes:
        lam = m.coupling_vector
        out += np.outer(lam, lam) / m.omega**2
    return out


def is_isotropic(spec: SystemSpec, rtol: float = 1e-10) -> bool:
    if spec.electrons.dims != 3 or not spec.modes:
        return False
    t = coupling_tensor(spec)
    iso = np.trace(t) / 3.0
    return bool(np.max(np.abs(t - iso * np.eye(3))) <= rtol * max(abs(iso), SCALE_FLOOR))


def isotropic_virial_inequality(spec: SystemSpec, psi, breakdown: EnergyBreakdown, mu: float | None = None,
                                tol: float = DEFAULT_TOLERANCES["positivity"]) -> dict:
    """mu<T> + (N/2) sum<q^2> + <H_c> + 2<H_d> + s (<H_ext> + sum f^2/w^4) for s = +1 and -1.

    The sign s = -1 follows from the validated mixed identity; non-negativity
    is asserted for it. With ``mu=None`` the kinetic term is replaced by the
    direct sum (1/2) sum_a w_a^-2 K_a, which is what mu<T> stands for when the
    mode set is isotropic. Non-isotropic inputs are flagged.
    """
    b = breakdown
    n = spec.electrons.count
    if mu is None:
        kin = float(sum(0.5 * b.gradient_squares[a] / m.omega**2 for a, m in enumerate(spec.modes)))
        kin_label = "direct"
    else:
        kin = mu * b.kinetic
        kin_label = "mu*T"
    self_term, _ = _mixed_self_term(spec, b)
    base = kin + 0.5 * n * float(sum(b.q2)) + b.dipole_coupling + self_term
    drive = b.drive + float(sum(m.drive**2 / m.omega**4 for m in spec.modes))
    plus, minus = base + drive, base - drive
    scale = max(abs(kin) + 0.5 * n * float(sum(b.q2)) + abs(b.dipole_coupling) + abs(self_term) + abs(drive),
                SCALE_FLOOR)
    return {
        "value_validated_sign": minus,
        "value_printed_sign": plus,
        "sign_difference": plus - minus,
        "kinetic_term": kin_label,
        "mu": mu,
        "isotropic": is_isotropic(spec),
        "scale": scale,
        "pass": bool(minus >= -tol * scale),
    }


# --------------------------------------------------------------------------
# the full report


@dataclass
class VirialReport:
    entries: list[ResidualEntry]
    breakdown: EnergyBreakdown
    positivity: PositivityReport
    inequality: dict | None = None

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries) and self.positivity.passed

    def entry(self, identity: str) -> ResidualEntry:
        for e in self.entries:
            if e.identity == identity:
                return e
        raise KeyError(identity)

    def to_dict(self) -> dict:
        return {
            "pass": self.passed,
            "identities": [e.to_dict() for e in self.entries],
            "energies": self.breakdown.to_dict(),
            "positivity": self.positivity.to_dict(),
            "inequality": self.inequality,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["identity", "residual", "scale", "relative", "tolerance", "oracle", "oracle_bound",
                         "paper_form_residual", "pass"])
        for e in self.entries:
            writer.writerow([e.identity, f"{e.residual:.17g}", f"{e.scale:.17g}", f"{e.relative:.17g}",
                             f"{e.tolerance:.17g}", "" if e.oracle is None else f"{e.oracle:.17g}",
                             "" if e.oracle_bound is None else f"{e.oracle_bound:.17g}",
                             "" if e.paper_form_residual is None else f"{e.paper_form_residual:.17g}",
                             str(e.passed).lower()])
        return buf.getvalue()


def virial_report(spec: SystemSpec, psi, mean_field: MeanField | None = None,
                  tolerances: dict[str, float] | None = None, mu: float | None = None) -> VirialReport:
    tols = dict(DEFAULT_TOLERANCES)
    if tolerances:
        unknown = set(tolerances) - set(tols)
        if unknown:
            raise SpecError(f"unknown tolerance names: {', '.join(sorted(unknown))}")
        tols.update(tolerances)
    state, mf = _unpack(spec, psi, mean_field)
    b = energy_breakdown(spec, state, mf, gate=tols["eigen_gate"])
    entries = [electronic_virial_residual(spec, state, b, tols["electronic"])]
    if spec.modes:
        entries.append(field_mode_virial_residual(spec, state, b, tols["field_mode"]))
        entries.extend(force_balance_residual(spec, state, b, a, tols["force_balance"])
                       for a in range(len(spec.modes)))
        entries.append(mixed_virial_residual(spec, state, b, tols["mixed"]))
        entries.append(ext_force_sum_residual(spec, state, b, tols["ext_force_sum"]))
    entries.append(combined_virial_residual(spec, state, b, tols["combined"]))
    pos = positivity_estimate_check(spec, state, b, tols["positivity"])
    ineq = isotropic_virial_inequality(spec, state, b, mu, tols["positivity"]) if spec.modes else None
    return VirialReport(entries, b, pos, ineq)
