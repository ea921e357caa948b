"""Auxiliary Kohn-Sham system: potential inversion, mode forces, virial differences.

The auxiliary system has no electron interaction and uncoupled modes. It is
matched to the full system on the one-particle density and on every mode
displacement <p_a>. Subtracting the virial identities of the two systems
expresses energy differences through v_s - v and f_s - f alone.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .electrons import ElectronBasis, central_gradient, grid_laplacian
from .errors import DensityMismatchError, SpecError
from .model import (
    GridSpec,
    InteractionSpec,
    ModeSpec,
    PotentialSpec,
    SystemSpec,
)
from .operators import discretize

DENSITY_FLOOR = 1e-12


@dataclass
class DensityProfile:
    grid: GridSpec
    values: np.ndarray
    count: int = 1

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if self.values.shape[0] != self.grid.size:
            raise SpecError(f"density has {self.values.shape[0]} values for a grid of {self.grid.size} points")
        if np.any(self.values < 0):
            raise SpecError("negative density")
        total = float(np.sum(self.values) * self.grid.cell_volume)
        if abs(total - self.count) > 1e-10 * max(1, self.count):
            raise SpecError(f"density integrates to {total!r}, expected {self.count}")

    @classmethod
    def from_state(cls, spec: SystemSpec, psi) -> "DensityProfile":
        vec = psi.coefficients if hasattr(psi, "coefficients") else np.asarray(psi)
        basis = ElectronBasis(spec)
        shaped = vec.reshape((basis.dim, -1))
        return cls(spec.grid, basis.density(shaped), spec.electrons.count)

    def to_dict(self) -> dict:
        return {"grid": _grid_dict(self.grid), "count": self.count, "density": self.values.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "DensityProfile":
        return cls(_grid_from(doc["grid"]), np.asarray(doc["density"], dtype=float), int(doc.get("count", 1)))

    @classmethod
    def from_csv(cls, path: str | Path, grid: GridSpec, count: int = 1) -> "DensityProfile":
        """Read (x, rho) rows for a 1-D grid; the x column must match the grid."""
        if grid.ndim != 1:
            raise SpecError("CSV densities are supported on 1-D grids only")
        rows = []
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except ValueError:
                    if rows:
                        raise SpecError(f"malformed density row {row!r}") from None
                    continue  # header
        data = np.asarray(rows)
        axis = grid.axes()[0]
        if data.shape[0] != axis.size or not np.allclose(data[:, 0], axis, rtol=0, atol=1e-9 * max(1.0, grid.spacing[0])):
            raise SpecError("density grid does not match the system grid")
        return cls(grid, data[:, 1], count)


def _grid_dict(grid: GridSpec) -> dict:
    return {"min": list(grid.lower), "max": list(grid.upper), "points": list(grid.points)}


def _grid_from(doc: dict) -> GridSpec:
    as_tuple = lambda v, cast: tuple(cast(x) for x in (v if isinstance(v, (list, tuple)) else [v]))
    return GridSpec(as_tuple(doc["min"], float), as_tuple(doc["max"], float), as_tuple(doc["points"], int))


@dataclass
class InversionResult:
    values: np.ndarray  # v_s on every grid point
    mask: np.ndarray  # True where the density is above the floor
    constant: float  # shift applied so that min(v_s) = 0 on the retained region


def invert_potential_single_electron(rho: DensityProfile, floor: float = DENSITY_FLOOR) -> InversionResult:
    """v_s = (L sqrt(rho)) / (2 sqrt(rho)) + C with the discrete Laplacian L.

    sqrt(rho) is then an exact zero-node eigenvector of -L/2 + v_s on the
    retained region. Points where rho <= floor take the value of the nearest
    retained point; C makes the retained minimum zero.
    """
    if rho.count != 1:
        raise SpecError("potential inversion is defined for one electron only")
    mask = rho.values > floor
    if np.count_nonzero(~mask) > 0.5 * mask.size:
        raise SpecError("density floor region covers more than half of the grid")
    root = np.sqrt(rho.values)
    lap = grid_laplacian(rho.grid) @ root
    v = np.zeros_like(root)
    v[mask] = lap[mask] / (2.0 * root[mask])
    if not np.all(mask):
        shaped = (~mask).reshape(rho.grid.points)
        _, nearest = ndimage.distance_transform_edt(shaped, return_indices=True)
        flat = np.ravel_multi_index(tuple(nearest), rho.grid.points).ravel()
        v = v[flat]
    constant = -float(np.min(v[mask]))
    return InversionResult(v + constant, mask, constant)


def aux_mode_forces(displacements, modes) -> list[float]:
    """f_s = -w^3 p, the drive that puts an uncoupled mode at <p> = p."""
    out = []
    for p, m in zip(displacements, modes):
        w = m.omega if isinstance(m, ModeSpec) else float(m)
        if w <= 0:
            raise SpecError("mode frequency must be positive")
        out.append(-(w**3) * float(p))
    return out


@dataclass
class AuxiliarySystem:
    grid: GridSpec
    potential: np.ndarray
    forces: tuple[float, ...]
    omegas: tuple[float, ...]
    n_max: tuple[int, ...]
    count: int = 1
    exchange: str = "none"
    gauge: str = "min(v_s)=0"

    def spec(self) -> SystemSpec:
        """Non-interacting, uncoupled system with v_s and f_s."""
        from .model import ElectronSpec

        grad = central_gradient(self.potential, self.grid)
        pot = PotentialSpec(kind="tabulated", values=tuple(float(x) for x in self.potential),
                            gradient=tuple(tuple(float(x) for x in row) for row in grad))
        modes = tuple(ModeSpec(omega=w, coupling=(0.0,) * self.grid.ndim, drive=f, n_max=n)
                      for w, f, n in zip(self.omegas, self.forces, self.n_max))
        return SystemSpec(ElectronSpec(self.count, self.grid.ndim, self.exchange), self.grid, pot,
                          InteractionSpec("none"), modes, "quantum")

    def to_dict(self) -> dict:
        return {"grid": _grid_dict(self.grid), "gauge": self.gauge, "count": self.count, "exchange": self.exchange,
                "v_s": self.potential.tolist(), "f_s": list(self.forces), "omega": list(self.omegas),
                "n_max": list(self.n_max)}

    @classmethod
    def from_dict(cls, doc: dict) -> "AuxiliarySystem":
        return cls(_grid_from(doc["grid"]), np.asarray(doc["v_s"], dtype=float), tuple(doc["f_s"]),
                   tuple(doc["omega"]), tuple(int(n) for n in doc["n_max"]), int(doc.get("count", 1)),
                   str(doc.get("exchange", "none")), str(doc.get("gauge", "min(v_s)=0")))

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n", encoding="utf-8")


def build_auxiliary(full: SystemSpec, v_s: np.ndarray, displacements) -> AuxiliarySystem:
    forces = aux_mode_forces(displacements, full.modes)
    return AuxiliarySystem(full.grid, np.asarray(v_s, dtype=float), tuple(forces),
                           tuple(m.omega for m in full.modes), tuple(m.n_max for m in full.modes),
                           full.electrons.count, full.electrons.exchange)


def interior_mask(grid: GridSpec, rho: np.ndarray, floor: float = DENSITY_FLOOR) -> np.ndarray:
    """Points away from the box wall where the density exceeds the floor."""
    inner = np.zeros(grid.points, dtype=bool)
    inner[tuple(slice(1, -1) for _ in grid.points)] = True
    return inner.ravel() & (np.asarray(rho) > floor)


def density_l2_error(grid: GridSpec, rho_a: np.ndarray, rho_b: np.ndarray, floor: float = DENSITY_FLOOR) -> float:
    mask = interior_mask(grid, rho_a, floor)
    diff = (np.asarray(rho_a) - np.asarray(rho_b))[mask]
    return float(np.sqrt(np.sum(diff**2) * grid.cell_volume))


def ks_virial_identities(full_spec: SystemSpec, full_state, aux_spec: SystemSpec, aux_state,
                         tol: float = 1e-5, density_tol: float = 1e-6, displacement_tol: float = 1e-8,
                         recovery_tol: float = 1e-6) -> dict:
    """Both subtraction identities between the full and the auxiliary system.

    (i)  2(T_Psi - T_Phi) + W_Psi - Hc_Psi - 2 Hd_Psi = -int r . grad(v_s - v) rho
    (ii) sum_a (<w^2 p^2 - q^2>_Psi - <w^2 p^2 - q^2>_Phi) + Hc_Psi = sum_a (f_s,a - f_a) p_a / w_a

    W_Psi is the interaction virial kernel expectation (equal to <W> for
    Coulomb). (ii) is also solved for Hc_Psi and compared with the direct value.
    """
    from .virial import energy_breakdown

    rho_full = DensityProfile.from_state(full_spec, full_state).values
    rho_aux = DensityProfile.from_state(aux_spec, aux_state).values
    l2 = density_l2_error(full_spec.grid, rho_full, rho_aux)
    bf = energy_breakdown(full_spec, full_state)
    ba = energy_breakdown(aux_spec, aux_state)
    p_gap = max((abs(a - b) for a, b in zip(bf.p, ba.p)), default=0.0)
    if l2 > density_tol:
        raise DensityMismatchError(f"density L2 interior error {l2:.3e} exceeds {density_tol:.1e}")
    if p_gap > displacement_tol:
        raise DensityMismatchError(f"mode displacements differ by {p_gap:.3e} (gate {displacement_tol:.1e})")

    pts = full_spec.grid.coordinates()
    v_full = discretize(full_spec).potential_values
    v_aux = discretize(aux_spec).potential_values
    grad = central_gradient(v_aux - v_full, full_spec.grid)
    integral = float(np.sum(np.sum(pts * grad, axis=1) * rho_full) * full_spec.grid.cell_volume)
    # the two potential integrals separately, for the scale
    parts = [abs(float(np.sum(np.sum(pts * central_gradient(v, full_spec.grid), axis=1) * rho_full)
                       * full_spec.grid.cell_volume)) for v in (v_aux, v_full)]

    lhs_terms = {"2T_full": 2.0 * bf.kinetic, "-2T_aux": -2.0 * ba.kinetic, "W": bf.interaction_virial,
                 "-Hc": -bf.dipole_coupling, "-2Hd": -2.0 * bf.self_energy}
    lhs1 = float(sum(lhs_terms.values()))
    rhs1 = -integral
    scale1 = float(sum(abs(v) for v in lhs_terms.values())) + sum(parts)

    n_modes = len(full_spec.modes)
    virial_full = [bf.w2p2[a] - bf.q2[a] for a in range(n_modes)]
    virial_aux = [ba.w2p2[a] - ba.q2[a] for a in range(n_modes)]
    delta = float(sum(virial_full) - sum(virial_aux))
    fs = [m.drive for m in aux_spec.modes]
    rhs_terms = [fs[a] * bf.p[a] / m.omega for a, m in enumerate(full_spec.modes)]
    rhs_terms += [-m.drive * bf.p[a] / m.omega for a, m in enumerate(full_spec.modes)]
    rhs2 = float(sum(rhs_terms))
    lhs2 = delta + bf.dipole_coupling
    scale2 = float(sum(bf.w2p2) + sum(bf.q2) + sum(ba.w2p2) + sum(ba.q2)) + abs(bf.dipole_coupling) \
        + float(sum(abs(x) for x in rhs_terms))
    recovered = rhs2 - delta

    def rel(x, s):
        return abs(x) / max(s, 1e-12)

    ident1 = {"lhs": lhs1, "rhs": rhs1, "residual": lhs1 - rhs1, "scale": scale1,
              "relative": rel(lhs1 - rhs1, scale1), "terms": lhs_terms}
    ident1["pass"] = bool(ident1["relative"] <= tol)
    ident2 = {"lhs": lhs2, "rhs": rhs2, "residual": lhs2 - rhs2, "scale": scale2,
              "relative": rel(lhs2 - rhs2, scale2)}
    ident2["pass"] = bool(ident2["relative"] <= tol)
    recovery = {"recovered_hc": recovered, "direct_hc": bf.dipole_coupling,
                "difference": recovered - bf.dipole_coupling, "scale": scale2,
                "relative": rel(recovered - bf.dipole_coupling, scale2)}
    recovery["pass"] = bool(recovery["relative"] <= recovery_tol)
    return {
        "density_l2_error": l2,
        "displacement_gap": p_gap,
        "identity_i": ident1,
        "identity_ii": ident2,
        "coupling_recovery": recovery,
        "pass": ident1["pass"] and ident2["pass"] and recovery["pass"],
    }
