"""System description: electrons on a grid coupled to a finite set of field modes.

Everything here is an immutable value object. The JSON layout is strict:
unknown keys are rejected so a typo in a config can never silently fall
back to a default.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionError, SpecError

DEFAULT_DIMENSION_CAP = 5_000_000
SPEED_OF_LIGHT = 137.036

EXCHANGE_KINDS = ("none", "symmetric", "antisymmetric")
POTENTIAL_KINDS = ("harmonic", "softcoulomb_well", "polynomial", "tabulated")
INTERACTION_KINDS = ("none", "coulomb3d", "softcoulomb", "tabulated")
FIELD_TREATMENTS = ("quantum", "classical")

# Mean value of 1/|r| over a cube of unit edge centred at the origin; used for
# the coincident-pair entry of the 3D Coulomb interaction on a grid.
CUBE_INVERSE_DISTANCE = 2.3800772


@dataclass(frozen=True)
class ElectronSpec:
    count: int = 1
    dims: int = 1
    exchange: str = "none"


@dataclass(frozen=True)
class GridSpec:
    """Uniform hard-wall grid, one (lower, upper, points) triple per axis."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    points: tuple[int, ...]

    @property
    def ndim(self) -> int:
        return len(self.points)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((u - l) / (n - 1) for l, u, n in zip(self.lower, self.upper, self.points))

    @property
    def size(self) -> int:
        return int(np.prod(self.points))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(l, u, n) for l, u, n in zip(self.lower, self.upper, self.points)]

    def coordinates(self) -> np.ndarray:
        """Grid points as an array of shape (size, ndim), C order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass(frozen=True)
class PotentialSpec:
    """External one-body potential v(r).

    ``polynomial`` means sum_n c_n x^n in one dimension and sum_n c_n |r|^n
    otherwise. ``tabulated`` carries values and gradient on the grid points
    (C order); the gradient has one column per dimension.
    """

    kind: str = "harmonic"
    k: float = 1.0
    charge: float = 1.0
    softening: float = 1.0
    coefficients: tuple[float, ...] = ()
    values: tuple[float, ...] = ()
    gradient: tuple[tuple[float, ...], ...] = ()

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        r2 = np.sum(points**2, axis=1)
        if self.kind == "harmonic":
            return 0.5 * self.k * r2
        if self.kind == "softcoulomb_well":
            return -self.charge / np.sqrt(r2 + self.softening**2)
        if self.kind == "polynomial":
            base = points[:, 0] if points.shape[1] == 1 else np.sqrt(r2)
            return np.polynomial.polynomial.polyval(base, np.asarray(self.coefficients, dtype=float))
        if self.kind == "tabulated":
            values = np.asarray(self.values, dtype=float)
            if values.shape[0] != points.shape[0]:
                raise SpecError("tabulated potential is only defined on its own grid")
            return values
        raise SpecError(f"unknown potential kind {self.kind!r}")

    def gradient_at(self, points: np.ndarray) -> np.ndarray:
        r2 = np.sum(points**2, axis=1)
        if self.kind == "harmonic":
            return self.k * points
        if self.kind == "softcoulomb_well":
            return (self.charge / (r2 + self.softening**2) ** 1.5)[:, None] * points
        if self.kind == "polynomial":
            coeffs = np.asarray(self.coefficients, dtype=float)
            deriv = np.polynomial.polynomial.polyder(coeffs) if coeffs.size > 1 else np.zeros(1)
            if points.shape[1] == 1:
                return np.polynomial.polynomial.polyval(points[:, 0], deriv)[:, None]
            r = np.sqrt(r2)
            safe = np.where(r > 0, r, 1.0)
            radial = np.polynomial.polynomial.polyval(r, deriv)
            return np.where(r > 0, radial / safe, 0.0)[:, None] * points
        if self.kind == "tabulated":
            grad = np.asarray(self.gradient, dtype=float)
            if grad.shape[0] != points.shape[0]:
                raise SpecError("tabulated potential is only defined on its own grid")
            return grad.reshape(points.shape[0], -1)
        raise SpecError(f"unknown potential kind {self.kind!r}")

    def r_dot_gradient(self, points: np.ndarray) -> np.ndarray:
        return np.sum(points * self.gradient_at(points), axis=1)

    def is_homogeneous_quadratic(self) -> bool:
        return self.kind == "harmonic"


@dataclass(frozen=True)
class InteractionSpec:
    """Pair interaction w(s) as a function of the pair distance s."""

    kind: str = "none"
    softening: float = 1.0
    distances: tuple[float, ...] = ()
    values: tuple[float, ...] = ()
    derivative: tuple[float, ...] = ()

    def evaluate(self, s: np.ndarray, coincident: float = 0.0) -> np.ndarray:
        """w(s). ``coincident`` replaces s == 0 for the singular Coulomb case."""
        s = np.asarray(s, dtype=float)
        if self.kind == "none":
            return np.zeros_like(s)
        if self.kind == "coulomb3d":
            safe = np.where(s > 0, s, 1.0)
            return np.where(s > 0, 1.0 / safe, coincident)
        if self.kind == "softcoulomb":
            return 1.0 / np.sqrt(s**2 + self.softening**2)
        if self.kind == "tabulated":
            return np.interp(s, self.distances, self.values)
        raise SpecError(f"unknown interaction kind {self.kind!r}")

    def virial_kernel(self, s: np.ndarray, coincident: float = 0.0) -> np.ndarray:
        """-s w'(s), the pair contribution to the electronic virial."""
        s = np.asarray(s, dtype=float)
        if self.kind == "none":
            return np.zeros_like(s)
        if self.kind == "coulomb3d":
            return self.evaluate(s, coincident)
        if self.kind == "softcoulomb":
            return s**2 / (s**2 + self.softening**2) ** 1.5
        if self.kind == "tabulated":
            return -s * np.interp(s, self.distances, self.derivative)
        raise SpecError(f"unknown interaction kind {self.kind!r}")


@dataclass(frozen=True)
class ModeSpec:
    omega: float
    coupling: tuple[float, ...]
    drive: float = 0.0
    n_max: int = 20

    @property
    def coupling_vector(self) -> np.ndarray:
        return np.asarray(self.coupling, dtype=float)


@dataclass(frozen=True)
class SystemSpec:
    electrons: ElectronSpec
    grid: GridSpec
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    interaction: InteractionSpec = field(default_factory=InteractionSpec)
    modes: tuple[ModeSpec, ...] = ()
    field_treatment: str = "quantum"

    def replace(self, **changes) -> "SystemSpec":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True)
class FreeSpaceModeSetSpec:
    """Cubic box of edge ``box_length`` with a k-space cutoff ``cutoff``."""

    box_length: float
    cutoff: float
    c: float = SPEED_OF_LIGHT

    @property
    def omega0(self) -> float:
        return 2.0 * math.pi * self.c / self.box_length

    @property
    def coupling_strength(self) -> float:
        return math.sqrt(4.0 * math.pi / self.box_length**3)

    @property
    def k_spacing(self) -> float:
        return self.omega0 / self.c


# --------------------------------------------------------------------------
# validation and bookkeeping


def validate_system(spec: SystemSpec, cap: int = DEFAULT_DIMENSION_CAP) -> list[str]:
    """Return every violated invariant as a message; an empty list means valid."""
    out: list[str] = []
    el = spec.electrons
    if el.count < 1:
        out.append("electron count must be at least 1")
    if el.count > 2:
        out.append("at most 2 electrons are supported")
    if el.dims not in (1, 2, 3):
        out.append("dims must be 1, 2 or 3")
    if el.exchange not in EXCHANGE_KINDS:
        out.append(f"exchange must be one of {EXCHANGE_KINDS}")
    elif el.count == 1 and el.exchange != "none":
        out.append("exchange must be none for N=1")
    elif el.count == 2 and el.exchange == "none":
        out.append("exchange must be symmetric or antisymmetric for N=2")

    g = spec.grid
    if not (len(g.lower) == len(g.upper) == len(g.points)):
        out.append("grid bounds and point counts must have equal length")
    elif len(g.points) != el.dims:
        out.append("grid must have one axis per electron dimension")
    else:
        for lo, hi, n in zip(g.lower, g.upper, g.points):
            if n < 8:
                out.append("grid needs at least 8 points per axis")
            if not hi > lo:
                out.append("grid upper bound must exceed lower bound")

    out.extend(_potential_violations(spec))
    out.extend(_interaction_violations(spec))

    for i, mode in enumerate(spec.modes):
        if not mode.omega > 0:
            out.append(f"mode {i}: mode frequency must be positive")
        if mode.n_max < 1:
            out.append(f"mode {i}: cutoff n_max must be at least 1")
        if len(mode.coupling) != el.dims:
            out.append(f"mode {i}: coupling dimension must equal electron dims")
        if not all(math.isfinite(x) for x in (*mode.coupling, mode.drive)):
            out.append(f"mode {i}: coupling and drive must be finite")

    if spec.field_treatment not in FIELD_TREATMENTS:
        out.append(f"field_treatment must be one of {FIELD_TREATMENTS}")

    if not out:
        try:
            hilbert_dimension(spec, cap=cap)
        except DimensionError as exc:
            out.append(str(exc))
    return out


def _potential_violations(spec: SystemSpec) -> list[str]:
    pot = spec.potential
    if pot.kind not in POTENTIAL_KINDS:
        return [f"unknown potential kind {pot.kind!r}"]
    if pot.kind == "softcoulomb_well" and not pot.softening > 0:
        return ["potential softening must be positive"]
    if pot.kind == "polynomial" and len(pot.coefficients) == 0:
        return ["polynomial potential needs coefficients"]
    if pot.kind == "tabulated":
        n = int(np.prod(spec.grid.points)) if spec.grid.points else 0
        if len(pot.values) != n:
            return ["tabulated potential values must match the grid size"]
        grad = np.asarray(pot.gradient, dtype=float)
        if grad.size != n * spec.electrons.dims:
            return ["tabulated potential gradient must have one row per grid point and one column per dimension"]
        if not (np.all(np.isfinite(pot.values)) and np.all(np.isfinite(grad))):
            return ["tabulated potential must be finite"]
    return []


def _interaction_violations(spec: SystemSpec) -> list[str]:
    w = spec.interaction
    if w.kind not in INTERACTION_KINDS:
        return [f"unknown interaction kind {w.kind!r}"]
    out = []
    if spec.electrons.count == 1 and w.kind != "none":
        out.append("interaction must be none for N=1")
    if w.kind == "softcoulomb" and not w.softening > 0:
        out.append("interaction softening must be positive")
    if w.kind == "tabulated":
        if not (len(w.distances) == len(w.values) == len(w.derivative)) or len(w.distances) < 2:
            out.append("tabulated interaction needs matching distances, values and derivative")
        elif np.any(np.diff(w.distances) <= 0):
            out.append("tabulated interaction distances must increase")
    return out


def check_system(spec: SystemSpec, cap: int = DEFAULT_DIMENSION_CAP) -> None:
    violations = validate_system(spec, cap=cap)
    if violations:
        raise SpecError(violations)


def electronic_dimension(spec: SystemSpec) -> int:
    n = int(np.prod(spec.grid.points))
    if spec.electrons.count == 1:
        return n
    if spec.electrons.exchange == "symmetric":
        return n * (n + 1) // 2
    return n * (n - 1) // 2


def hilbert_dimension(spec: SystemSpec, cap: int = DEFAULT_DIMENSION_CAP) -> int:
    """Electronic configuration count times prod(n_max + 1) over modes."""
    dim = electronic_dimension(spec)
    for mode in spec.modes:
        dim *= mode.n_max + 1
    if dim > cap:
        raise DimensionError(f"dimension exceeds cap ({dim} > {cap})")
    return dim


# --------------------------------------------------------------------------
# free-space modes


def freespace_mode_arrays(spec: FreeSpaceModeSetSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Wave vectors, frequencies and coupling vectors of a free-space mode set.

    Returns arrays of shape (M, 3), (M,), (M, 3); each lattice point appears
    twice, once per polarization.
    """
    if not spec.cutoff >= spec.k_spacing * (1 - 1e-12):
        raise SpecError("cutoff below lowest mode")
    radius = spec.cutoff / spec.k_spacing
    r_int = int(math.floor(radius * (1 + 1e-12)))
    m = np.arange(-r_int, r_int + 1)
    mx, my, mz = np.meshgrid(m, m, m, indexing="ij")
    lattice = np.stack([mx.ravel(), my.ravel(), mz.ravel()], axis=1)
    norm2 = np.sum(lattice**2, axis=1)
    keep = (norm2 > 0) & (norm2 <= radius**2 * (1 + 1e-12))
    lattice = lattice[keep]
    if lattice.shape[0] == 0:
        raise SpecError("cutoff below lowest mode")

    k = lattice * spec.k_spacing
    khat = lattice / np.sqrt(np.sum(lattice**2, axis=1))[:, None]
    e1, e2 = _polarizations(khat)
    lam = spec.coupling_strength
    k_both = np.repeat(k, 2, axis=0)
    pol = np.empty_like(k_both, dtype=float)
    pol[0::2] = e1 * lam
    pol[1::2] = e2 * lam
    omega = spec.c * np.sqrt(np.sum(k_both**2, axis=1))
    return k_both, omega, pol


def _polarizations(khat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # reference axis: the coordinate axis least aligned with k
    ref = np.zeros_like(khat)
    ref[np.arange(khat.shape[0]), np.argmin(np.abs(khat), axis=1)] = 1.0
    e1 = np.cross(khat, ref)
    e1 /= np.linalg.norm(e1, axis=1)[:, None]
    e2 = np.cross(khat, e1)
    return e1, e2


def freespace_mode_set(spec: FreeSpaceModeSetSpec, n_max: int = 1) -> list[ModeSpec]:
    _, omega, pol = freespace_mode_arrays(spec)
    return [ModeSpec(omega=float(w), coupling=tuple(float(x) for x in p), drive=0.0, n_max=n_max)
            for w, p in zip(omega, pol)]


def cubic_symmetries() -> list[np.ndarray]:
    """The 48 signed permutation matrices of the cube."""
    out = []
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1, -1), repeat=3):
            g = np.zeros((3, 3))
            for row, (col, s) in enumerate(zip(perm, signs)):
                g[row, col] = s
            out.append(g)
    return out


# --------------------------------------------------------------------------
# JSON


def _strict(d: dict, allowed: Sequence[str], where: str) -> None:
    if not isinstance(d, dict):
        raise SpecError(f"{where} must be an object")
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise SpecError(f"unknown keys in {where}: {', '.join(unknown)}")


def _per_axis(value, dims: int, cast) -> tuple:
    if isinstance(value, (list, tuple)):
        return tuple(cast(v) for v in value)
    return tuple(cast(value) for _ in range(dims))


_POTENTIAL_KEYS = {
    "harmonic": ("k",),
    "softcoulomb_well": ("charge", "softening"),
    "polynomial": ("coefficients",),
    "tabulated": ("values", "gradient"),
}
_INTERACTION_KEYS = {
    "none": (),
    "coulomb3d": (),
    "softcoulomb": ("softening",),
    "tabulated": ("distances", "values", "derivative"),
}


def system_from_dict(doc: dict) -> SystemSpec:
    _strict(doc, ("electrons", "grid", "potential", "interaction", "modes", "field_treatment"), "system")
    for key in ("electrons", "grid"):
        if key not in doc:
            raise SpecError(f"missing key {key!r}")

    e = doc["electrons"]
    _strict(e, ("count", "dims", "exchange"), "electrons")
    electrons = ElectronSpec(count=int(e.get("count", 1)), dims=int(e.get("dims", 1)),
                             exchange=str(e.get("exchange", "none")))
    dims = electrons.dims

    g = doc["grid"]
    _strict(g, ("min", "max", "points"), "grid")
    grid = GridSpec(lower=_per_axis(g["min"], dims, float), upper=_per_axis(g["max"], dims, float),
                    points=_per_axis(g["points"], dims, int))

    p = doc.get("potential", {"kind": "harmonic", "k": 1.0})
    kind = p.get("kind") if isinstance(p, dict) else None
    if kind not in _POTENTIAL_KEYS:
        raise SpecError(f"unknown potential kind {kind!r}")
    _strict(p, ("kind",) + _POTENTIAL_KEYS[kind], "potential")
    potential = PotentialSpec(
        kind=kind,
        k=float(p.get("k", 1.0)),
        charge=float(p.get("charge", 1.0)),
        softening=float(p.get("softening", 1.0)),
        coefficients=tuple(float(c) for c in p.get("coefficients", ())),
        values=tuple(float(v) for v in p.get("values", ())),
        gradient=tuple(tuple(float(x) for x in (row if isinstance(row, (list, tuple)) else [row]))
                       for row in p.get("gradient", ())),
    )

    w = doc.get("interaction", {"kind": "none"})
    wkind = w.get("kind") if isinstance(w, dict) else None
    if wkind not in _INTERACTION_KEYS:
        raise SpecError(f"unknown interaction kind {wkind!r}")
    _strict(w, ("kind",) + _INTERACTION_KEYS[wkind], "interaction")
    interaction = InteractionSpec(
        kind=wkind,
        softening=float(w.get("softening", 1.0)),
        distances=tuple(float(x) for x in w.get("distances", ())),
        values=tuple(float(x) for x in w.get("values", ())),
        derivative=tuple(float(x) for x in w.get("derivative", ())),
    )

    modes = []
    for i, m in enumerate(doc.get("modes", [])):
        _strict(m, ("omega", "lambda", "drive", "n_max"), f"modes[{i}]")
        if "omega" not in m or "lambda" not in m:
            raise SpecError(f"modes[{i}] needs omega and lambda")
        lam = m["lambda"]
        coupling = tuple(float(x) for x in lam) if isinstance(lam, (list, tuple)) else (float(lam),)
        modes.append(ModeSpec(omega=float(m["omega"]), coupling=coupling,
                              drive=float(m.get("drive", 0.0)), n_max=int(m.get("n_max", 20))))

    return SystemSpec(electrons=electrons, grid=grid, potential=potential, interaction=interaction,
                      modes=tuple(modes), field_treatment=str(doc.get("field_treatment", "quantum")))


def system_to_dict(spec: SystemSpec) -> dict:
    p = spec.potential
    pot: dict = {"kind": p.kind}
    if p.kind == "harmonic":
        pot["k"] = p.k
    elif p.kind == "softcoulomb_well":
        pot.update(charge=p.charge, softening=p.softening)
    elif p.kind == "polynomial":
        pot["coefficients"] = list(p.coefficients)
    elif p.kind == "tabulated":
        pot.update(values=list(p.values), gradient=[list(r) for r in p.gradient])

    w = spec.interaction
    inter: dict = {"kind": w.kind}
    if w.kind == "softcoulomb":
        inter["softening"] = w.softening
    elif w.kind == "tabulated":
        inter.update(distances=list(w.distances), values=list(w.values), derivative=list(w.derivative))

    return {
        "electrons": {"count": spec.electrons.count, "dims": spec.electrons.dims,
                      "exchange": spec.electrons.exchange},
        "grid": {"min": list(spec.grid.lower), "max": list(spec.grid.upper), "points": list(spec.grid.points)},
        "potential": pot,
        "interaction": inter,
        "modes": [{"omega": m.omega, "lambda": list(m.coupling), "drive": m.drive, "n_max": m.n_max}
                  for m in spec.modes],
        "field_treatment": spec.field_treatment,
    }


def load_system(path: str | Path) -> SystemSpec:
    with open(path, encoding="utf-8") as fh:
        return system_from_dict(json.load(fh))


def dump_system(spec: SystemSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(system_to_dict(spec), indent=2) + "\n", encoding="utf-8")


def spec_hash(spec: SystemSpec) -> bytes:
    """SHA-256 of the canonical JSON form (32 bytes).

    The system is passed through the loader first so that 1 and 1.0 hash alike.
    """
    canonical = json.dumps(system_to_dict(system_from_dict(system_to_dict(spec))), sort_keys=True,
                           separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).digest()


def freespace_from_dict(doc: dict) -> FreeSpaceModeSetSpec:
    _strict(doc, ("box_length", "cutoff", "c"), "free-space mode set")
    try:
        return FreeSpaceModeSetSpec(box_length=float(doc["box_length"]), cutoff=float(doc["cutoff"]),
                                    c=float(doc.get("c", SPEED_OF_LIGHT)))
    except KeyError as exc:
        raise SpecError(f"missing key {exc.args[0]!r}") from None
