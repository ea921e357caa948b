import numpy as np
import pytest

from pfvirial.errors import DensityMismatchError, SpecError
from pfvirial.model import GridSpec
from pfvirial.qedft import (
    AuxiliarySystem,
    DensityProfile,
    aux_mode_forces,
    build_auxiliary,
    density_l2_error,
    invert_potential_single_electron,
    ks_virial_identities,
)
from pfvirial.virial import energy_breakdown

from conftest import coupled, ground, mode, system


def test_inversion_recovers_potential_of_discrete_eigenstate():
    spec = system(121, lo=-6, hi=6)
    psi = ground(spec, "dense")
    rho = DensityProfile.from_state(spec, psi)
    inv = invert_potential_single_electron(rho)
    x = spec.grid.coordinates()[:, 0]
    v = 0.5 * x**2
    # sqrt(rho) solves the discrete equation, so v_s = v - E on the retained region up to the gauge
    shift = v - inv.values
    assert np.ptp(shift[inv.mask]) < 1e-8
    assert np.min(inv.values[inv.mask]) == 0.0


def test_masked_points_take_nearest_retained_value():
    grid = GridSpec((-1.0,), (1.0,), (21,))
    vals = np.zeros(21)
    vals[5:16] = 1.0
    rho = DensityProfile(grid, vals / (vals.sum() * grid.cell_volume))
    inv = invert_potential_single_electron(rho)
    assert not inv.mask[0] and inv.mask[5]
    assert inv.values[0] == inv.values[5]
    assert inv.values[-1] == inv.values[15]


def test_density_profile_validation(tmp_path):
    grid = GridSpec((-1.0,), (1.0,), (11,))
    with pytest.raises(SpecError, match="negative density"):
        DensityProfile(grid, np.r_[-0.1, np.ones(10)])
    with pytest.raises(SpecError, match="integrates"):
        DensityProfile(grid, np.ones(11))
    good = np.ones(11) / (11 * grid.cell_volume)
    path = tmp_path / "rho.csv"
    path.write_text("".join(f"{x},{r}\n" for x, r in zip(grid.coordinates()[:, 0], good)))
    assert np.allclose(DensityProfile.from_csv(path, grid).values, good)
    with pytest.raises(SpecError):
        DensityProfile.from_csv(path, GridSpec((-1.0,), (1.5,), (11,)))
    doc = DensityProfile(grid, good).to_dict()
    assert np.allclose(DensityProfile.from_dict(doc).values, good)


def test_aux_mode_forces_reproduce_displacement():
    forces = aux_mode_forces([0.3, -0.2], [1.0, 2.0])
    assert forces == [pytest.approx(-0.3), pytest.approx(1.6)]
    with pytest.raises(SpecError):
        aux_mode_forces([0.1], [0.0])
    spec = system(21, lo=-4, hi=4, modes=(mode(0.0, forces[1], 30, omega=2.0),))
    b = energy_breakdown(spec, ground(spec, "dense"))
    assert b.p[0] == pytest.approx(-0.2, abs=1e-10)


@pytest.fixture(scope="module")
def coupled_pair():
    spec = coupled(161, lam=0.2, drive=0.1, n_max=20, lo=-8, hi=8)
    psi = ground(spec, "dense")
    rho = DensityProfile.from_state(spec, psi)
    inv = invert_potential_single_electron(rho)
    aux = build_auxiliary(spec, inv.values, energy_breakdown(spec, psi).p)
    return spec, psi, aux


def test_ks_round_trip_on_coupled_target(coupled_pair):
    spec, psi, aux = coupled_pair
    aux_spec = aux.spec()
    aux_state = ground(aux_spec, "dense")
    report = ks_virial_identities(spec, psi, aux_spec, aux_state)
    assert report["density_l2_error"] <= 1e-6
    assert report["identity_ii"]["relative"] <= 1e-10
    assert report["coupling_recovery"]["relative"] <= 1e-6
    assert report["identity_i"]["relative"] <= 1e-5
    assert report["pass"]


def test_auxiliary_round_trip_through_json(coupled_pair, tmp_path):
    _, _, aux = coupled_pair
    path = tmp_path / "aux.json"
    aux.dump(path)
    import json

    again = AuxiliarySystem.from_dict(json.loads(path.read_text()))
    assert again.spec() == aux.spec()


def test_density_mismatch_is_refused(coupled_pair):
    spec, psi, aux = coupled_pair
    wrong = system(161, lo=-8, hi=8, k=2.0, modes=(mode(0.0, aux.forces[0], 20),))
    with pytest.raises(DensityMismatchError, match="density"):
        ks_virial_identities(spec, psi, wrong, ground(wrong, "dense"))


def test_density_error_is_zero_for_identical_densities():
    grid = GridSpec((-1.0,), (1.0,), (11,))
    rho = np.linspace(0, 1, 11)
    assert density_l2_error(grid, rho, rho) == 0.0
