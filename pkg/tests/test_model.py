import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pfvirial.errors import DimensionError, SpecError
from pfvirial.model import (
    ElectronSpec,
    FreeSpaceModeSetSpec,
    GridSpec,
    ModeSpec,
    SystemSpec,
    cubic_symmetries,
    freespace_mode_arrays,
    freespace_mode_set,
    hilbert_dimension,
    spec_hash,
    system_from_dict,
    system_to_dict,
    validate_system,
)
from pfvirial.operators import TermId, build_term

from conftest import mode, system


def test_exchange_must_be_none_for_one_electron():
    spec = system(exchange="symmetric")
    assert "exchange must be none for N=1" in validate_system(spec)


def test_negative_mode_frequency_rejected():
    spec = system(modes=(ModeSpec(-1.0, (0.1,), 0.0, 5),))
    assert any("mode frequency must be positive" in v for v in validate_system(spec))


def test_valid_baseline_has_no_violations():
    assert validate_system(system(201, modes=(mode(0.1, 0.0, 20),))) == []


@pytest.mark.parametrize("spec, expected", [
    (system(201, modes=(mode(n_max=20),)), 201 * 21),
    (system(50, count=2, exchange="antisymmetric"), 50 * 49 // 2),
    (system(50, count=2, exchange="symmetric", modes=(mode(n_max=3),)), 1275 * 4),
])
def test_hilbert_dimension_examples(spec, expected):
    assert hilbert_dimension(spec) == expected


def test_dimension_cap():
    spec = system(201, modes=(mode(n_max=20),))
    with pytest.raises(DimensionError, match="dimension exceeds cap"):
        hilbert_dimension(spec, cap=1000)
    assert any("dimension exceeds cap" in v for v in validate_system(spec, cap=1000))


def test_other_invariants_reported():
    bad = SystemSpec(ElectronSpec(3, 1, "symmetric"), GridSpec((-1.0,), (1.0,), (4,)))
    msgs = " | ".join(validate_system(bad))
    assert "electrons" in msgs and "points" in msgs
    wrong_dim = system(modes=(ModeSpec(1.0, (0.1, 0.2), 0.0, 3),))
    assert validate_system(wrong_dim)


@settings(max_examples=30, deadline=None)
@given(points=st.integers(8, 30), cutoffs=st.lists(st.integers(1, 6), max_size=3), extra=st.integers(1, 6),
       count=st.sampled_from([(1, "none"), (2, "symmetric"), (2, "antisymmetric")]))
def test_dimension_multiplicative_over_modes(points, cutoffs, extra, count):
    base = system(points, modes=tuple(mode(n_max=c) for c in cutoffs), count=count[0], exchange=count[1])
    more = base.replace(modes=base.modes + (mode(n_max=extra),))
    assert hilbert_dimension(more) == hilbert_dimension(base) * (extra + 1)


@settings(max_examples=20, deadline=None)
@given(points=st.integers(8, 14), n_max=st.integers(1, 4), lam=st.floats(-1, 1), f=st.floats(-1, 1),
       two=st.booleans())
def test_valid_specs_build_every_term(points, n_max, lam, f, two):
    spec = system(points, modes=(mode(lam, f, n_max),), count=2 if two else 1,
                  exchange="antisymmetric" if two else "none")
    assert validate_system(spec) == []
    for term in TermId:
        op = build_term(spec, term)
        assert op.dim == hilbert_dimension(spec)


def test_nearest_shell_gives_twelve_modes():
    fs = FreeSpaceModeSetSpec(box_length=2.0, cutoff=1.0001 * 2 * np.pi / 2.0, c=137.036)
    modes = freespace_mode_set(fs)
    assert len(modes) == 12
    assert all(m.omega == pytest.approx(fs.omega0, rel=1e-14) for m in modes)


def test_polarizations_transverse_and_normalized():
    fs = FreeSpaceModeSetSpec(box_length=1.5, cutoff=4.2 * 2 * np.pi / 1.5)
    k, omega, pol = freespace_mode_arrays(fs)
    lam = np.sqrt(4 * np.pi / 1.5**3)
    assert np.allclose(np.linalg.norm(pol, axis=1), lam, rtol=1e-13)
    assert np.max(np.abs(np.sum(pol * k, axis=1))) < 1e-12 * lam * np.max(np.linalg.norm(k, axis=1))
    assert np.allclose(omega, fs.c * np.linalg.norm(k, axis=1), rtol=1e-14)
    # the two polarizations of one k are orthogonal
    assert np.max(np.abs(np.sum(pol[0::2] * pol[1::2], axis=1))) < 1e-12 * lam**2


def test_mode_count_matches_brute_force_lattice():
    count = sum(1 for m in itertools.product(range(-5, 6), repeat=3) if 0 < sum(x * x for x in m) <= 25)
    assert count == 514
    fs = FreeSpaceModeSetSpec(box_length=3.0, cutoff=5 * 2 * np.pi / 3.0)
    assert len(freespace_mode_set(fs)) == 2 * count


def test_cutoff_below_lowest_mode():
    with pytest.raises(SpecError, match="cutoff below lowest mode"):
        freespace_mode_set(FreeSpaceModeSetSpec(box_length=1.0, cutoff=0.5 * 2 * np.pi))


def test_mode_set_invariant_under_cubic_group():
    fs = FreeSpaceModeSetSpec(box_length=1.0, cutoff=2.3 * 2 * np.pi)
    k, omega, pol = freespace_mode_arrays(fs)
    lam2 = np.sqrt(4 * np.pi)
    # per k-point, the projector onto the polarization plane
    keys = {tuple(np.round(kk / fs.k_spacing).astype(int)): i for i, kk in enumerate(k[0::2])}
    proj = np.einsum("ni,nj->nij", pol[0::2], pol[0::2]) + np.einsum("ni,nj->nij", pol[1::2], pol[1::2])
    assert len(cubic_symmetries()) == 48
    for g in cubic_symmetries():
        for key, i in keys.items():
            j = keys[tuple(int(x) for x in g @ np.array(key))]
            rotated = g @ proj[i] @ g.T
            assert np.allclose(rotated, proj[j], atol=1e-12 * lam2**2)
            assert omega[2 * i] == pytest.approx(omega[2 * j], rel=1e-14)


def test_json_round_trip_and_hash():
    spec = system(64, modes=(mode(0.2, 0.3, 7),))
    doc = system_to_dict(spec)
    again = system_from_dict(json.loads(json.dumps(doc)))
    assert again == spec
    assert spec_hash(again) == spec_hash(spec)
    assert spec_hash(spec.replace(modes=(mode(0.2, 0.3, 8),))) != spec_hash(spec)
    assert spec_hash(system(64, lo=-10, hi=10)) == spec_hash(system(64, lo=-10.0, hi=10.0))


def test_unknown_keys_are_errors():
    doc = system_to_dict(system(64))
    doc["grid"]["spacing"] = 0.1
    with pytest.raises(SpecError, match="unknown keys"):
        system_from_dict(doc)
    doc = system_to_dict(system(64))
    doc["colour"] = "blue"
    with pytest.raises(SpecError, match="unknown keys"):
        system_from_dict(doc)
