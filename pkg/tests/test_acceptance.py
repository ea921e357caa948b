"""The eleven acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line, printed in the terminal summary.
"""

import functools
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from pfvirial.model import FreeSpaceModeSetSpec, freespace_from_dict, load_system
from pfvirial.operators import TermId, build_term, build_virial_operator, commutator_expectation
from pfvirial.qedft import DensityProfile, build_auxiliary, invert_potential_single_electron, ks_virial_identities
from pfvirial.solver import scf_meanfield, solve
from pfvirial.virial import (
    electronic_virial_residual,
    energy_breakdown,
    ext_force_sum_residual,
    field_mode_virial_residual,
    mass_renorm,
    mixed_virial_residual,
    virial_report,
)

from conftest import COUPLED_ANALYTIC_E0, coupled, ground, record

CONFIGS = Path(__file__).resolve().parents[1] / "src" / "pfvirial" / "configs"
SYSTEM_CONFIGS = sorted(p for p in CONFIGS.glob("*.json") if not p.name.startswith("freespace"))


@functools.lru_cache(maxsize=None)
def shipped_run(name):
    """(spec, state-or-solution) for a shipped system config."""
    spec = load_system(CONFIGS / f"{name}.json")
    if spec.field_treatment == "classical":
        return spec, scf_meanfield(spec)
    return spec, ground(spec)


def check(criterion, passed, detail):
    record(criterion, passed, detail)
    assert passed, detail


# --------------------------------------------------------------------------
# 1. hypervirial exactness


@pytest.mark.parametrize("method", ["dense", "lanczos"])
def test_criterion_1_hypervirial_exactness(method):
    spec = coupled()
    psi = ground(spec, method)
    h = build_term(spec, TermId.TOTAL)
    hv = h.apply(psi.coefficients)
    eps = float(np.linalg.norm(hv - np.vdot(psi.coefficients, hv).real * psi.coefficients))
    ratios = {}
    for kind, alpha in (("electronic", None), ("mode", None), ("mixed", 0)):
        a = build_virial_operator(spec, kind, alpha)
        lhs = abs(commutator_expectation(h, a, psi))
        ratios[kind] = lhs / (10 * eps * np.linalg.norm(a.apply(psi.coefficients)))
    ok = eps <= 1e-10 and all(r <= 1.0 for r in ratios.values())
    check(f"1-{method}", ok, f"eps_eig={eps:.2e}; |<[H,A]>| / (10 eps ||A psi||) = "
          + ", ".join(f"{k} {v:.2e}" for k, v in ratios.items()))


# --------------------------------------------------------------------------
# 2. analytic energy oracle


def test_criterion_2a_analytic_energy_at_201_points():
    e = ground(coupled(), "dense").energy
    err = abs(e - COUPLED_ANALYTIC_E0)
    check("2a", err <= 2e-4, f"|E0(201) - E_analytic| = {err:.3e} (tol 2e-4)")


def test_criterion_2b_richardson_extrapolation():
    e_h = ground(coupled(201), "dense").energy
    e_h2 = ground(coupled(401)).energy  # 401 x 41 exceeds the dense cap
    extrapolated = (4 * e_h2 - e_h) / 3
    err = abs(extrapolated - COUPLED_ANALYTIC_E0)
    check("2b", err <= 1e-8, f"|Richardson(h, h/2) - E_analytic| = {err:.3e} (tol 1e-8)")


# --------------------------------------------------------------------------
# 3. electronic virial convergence


def _electronic_relative(points):
    spec = coupled(points)
    psi = ground(spec, "dense" if points <= 201 else "lanczos")
    return electronic_virial_residual(spec, psi, energy_breakdown(spec, psi)).relative


def test_criterion_3a_electronic_virial_at_201_points():
    rel = _electronic_relative(201)
    check("3a", rel <= 1e-4, f"electronic relative residual at 201 points = {rel:.3e} (tol 1e-4)")


def test_criterion_3b_electronic_virial_second_order():
    ratio = _electronic_relative(201) / _electronic_relative(401)
    check("3b", 3.5 <= ratio <= 4.5, f"residual(201)/residual(401) = {ratio:.4f} (want [3.5, 4.5])")


# --------------------------------------------------------------------------
# 4. field-mode virial sign


def test_criterion_4_field_mode_sign():
    spec, psi = shipped_run("driven_mode")
    b = energy_breakdown(spec, psi)
    e = field_mode_virial_residual(spec, psi, b)
    values = {"<p>": (b.p[0], -0.5, 1e-10), "<w2p2-q2>": (b.w2p2[0] - b.q2[0], 0.25, 1e-9),
              "<H_ext>": (b.drive, -0.25, 1e-10), "printed form": (e.paper_form_residual, -0.5, 1e-9)}
    ok = all(abs(v - want) <= tol for v, want, tol in values.values()) and abs(e.residual) <= 1e-9 * e.scale
    check("4", ok, ", ".join(f"{k} = {v:.12f}" for k, (v, _, _) in values.items())
          + f", corrected residual/scale = {abs(e.residual) / e.scale:.2e}")


# --------------------------------------------------------------------------
# 5. force balance on shipped configs


def test_criterion_5_force_balance_on_shipped_configs():
    worst, where = 0.0, ""
    for path in SYSTEM_CONFIGS:
        if not load_system(path).modes:
            continue
        spec, psi = shipped_run(path.stem)
        rep = virial_report(spec, psi)
        for e in rep.entries:
            if e.identity.startswith("force_balance") and e.relative >= worst:
                worst, where = e.relative, path.stem
    check("5", worst <= 1e-8, f"worst force-balance relative residual {worst:.2e} ({where}); tol 1e-8")


# --------------------------------------------------------------------------
# 6. mixed virial and the external-force sum


def test_criterion_6_mixed_virial():
    spec = coupled()
    psi = ground(spec, "dense")
    b = energy_breakdown(spec, psi)
    mixed = mixed_virial_residual(spec, psi, b)
    oracle_rel = mixed.oracle / mixed.scale
    closed_rel = abs(mixed.residual) / mixed.scale
    dspec, dpsi = shipped_run("driven_coupled")
    ext = ext_force_sum_residual(dspec, dpsi, energy_breakdown(dspec, dpsi))
    ext_rel = abs(ext.residual) / ext.scale
    ok = oracle_rel <= 1e-9 and closed_rel <= 1e-6 and ext_rel <= 1e-8
    check("6", ok, f"oracle/scale {oracle_rel:.2e} (1e-9), closed form/scale {closed_rel:.2e} (1e-6), "
          f"external-force sum/scale {ext_rel:.2e} (1e-8)")


# --------------------------------------------------------------------------
# 7. positivity


def test_criterion_7_positivity_on_shipped_configs():
    failures = []
    for path in SYSTEM_CONFIGS:
        spec, psi = shipped_run(path.stem)
        pos = virial_report(spec, psi).positivity
        if not pos.passed:
            failures.append(path.stem)
    check("7", not failures, f"{len(SYSTEM_CONFIGS)} configs checked; failures: {failures or 'none'}")


# --------------------------------------------------------------------------
# 8. mass renormalization


def test_criterion_8_mass_renormalization():
    c = 137.036
    light = mass_renorm(FreeSpaceModeSetSpec(box_length=1.0, cutoff=c, c=c))
    arithmetic = 4 / (3 * math.pi * c)
    rel = abs(light.mu_continuum - arithmetic) / arithmetic
    fine_spec = freespace_from_dict(json.loads((CONFIGS / "freespace_fine.json").read_text()))
    assert fine_spec.cutoff == pytest.approx(50 * fine_spec.omega0 / fine_spec.c, rel=1e-14)
    fine = mass_renorm(fine_spec)
    ratio = fine.mu_discrete / fine.mu_continuum
    check("8", rel <= 1e-12 and 0.98 <= ratio <= 1.02,
          f"mu_continuum relative error {rel:.1e}; discrete/continuum at 50 w0/c = {ratio:.5f} "
          f"({fine.mode_count} modes)")


# --------------------------------------------------------------------------
# 9. mean-field vs quantum


def test_criterion_9_mean_field_agreement():
    spec, sol = shipped_run("classical_coupled")
    quantum = ground(spec.replace(field_treatment="quantum"))
    gap = abs(quantum.energy - sol.total_energy)
    rep = virial_report(spec, sol)
    failed = [e.identity for e in rep.entries if not e.passed]
    ok = gap <= 1e-6 and rep.passed
    check("9", ok, f"|E_quantum - E_scf| = {gap:.3e} (tol 1e-6); SCF virial gates failed: {failed or 'none'}")


# --------------------------------------------------------------------------
# 10. QEDFT round trip


def test_criterion_10_qedft_round_trip():
    spec = coupled()
    psi = ground(spec, "dense")
    rho = DensityProfile.from_state(spec, psi)
    inv = invert_potential_single_electron(rho)
    aux = build_auxiliary(spec, inv.values, energy_breakdown(spec, psi).p)
    aux_spec = aux.spec()
    aux_state = solve(aux_spec)[0]
    r = ks_virial_identities(spec, psi, aux_spec, aux_state)
    ok = (r["density_l2_error"] <= 1e-6 and r["coupling_recovery"]["relative"] <= 1e-6
          and r["identity_i"]["relative"] <= 1e-5 and r["identity_ii"]["relative"] <= 1e-5)
    check("10", ok, f"density L2 {r['density_l2_error']:.2e}, H_c recovery {r['coupling_recovery']['relative']:.2e}, "
          f"identity (i) {r['identity_i']['relative']:.2e}, identity (ii) {r['identity_ii']['relative']:.2e}")


# --------------------------------------------------------------------------
# 11. determinism


def test_criterion_11_determinism(tmp_path):
    outputs = []
    for run in ("a", "b"):
        out = tmp_path / run
        subprocess.run([sys.executable, "-m", "pfvirial", "virial-report", "--config",
                        str(CONFIGS / "coupled_oscillator.json"), "--out", str(out), "--seed", "5",
                        "--threads", "1", "--method", "lanczos"], capture_output=True, check=False)
        outputs.append(((out / "virial_report.json").read_bytes(), (out / "virial_summary.csv").read_bytes()))
    same = outputs[0] == outputs[1]
    check("11", same, f"two virial-report runs byte-identical: {same}")
