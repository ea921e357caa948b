"""Command-line front end: ``python -m pfvirial COMMAND --config PATH --out DIR``.

Exit codes: 0 when every requested check passes, 2 when a check fails (or a
solver cannot reach its tolerance), 1 for usage and configuration errors.
Diagnostics go to standard error.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from .errors import ConvergenceError, PfvError, SpecError, StateFileError
from .io import file_sha256, save_state, write_json
from .model import check_system, freespace_from_dict, system_from_dict, system_to_dict
from .qedft import DensityProfile, build_auxiliary, invert_potential_single_electron, ks_virial_identities
from .solver import EigenSolveConfig, ScfConfig, scf_meanfield, solve
from .virial import DEFAULT_TOLERANCES, energy_breakdown, force_balance_residual, mass_renorm, virial_report

log = logging.getLogger("pfvirial")

COMMANDS = ("solve", "virial-report", "scf", "ks-invert", "mass-renorm")
EXTRA_TOLERANCES = {"eigen": 1e-10, "scf": 1e-10, "ks": 1e-5, "density": 1e-6}


class UsageError(PfvError):
    pass


def _parse_tolerances(items: list[str]) -> dict[str, float]:
    known = set(DEFAULT_TOLERANCES) | set(EXTRA_TOLERANCES)
    out = {}
    for item in items:
        name, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--tol expects NAME=VALUE, got {item!r}")
        if name not in known:
            raise UsageError(f"unknown tolerance {name!r}; known: {', '.join(sorted(known))}")
        try:
            out[name] = float(value)
        except ValueError:
            raise UsageError(f"tolerance {name} is not a number: {value!r}") from None
        if not out[name] > 0:
            raise UsageError(f"tolerance {name} must be positive")
    return out


def _threads(arg: int | None) -> int | None:
    if arg is not None:
        return arg
    env = os.environ.get("PFV_THREADS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"PFV_THREADS must be an integer, got {env!r}") from None
    return None


def _read_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file is not valid JSON: {exc}") from None


def _system(args):
    spec = system_from_dict(_read_json(args.config))
    check_system(spec)
    return spec


def _eigen_config(args, tols) -> EigenSolveConfig:
    return EigenSolveConfig(tol=tols.get("eigen", EXTRA_TOLERANCES["eigen"]), seed=args.seed, method=args.method)


def _ground(spec, args, tols):
    """Quantum ground state, or the converged mean-field solution for classical fields."""
    if spec.field_treatment == "classical":
        sol = scf_meanfield(spec, ScfConfig(tol=tols.get("scf", EXTRA_TOLERANCES["scf"]), seed=args.seed))
        return sol.product_state(), sol
    return solve(spec, _eigen_config(args, tols))[0], None


# --------------------------------------------------------------------------
# commands


def cmd_solve(args, tols, out: Path) -> tuple[int, list[Path]]:
    spec = _system(args)
    state, sol = _ground(spec, args, tols)
    b = energy_breakdown(spec, state, sol.mean_field if sol else None)
    state_path = out / "state.pfvw"
    save_state(state, spec, state_path)
    doc = {"command": "solve", "energy": state.energy, "eigen_residual": b.eigen_residual,
           "energies": b.to_dict()}
    return 0, [state_path, write_json(out / "energies.json", doc)]


def cmd_virial_report(args, tols, out: Path) -> tuple[int, list[Path]]:
    spec = _system(args)
    state, sol = _ground(spec, args, tols)
    vtols = {k: v for k, v in tols.items() if k in DEFAULT_TOLERANCES}
    report = virial_report(spec, state, sol.mean_field if sol else None, vtols)
    doc = {"command": "virial-report", "energy": state.energy, **report.to_dict()}
    json_path = write_json(out / "virial_report.json", doc)
    csv_path = out / "virial_summary.csv"
    csv_path.write_text(report.to_csv(), encoding="utf-8")
    for e in report.entries:
        if not e.passed:
            print(f"check failed: {e.identity} relative residual {e.relative:.3e} > {e.tolerance:.1e}",
                  file=sys.stderr)
    if not report.positivity.passed:
        print("check failed: positivity", file=sys.stderr)
    return (0 if report.passed else 2), [json_path, csv_path]


def cmd_scf(args, tols, out: Path) -> tuple[int, list[Path]]:
    spec = _system(args)
    if spec.field_treatment != "classical":
        log.info("treating the field classically for the scf command")
        spec = spec.replace(field_treatment="classical")
    sol = scf_meanfield(spec, ScfConfig(tol=tols.get("scf", EXTRA_TOLERANCES["scf"]), seed=args.seed))
    state = sol.product_state()
    b = energy_breakdown(spec, state, sol.mean_field)
    fb = [force_balance_residual(spec, state, b, a, tols.get("force_balance", DEFAULT_TOLERANCES["force_balance"]))
          for a in range(len(spec.modes))]
    doc = {"command": "scf", **sol.to_dict(), "force_balance": [e.to_dict() for e in fb],
           "energies": b.to_dict()}
    ok = all(e.passed for e in fb)
    if not ok:
        print("check failed: force balance", file=sys.stderr)
    return (0 if ok else 2), [write_json(out / "mean_field.json", doc)]


def cmd_ks_invert(args, tols, out: Path) -> tuple[int, list[Path]]:
    spec = _system(args)
    if spec.electrons.count != 1:
        raise UsageError("ks-invert inverts one-electron densities only")
    state, _ = _ground(spec, args, tols)
    b = energy_breakdown(spec, state)
    if args.density:
        rho = DensityProfile.from_csv(args.density, spec.grid)
    else:
        rho = DensityProfile.from_state(spec, state)
    inv = invert_potential_single_electron(rho)
    aux = build_auxiliary(spec, inv.values, b.p)
    aux_spec = aux.spec()
    aux_state = solve(aux_spec, _eigen_config(args, tols))[0]
    files = [write_json(out / "ks_potential.json", {"command": "ks-invert", **aux.to_dict(),
                                                   "mask": inv.mask.tolist(), "constant": inv.constant})]
    report = ks_virial_identities(spec, state, aux_spec, aux_state, tol=tols.get("ks", EXTRA_TOLERANCES["ks"]),
                                  density_tol=tols.get("density", EXTRA_TOLERANCES["density"]))
    files.append(write_json(out / "ks_report.json", report))
    if not report["pass"]:
        print("check failed: Kohn-Sham virial identities", file=sys.stderr)
    return (0 if report["pass"] else 2), files


def cmd_mass_renorm(args, tols, out: Path) -> tuple[int, list[Path]]:
    fs = freespace_from_dict(_read_json(args.config))
    result = mass_renorm(fs)
    return 0, [write_json(out / "mass_renorm.json", {"command": "mass-renorm", **result.to_dict()})]


HANDLERS = {
    "solve": cmd_solve,
    "virial-report": cmd_virial_report,
    "scf": cmd_scf,
    "ks-invert": cmd_ks_invert,
    "mass-renorm": cmd_mass_renorm,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pfvirial", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="system (or free-space mode set) JSON")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE",
                        help="override a tolerance (repeatable)")
    parser.add_argument("--seed", type=int, default=0, help="Lanczos start-vector seed")
    parser.add_argument("--threads", type=int, default=None, help="BLAS threads (fallback: PFV_THREADS)")
    parser.add_argument("--method", choices=("auto", "dense", "lanczos"), default="auto")
    parser.add_argument("--density", default=None, help="ks-invert: CSV of (x, rho) to invert instead")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _limit_threads(n: int | None):
    if n is None:
        return contextlib.nullcontext()
    if n < 1:
        raise UsageError("--threads must be at least 1")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        tols = _parse_tolerances(args.tol)
        threads = _threads(args.threads)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with _limit_threads(threads):
            code, files = HANDLERS[args.command](args, tols, out)
    except (UsageError, SpecError, StateFileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConvergenceError as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 2
    except PfvError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    manifest = {
        "command": args.command,
        "config": str(args.config),
        "out": str(out),
        "tolerances": tols,
        "seed": args.seed,
        "threads": threads,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "files": {p.name: file_sha256(p) for p in files},
    }
    write_json(out / "manifest.json", manifest)
    return code


def main() -> None:
    sys.exit(run())
