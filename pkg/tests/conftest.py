import functools

import numpy as np
import pytest

from pfvirial.model import ElectronSpec, GridSpec, InteractionSpec, ModeSpec, PotentialSpec, SystemSpec
from pfvirial.solver import EigenSolveConfig, dense_eigensolve, lanczos_ground_state

# Exact ground energy of the coupled-oscillator model: half the sum of the
# normal-mode frequencies of [[w0^2 + lam^2, -w lam], [-w lam, w^2]], w0 = w = 1, lam = 0.1.
COUPLED_ANALYTIC_E0 = 1.0012492197250393


def system(points=201, lo=-10.0, hi=10.0, modes=(), k=1.0, treatment="quantum", count=1, exchange="none",
           interaction=None):
    return SystemSpec(ElectronSpec(count, 1, exchange), GridSpec((lo,), (hi,), (points,)),
                      PotentialSpec("harmonic", k=k), interaction or InteractionSpec("none"), tuple(modes),
                      treatment)


def mode(lam=0.1, drive=0.0, n_max=40, omega=1.0):
    return ModeSpec(omega, (lam,), drive, n_max)


def coupled(points=201, lam=0.1, drive=0.0, n_max=40, **kw):
    return system(points, modes=(mode(lam, drive, n_max),), **kw)


@functools.lru_cache(maxsize=None)
def ground(spec, method="lanczos"):
    if method == "dense":
        return dense_eigensolve(spec)[0]
    return lanczos_ground_state(spec, EigenSolveConfig(tol=1e-10))


@pytest.fixture(scope="session")
def coupled_spec():
    return coupled()


@pytest.fixture(scope="session")
def coupled_dense(coupled_spec):
    return ground(coupled_spec, "dense")


@pytest.fixture(scope="session")
def coupled_lanczos(coupled_spec):
    return ground(coupled_spec)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_state(dim, rng):
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


ACCEPTANCE_LINES: dict[str, str] = {}


def record(criterion: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[criterion] = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES, key=lambda k: (int("".join(c for c in k if c.isdigit())), k)):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
