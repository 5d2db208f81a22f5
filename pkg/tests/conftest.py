from pathlib import Path

import numpy as np
import pytest

from hpmf.priors import PriorOperators
from hpmf.solver import ModeState

DATA = Path(__file__).parent / "data"

# (criterion, passed, detail) tuples appended by test_acceptance
ACCEPTANCE_RESULTS = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


@pytest.fixture
def photo_path():
    return DATA / "astronaut_256.png"


def make_state(u, v, *, beta_u=1.0, beta_v=1.0, omega_u=1.0, omega_v=1.0,
               lambda_u=0.0, lambda_v=0.0, rho_u=0.0, rho_v=0.0, rng=None):
    """ModeState around given factors; aux/duals random when `rng` is given, else zero."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    v = np.atleast_2d(np.asarray(v, dtype=float))
    ops = PriorOperators.for_mode(u.shape[0], u.shape[1])
    shapes = {
        "g": (ops.tv_u.shape[0], u.shape[1]),
        "h": (ops.tv_v.shape[0], v.shape[1]),
        "r": u.shape,
        "m": v.shape,
    }

    def fill(shape):
        return rng.standard_normal(shape) if rng is not None else np.zeros(shape)

    return ModeState(
        u=u, v=v,
        g=fill(shapes["g"]), h=fill(shapes["h"]), r=fill(shapes["r"]), m=fill(shapes["m"]),
        lam=fill(shapes["g"]), pi=fill(shapes["h"]), phi=fill(shapes["r"]), gam=fill(shapes["m"]),
        beta_u=beta_u, beta_v=beta_v, omega_u=omega_u, omega_v=omega_v,
        ops=ops, rank=u.shape[1],
        lambda_u=lambda_u, lambda_v=lambda_v, rho_u=rho_u, rho_v=rho_v,
    )


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
