from functools import lru_cache

import pytest

from kinjump.factorization import factorize
from kinjump.jump import solve_jumps, spectral_density
from kinjump.model import gas_model
from kinjump.quadrature import build_grid

A_VALUES = (0.1, 0.5, 1.0, 2.0)

ACCEPTANCE_LINES = {}


@lru_cache(maxsize=None)
def pipeline(a: float):
    """(gas, grid, factorization, unit-U solution, unit-g_T solution) for rescaled slope a."""
    gas = gas_model(a)
    grid = build_grid(gas.alpha)
    fact = factorize(gas, grid)
    sol_g = solve_jumps(gas, 0.0, 1.0, grid, fact)
    sol_u = sol_g.with_forcing(1.0, 0.0)
    return gas, grid, fact, sol_u, sol_g


@lru_cache(maxsize=None)
def density(a: float, forcing: str):
    gas, _, _, sol_u, sol_g = pipeline(a)
    sol = sol_u if forcing == "U" else sol_g
    return sol, spectral_density(gas, sol)


@pytest.fixture(scope="session")
def pipe():
    return pipeline


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
