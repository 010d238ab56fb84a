import numpy as np
import pytest

from kinjump.model import AsymptoticState, gas_model, h_asymptotic
from kinjump.oracle import (DomainTooShortError, FieldSolution, OracleError, collision_invariant_defect,
                            extract_jumps, macroscopic_moments, ordinates, solve_direct,
                            solve_manufactured, x_grid)


def test_x_grid():
    x = x_grid(30.0, 100)
    assert x[0] == 0.0 and x[-1] == pytest.approx(30.0, rel=1e-15)
    assert np.all(np.diff(x) > 0)
    # cells are finest at the wall
    assert np.diff(x)[0] < np.diff(x)[-1]
    assert np.allclose(x_grid(3.0, 3, grading=0), [0, 1, 2, 3])


def test_ordinates():
    g = ordinates(1.0, 96)
    assert g.nodes.size == 96
    assert np.allclose(g.nodes, -g.nodes[::-1])
    assert g.weights.sum() == pytest.approx(2.0, rel=1e-13)
    for bad in (50, 32):
        with pytest.raises(ValueError):
            ordinates(1.0, bad)


def test_zero_forcing():
    s = solve_direct(1.0, 0.0, 0.0, nx=50)
    assert np.all(s.h == 0) and s.eps_T == 0.0 and s.eps_n == 0.0
    assert s.iterations == 1


def _injected(a, state, n_mu=384, nx=200, x_max=30.0):
    gas = gas_model(a)
    x = x_grid(x_max, nx)
    g = ordinates(gas, n_mu)
    h = h_asymptotic(x[:, None], g.nodes[None, :], state, gas)
    return FieldSolution(gas.a, state.U, state.g_T, x, g.nodes, g.weights, h, 0.0, 0.0, x_max, nx, n_mu, 0, 0.0)


@pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
def test_extract_injected(a):
    state = AsymptoticState(-0.3, 0.7, 0.4, 1.2)
    # enough ordinates that the Gaussian moments of h_as are exact to round-off
    f = _injected(a, state)
    eps_T, eps_n = extract_jumps(f)
    assert eps_T == pytest.approx(0.7, abs=1e-10)
    assert eps_n == pytest.approx(-0.3, abs=1e-10)
    dens, temp = macroscopic_moments(f.h, f.mu, f.weights, a)
    far = f.x >= 20.0
    assert np.polyfit(f.x[far], temp[far], 1)[0] == pytest.approx(1.2, abs=1e-6)
    assert np.polyfit(f.x[far], dens[far], 1)[0] == pytest.approx(-1.2, abs=1e-6)


def test_manufactured_solution():
    state = AsymptoticState(0.2, -0.5, 0.3, 1.0)
    _, err = solve_manufactured(1.0, state, nx=60, n_mu=256)
    assert err < 1e-9


def test_jumps_match_analytic_values():
    s = solve_direct(1.0, 0.0, 1.0)
    # per-unit analytic values at a = 1 from the jump module
    assert s.eps_T == pytest.approx(0.575677, rel=1e-2)
    assert s.eps_n == pytest.approx(-0.311838, rel=1e-2)
    assert s.sweep_residual < 1e-8
    assert collision_invariant_defect(s) < 1e-9


def test_ordinate_refinement():
    coarse = solve_direct(1.0, 1.0, 0.0, nx=300, n_mu=64)
    fine = solve_direct(1.0, 1.0, 0.0, nx=300, n_mu=128)
    assert abs(coarse.eps_T / fine.eps_T - 1) < 3e-3
    assert abs(coarse.eps_n / fine.eps_n - 1) < 3e-3


def test_domain_too_short():
    with pytest.raises(DomainTooShortError, match="domain-too-short"):
        solve_direct(1.0, 0.0, 1.0, x_max=3.0)
    assert issubclass(DomainTooShortError, OracleError)


def test_bad_arguments():
    with pytest.raises(ValueError):
        solve_direct(0.0)
    with pytest.raises(ValueError):
        solve_direct(1.0, nx=2)
