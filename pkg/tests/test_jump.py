import math

import numpy as np
import pytest

from kinjump.jump import (DegenerateSystemError, boundary_residual, kl_direct, kl_moments,
                          kl_moments_fit, laurent_lhs_coeffs, laurent_lhs_matrix,
                          m_representation_residual, probe_points, reconstruct_h, solve_jumps,
                          spectral_density, spectral_density_at, spectral_parts)
from kinjump.model import AsymptoticState, gas_model, h_asymptotic, transport_residual, weight_rho


def test_laurent_lhs_zero_state():
    assert np.all(laurent_lhs_coeffs(AsymptoticState(0, 0, 0, 0), 0.7, 0.3) == 0)


def test_laurent_lhs_density_only():
    a = 0.7
    got = laurent_lhs_coeffs(AsymptoticState(1, 0, 0, 0), a, 0.3)
    assert np.allclose(got, [1, -2 * a, a * a, 0], atol=0)


@pytest.mark.parametrize("a", [0.1, 1.0, 2.0])
def test_laurent_lhs_matches_sampling(a):
    gas = gas_model(a)
    rng = np.random.default_rng(4)
    for _ in range(5):
        state = AsymptoticState(*rng.normal(size=4))
        # for mu > 0, C = mu / (1 - a mu), so (1 - a mu)^2 h_as(0, mu) is a cubic
        mu = gas.alpha * np.array([0.1, 0.3, 0.5, 0.7])
        vals = (1 - a * mu) ** 2 * h_asymptotic(0.0, mu, state, gas)
        cubic = np.linalg.solve(np.vander(mu, 4, increasing=True), vals)
        assert np.allclose(cubic, laurent_lhs_coeffs(state, a, gas.omega), rtol=1e-9, atol=1e-9)
    assert laurent_lhs_matrix(a, gas.omega).shape == (4, 4)


def test_superposition(pipe):
    gas, grid, fact, sol_u, sol_g = pipe(1.0)
    both = sol_g.with_forcing(1.0, 1.0)
    assert both.eps_T == pytest.approx(sol_u.eps_T + sol_g.eps_T, abs=1e-12)
    assert both.eps_n == pytest.approx(sol_u.eps_n + sol_g.eps_n, abs=1e-12)
    scaled = sol_g.with_forcing(-2.5, 0.0)
    assert scaled.eps_T == pytest.approx(-2.5 * sol_u.eps_T, abs=1e-12)


def test_zero_forcing(pipe):
    gas, _, _, _, sol_g = pipe(1.0)
    zero = sol_g.with_forcing(0.0, 0.0)
    assert zero.eps_T == 0.0 and zero.eps_n == 0.0
    assert zero.C0 == 0.0 and zero.C1 == 0.0
    dens = spectral_density(gas, zero)
    assert np.all(dens.values == 0)
    assert boundary_residual(gas, zero, dens) == 0.0


def test_solve_jumps_standalone():
    direct = solve_jumps(1.0, 0.0, 1.0)
    assert direct.eps_T_per_gT == pytest.approx(0.575677, abs=2e-6)
    assert direct.eps_n_per_U == pytest.approx(-1.39079, abs=2e-5)
    with pytest.raises(ValueError):
        solve_jumps(0.0)
    assert issubclass(DegenerateSystemError, RuntimeError)


def test_kl_moments_real(pipe):
    gas, _, fact, sol_u, _ = pipe(1.0)
    kl = sol_u.kl
    assert kl.raw_imag < 1e-9
    assert max(kl.error) < 1e-8
    assert kl_moments(gas, fact, error_estimate=False).as_tuple() == pytest.approx(kl.as_tuple(), rel=1e-14)


def test_kl_direct_fit(pipe):
    _, _, fact, sol_u, _ = pipe(1.0)
    ref = np.array(sol_u.kl.as_tuple())
    fit = np.array(kl_moments_fit(fact, 1e3).as_tuple())
    assert np.abs(fit / ref - 1).max() < 1e-5
    # K(z) ~ K1 z + K0 along the negative axis
    z = -1e3
    k = kl_direct(z, fact, "K")[0]
    assert (k - ref[1]) / z == pytest.approx(ref[0], rel=1e-3)


def test_m_representation(pipe):
    _, _, _, sol_u, sol_g = pipe(1.0)
    z = np.array([-0.5, 2.0, 0.5 + 0.5j, -3j])
    assert m_representation_residual(sol_u, z) < 1e-6
    assert m_representation_residual(sol_g, z) < 1e-6


def test_spectral_parts_weight(pipe):
    gas, _, fact, _, _ = pipe(1.0)
    eta = gas.alpha * np.array([0.2, 0.5, 0.8])
    sp = spectral_parts(eta, fact)
    expect = -(eta**3) * weight_rho(eta, gas.a) * np.exp(-sp.V) / ((1 - gas.a * eta) ** 2 * sp.abs_lam_plus)
    assert np.allclose(sp.W, expect, rtol=1e-12)
    # |lambda+| = |lambda_PV + i pi eta rho Q~|
    lam_plus = sp.lam + 1j * math.pi * eta * weight_rho(eta, gas.a) * sp.q_diag
    assert np.allclose(sp.abs_lam_plus, np.abs(lam_plus), rtol=1e-14)


def test_spectral_density_definition(pipe):
    gas, _, fact, _, sol_g = pipe(1.0)
    eta = np.array([0.5])
    sp = spectral_parts(eta, fact)
    A = spectral_density_at(eta, sol_g, sp)
    assert np.isrealobj(A)
    # eta rho A / lambda = (C0 + C1 eta) W
    lhs = eta * weight_rho(eta, gas.a) * A / sp.lam
    assert lhs[0] == pytest.approx(((sol_g.C0 + sol_g.C1 * eta) * sp.W)[0], rel=1e-12)


def test_spectral_density_bounded_near_zero(pipe):
    _, _, _, _, sol_g = pipe(1.0)
    eta = np.geomspace(1e-4, 1e-2, 30)
    A = spectral_density_at(eta, sol_g)
    assert np.all(np.isfinite(A))
    # no pole at the origin: A stays at the size it has away from it
    ref = np.abs(spectral_density_at(np.array([0.1, 0.2, 0.3]), sol_g)).max()
    assert np.abs(A).max() < 2 * ref
    assert np.abs(np.diff(A)).max() < 1e-2 * ref


def test_reconstruction_decays(pipe):
    gas, _, _, _, _ = pipe(1.0)
    sol, dens = _density(1.0)
    mu = np.linspace(-0.9, 0.9, 19) * gas.alpha
    x = 10 * gas.alpha
    diff = reconstruct_h(x, mu, gas, sol, dens) - h_asymptotic(x, mu, sol.state, gas)
    scale = np.sum(dens.weights * np.abs(dens.values))
    assert np.abs(diff).max() < math.exp(-10) * scale


def test_reconstruction_shapes_and_domain(pipe):
    gas, _, _, _, _ = pipe(1.0)
    sol, dens = _density(1.0)
    mu = np.array([-0.5, 0.5])
    assert reconstruct_h(np.array([0.0, 1.0, 2.0]), mu, gas, sol, dens).shape == (3, 2)
    assert np.ndim(reconstruct_h(1.0, 0.3, gas, sol, dens)) == 0
    with pytest.raises(ValueError):
        reconstruct_h(-1.0, mu, gas, sol, dens)
    with pytest.raises(ValueError):
        reconstruct_h(1.0, np.array([1.0]), gas, sol, dens)


def test_reconstruction_solves_transport(pipe):
    gas, grid, _, _, _ = pipe(1.0)
    sol, dens = _density(1.0)

    def h(x, mu):
        return reconstruct_h(x, mu, gas, sol, dens)

    rng = np.random.default_rng(5)
    for x in rng.uniform(0.2, 3.0, 3):
        mu = gas.alpha * rng.uniform(-0.9, 0.9, 4)
        r = transport_residual(h, x, mu, gas, grid, dx=1e-3)
        assert np.abs(r).max() < 1e-5


def test_boundary_closure(pipe):
    gas = gas_model(1.0)
    sol, dens = _density(1.0)
    r = boundary_residual(gas, sol, dens)
    assert r < 1e-3
    s = sol.state
    bumped = AsymptoticState(s.eps_n, 1.1 * s.eps_T, s.U, s.g_T)
    assert boundary_residual(gas, sol, dens, state=bumped) > 10 * r


def test_probe_points():
    p = probe_points(2.0, 4)
    assert np.allclose(p, [0.25, 0.75, 1.25, 1.75])


def _density(a):
    from conftest import density
    return density(a, "gT")
