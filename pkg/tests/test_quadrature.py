import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinjump.model import c_of_mu, weight_rho
from kinjump.quadrature import (QuadratureError, build_grid, cauchy_integral, integrate,
                                principal_value)


def test_polynomial_exactness():
    g = build_grid(1.0)
    assert integrate(lambda m: m * m, g) == pytest.approx(2 / 3, abs=1e-14)
    assert integrate(lambda m: np.ones_like(m), build_grid(2.5)) == pytest.approx(5.0, abs=1e-13)


def test_odd_function_vanishes():
    g = build_grid(1.3)
    assert abs(integrate(lambda m: m**3 * np.exp(m * m), g)) < 1e-13


def test_weighted_moment():
    a = 1.0
    g = build_grid(1 / a)
    val = integrate(lambda m: weight_rho(m, a) * c_of_mu(m, a) ** 2, g)
    assert val == pytest.approx(math.sqrt(math.pi) / 2 + 1, abs=1e-13)
    a = 0.5
    val = integrate(lambda m: weight_rho(m, a), build_grid(1 / a))
    assert val == pytest.approx(math.sqrt(math.pi) + 0.5, abs=1e-13)


def test_refinement_plateau():
    a = 1.0
    f = lambda m: weight_rho(m, a) * c_of_mu(m, a) ** 4
    g = build_grid(1 / a)
    coarse, err = integrate(f, g, error_estimate=True)
    fine = integrate(f, build_grid(1 / a, n_panels=128))
    assert err < 1e-12
    assert abs(fine - coarse) < 1e-12


def test_grid_validation():
    with pytest.raises(ValueError):
        build_grid(1.0, n_panels=5)
    with pytest.raises(ValueError):
        build_grid(-1.0)
    with pytest.raises(ValueError):
        build_grid(1.0, nodes_per_panel=2)


def test_nonfinite_integrand_reported():
    with pytest.raises(QuadratureError):
        integrate(lambda m: np.where(np.abs(m) < 0.5, np.inf, 1.0), build_grid(1.0))


def test_principal_value_examples():
    g = build_grid(1.0)
    assert abs(principal_value(lambda m: np.ones_like(m), 0.0, g)) < 1e-13
    assert principal_value(lambda m: m, 0.0, g) == pytest.approx(2.0, abs=1e-13)
    # closed form: PV int_{-1}^{1} mu^2 / (mu - 1/2) = 1/2 * 2 + 1/4 ln(1/3) ... via the polynomial split
    exact = 1.0 + 0.25 * math.log(0.5 / 1.5)
    assert principal_value(lambda m: m * m, 0.5, g) == pytest.approx(exact, abs=1e-12)


def test_principal_value_matches_plemelj_average():
    g = build_grid(1.0)
    f = lambda m: np.cos(2 * m) * (1 + m)
    pv = principal_value(f, 0.37, g)
    d = 1e-9
    up, dn = cauchy_integral(f, np.array([0.37 + 1j * d, 0.37 - 1j * d]), g)
    assert pv == pytest.approx((0.5 * (up + dn)).real, abs=1e-6)
    assert (up - dn).imag == pytest.approx(2 * math.pi * f(0.37), abs=1e-5)


def test_cauchy_integral_examples():
    g = build_grid(1.0)
    one = lambda m: np.ones_like(m)
    val = cauchy_integral(one, 2j, g)
    assert val == pytest.approx(np.log((1 - 2j) / (-1 - 2j)), abs=1e-12)
    assert val.imag == pytest.approx(0.9272952180016122, abs=1e-12)
    z = 1.7
    val = cauchy_integral(one, z, g)
    assert abs(val.imag) < 1e-15
    assert val.real == pytest.approx(math.log((z - 1) / (z + 1)), abs=1e-12)
    with pytest.raises(ValueError):
        cauchy_integral(one, 0.3, g)


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(0.01, 3).map(lambda y: y) | st.floats(-3, -0.01))
def test_cauchy_schwarz_symmetry(x, y):
    g = build_grid(1.0)
    f = lambda m: np.exp(-m) * (2 + m * m)
    z = complex(x, y)
    assert np.conj(cauchy_integral(f, np.conj(z), g)) == pytest.approx(cauchy_integral(f, z, g), abs=1e-11)
