"""Closed-form model primitives for the linearized BGK equation with an
affine, speed-dependent collision frequency.

Every routine here works with the *rescaled* slope ``a`` (the physical slope
multiplied by sqrt(pi)); :func:`rescale_slope` is the only conversion point.
The half-length of the velocity cut is ``alpha = 1/a``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable

import numpy as np
from scipy import integrate as _integrate

SQRT_PI = math.sqrt(math.pi)
K_BOLTZMANN = 1.380649e-23


class DomainError(ValueError):
    """Evaluation requested outside the velocity cut (-alpha, alpha)."""


def rescale_slope(a_physical: float) -> float:
    if a_physical < 0:
        raise ValueError(f"slope must be non-negative, got {a_physical}")
    return SQRT_PI * a_physical


def kernel_coeffs(a: float) -> tuple[float, float, float, float]:
    """Return ``(r0, r1, r2, beta)`` of the projection kernel."""
    if a < 0:
        raise ValueError(f"slope must be non-negative, got {a}")
    r0 = 1.0 / (a + SQRT_PI)
    r1 = 2.0 / (2.0 * a + SQRT_PI)
    r2 = 4.0 * (a + SQRT_PI) / (4.0 * a * a + 7.0 * SQRT_PI * a + 2.0 * math.pi)
    beta = (2.0 * a + SQRT_PI) / (2.0 * (a + SQRT_PI))
    return r0, r1, r2, beta


def weight_moments(a: float) -> tuple[float, float, float, float, float]:
    """Moments ``int C^n rho dmu`` for n = 0..4 (odd ones vanish)."""
    return (SQRT_PI + a, 0.0, 0.5 * SQRT_PI + a, 0.0, 0.75 * SQRT_PI + 2.0 * a)


@dataclass(frozen=True)
class PhysicalScaling:
    """SI description of the gas and the wall.

    ``saturated_density`` is a linear (1-D) number density.
    """

    surface_temperature: float
    saturated_density: float
    molecule_mass: float
    base_frequency: float

    def __post_init__(self):
        for name in ("surface_temperature", "saturated_density", "molecule_mass", "base_frequency"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")

    @property
    def beta_s(self) -> float:
        return self.molecule_mass / (2.0 * K_BOLTZMANN * self.surface_temperature)

    @property
    def thermal_velocity(self) -> float:
        return 1.0 / math.sqrt(self.beta_s)

    @property
    def mean_free_path(self) -> float:
        return self.thermal_velocity / self.base_frequency

    @property
    def relaxation_time(self) -> float:
        return 1.0 / self.base_frequency

    def to_dimensionless(self, x=None, velocity=None, temperature_gradient=None) -> dict:
        """Convert SI quantities: x [m] -> x/l, velocity [m/s] -> v/v_T,
        temperature gradient [K/m] -> d ln T/dx in units of 1/l."""
        out = {}
        if x is not None:
            out["x"] = np.asarray(x) / self.mean_free_path
        if velocity is not None:
            out["U"] = np.asarray(velocity) / self.thermal_velocity
        if temperature_gradient is not None:
            out["g_T"] = np.asarray(temperature_gradient) * self.mean_free_path / self.surface_temperature
        return out

    def from_dimensionless(self, x=None, U=None, g_T=None, eps_T=None, eps_n=None) -> dict:
        out = {}
        if x is not None:
            out["x"] = np.asarray(x) * self.mean_free_path
        if U is not None:
            out["velocity"] = np.asarray(U) * self.thermal_velocity
        if g_T is not None:
            out["temperature_gradient"] = np.asarray(g_T) * self.surface_temperature / self.mean_free_path
        if eps_T is not None:
            out["wall_gas_temperature"] = self.surface_temperature * (1.0 + np.asarray(eps_T))
        if eps_n is not None:
            out["wall_gas_density"] = self.saturated_density * (1.0 + np.asarray(eps_n))
        return out


@dataclass(frozen=True)
class AsymptoticState:
    """Free parameters of the Chapman-Enskog far field.

    The linearization assumes ``|U| << 1`` and ``|g_T| << 1``; nothing here
    enforces it.
    """

    eps_n: float = 0.0
    eps_T: float = 0.0
    U: float = 0.0
    g_T: float = 0.0

    def as_vector(self) -> np.ndarray:
        return np.array([self.eps_n, self.eps_T, self.U, self.g_T], dtype=float)


@dataclass(frozen=True)
class GasModel:
    a: float
    r0: float = field(init=False)
    r1: float = field(init=False)
    r2: float = field(init=False)
    beta: float = field(init=False)

    def __post_init__(self):
        if not self.a >= 0:
            raise ValueError(f"slope must be non-negative, got {self.a}")
        r0, r1, r2, beta = kernel_coeffs(self.a)
        object.__setattr__(self, "r0", r0)
        object.__setattr__(self, "r1", r1)
        object.__setattr__(self, "r2", r2)
        object.__setattr__(self, "beta", beta)

    @property
    def alpha(self) -> float:
        return math.inf if self.a == 0 else 1.0 / self.a

    @cached_property
    def omega(self) -> float:
        return omega(self.a)

    def c_of_mu(self, mu):
        return c_of_mu(mu, self.a)

    def rho(self, mu):
        return weight_rho(mu, self.a)


@lru_cache(maxsize=64)
def gas_model(a: float) -> GasModel:
    return GasModel(float(a))


def _as_gas(a) -> GasModel:
    return a if isinstance(a, GasModel) else gas_model(float(a))


def _check_inside(mu, a):
    if a > 0 and np.any(np.abs(mu) >= 1.0 / a):
        raise DomainError(f"|mu| must be < alpha = {1.0 / a}")


def c_of_mu(mu, a: float):
    """Dimensionless velocity ``C = mu / (1 - a|mu|)``; odd and increasing."""
    mu = np.asarray(mu, dtype=float)
    _check_inside(mu, a)
    out = mu / (1.0 - a * np.abs(mu))
    return out if out.ndim else float(out)


def mu_of_c(c, a: float):
    c = np.asarray(c, dtype=float)
    out = c / (1.0 + a * np.abs(c))
    return out if out.ndim else float(out)


def weight_rho(mu, a: float):
    """``rho(mu) = exp(-C^2) / (1 - a|mu|)^3``, clamped to 0 for |mu| >= alpha."""
    mu = np.asarray(mu, dtype=float)
    d = 1.0 - a * np.abs(mu)
    inside = d > 0
    dd = np.where(inside, d, 1.0)
    c = mu / dd
    out = np.where(inside, np.exp(-c * c) / dd**3, 0.0)
    return out if out.ndim else float(out)


def weight_c(c, a: float):
    """Weight of the same inner product in the C variable: (1 + a|C|) exp(-C^2)."""
    c = np.asarray(c, dtype=float)
    return (1.0 + a * np.abs(c)) * np.exp(-c * c)


def kernel_q(mu, mu_prime, a: float):
    gas = _as_gas(a)
    c = np.asarray(c_of_mu(mu, gas.a))
    cp = np.asarray(c_of_mu(mu_prime, gas.a))
    b = gas.beta
    out = gas.r0 + gas.r1 * c * cp + gas.r2 * (c * c - b) * (cp * cp - b)
    return out if np.ndim(out) else float(out)


def invariant_basis(mu, a: float) -> np.ndarray:
    """Rows ``1, C, C^2 - beta`` evaluated at ``mu`` (shape ``(3, *mu.shape)``)."""
    gas = _as_gas(a)
    c = np.asarray(c_of_mu(mu, gas.a))
    return np.stack([np.ones_like(c), c, c * c - gas.beta])


def project(h: Callable, a: float, grid) -> Callable:
    """Collision projection ``(K h)(mu) = int rho(mu') q(mu, mu') h(mu') dmu'``.

    ``h`` is a vectorized function of mu; ``grid`` a :class:`CutGrid`.
    Returns the projected function, which lies in span{1, C, C^2 - beta}.
    """
    gas = _as_gas(a)
    coeffs = projection_coefficients(h(grid.nodes), gas, grid)

    def kh(mu):
        return np.tensordot(coeffs, invariant_basis(mu, gas), axes=(0, 0))

    kh.coefficients = coeffs
    return kh


def projection_coefficients(values, a, grid) -> np.ndarray:
    """``r_j <b_j, h>_rho`` for samples ``values`` of h on the grid nodes.

    ``values`` may carry extra trailing axes.
    """
    gas = _as_gas(a)
    basis = invariant_basis(grid.nodes, gas)
    wr = grid.weights * weight_rho(grid.nodes, gas.a)
    r = np.array([gas.r0, gas.r1, gas.r2])
    values = np.asarray(values)
    mom = np.tensordot(basis * wr, values, axes=(1, 0))
    return r.reshape((3,) + (1,) * (mom.ndim - 1)) * mom


def inner(f, g, a: float, grid) -> float:
    """Weighted inner product ``<f, g>_rho`` on the cut."""
    mu = grid.nodes
    return float(np.sum(grid.weights * weight_rho(mu, a) * f(mu) * g(mu)))


def _omega_c_integrand(c, a):
    return np.exp(-c * c) * c * c * (c * c - 1.5) / (1.0 + a * abs(c))


def omega_c_form(a: float) -> float:
    """Velocity-variable form of omega(a), valid for every a >= 0."""
    if a < 0:
        raise ValueError("slope must be non-negative")
    val, err = _integrate.quad(_omega_c_integrand, 0.0, np.inf, args=(a,), epsabs=1e-14, epsrel=1e-13, limit=200)
    return 4.0 / SQRT_PI * val


def omega_mu_form(a: float, grid=None) -> float:
    """Cut-variable form of omega(a); needs a > 0."""
    if not a > 0:
        raise ValueError("the cut form of omega needs a > 0; use omega_c_form")
    if grid is None:
        from .quadrature import default_grid

        grid = default_grid(1.0 / a)
    mu = grid.nodes
    c = c_of_mu(mu, a)
    d = 1.0 - a * np.abs(mu)
    vals = np.exp(-c * c) * c * c * (c * c - 1.5) / d
    return float(2.0 / SQRT_PI * np.sum(grid.weights * vals))


def omega(a: float) -> float:
    if a < 0:
        raise ValueError("slope must be non-negative")
    if a == 0:
        return 0.0
    return omega_c_form(a)


def h_asymptotic(x, mu, state: AsymptoticState, a: float):
    """Chapman-Enskog far field: an exact solution for any parameter values."""
    gas = _as_gas(a)
    x = np.asarray(x, dtype=float)
    mu = np.asarray(mu, dtype=float)
    c = np.asarray(c_of_mu(mu, gas.a))
    out = (
        state.eps_n
        + state.eps_T
        + (2.0 * state.U + state.g_T * gas.omega) * c
        + (c * c - 1.5) * (state.eps_T + state.g_T * (x - mu))
    )
    return out if np.ndim(out) else float(out)


def partial_solutions(a: float) -> list[Callable]:
    """The four discrete-spectrum solutions ``h(x, mu)``."""
    gas = _as_gas(a)

    def h0(x, mu):
        return np.ones(np.broadcast(np.asarray(x), np.asarray(mu)).shape)

    def h1(x, mu):
        return np.asarray(c_of_mu(mu, gas.a)) + 0 * np.asarray(x)

    def h2(x, mu):
        c = np.asarray(c_of_mu(mu, gas.a))
        return c * c - 0.5 + 0 * np.asarray(x)

    def h3(x, mu):
        c = np.asarray(c_of_mu(mu, gas.a))
        return (np.asarray(x) - mu) * (c * c - 1.5)

    return [h0, h1, h2, h3]


def transport_residual(h: Callable, x, mu, a: float, grid=None, dx: float = 1e-4):
    """``mu dh/dx + h - K h`` at scalar ``x`` and points ``mu``.

    ``h(x, mu)`` must be vectorized in ``mu``.  The x-derivative is a
    fourth-order central difference.
    """
    gas = _as_gas(a)
    if grid is None:
        from .quadrature import default_grid

        grid = default_grid(gas.alpha)
    mu = np.asarray(mu, dtype=float)
    x = float(x)
    dh = (-h(x + 2 * dx, mu) + 8 * h(x + dx, mu) - 8 * h(x - dx, mu) + h(x - 2 * dx, mu)) / (12 * dx)
    coeffs = projection_coefficients(h(x, grid.nodes), gas, grid)
    kh = np.tensordot(coeffs, invariant_basis(mu, gas), axes=(0, 0))
    return mu * dh + h(x, mu) - kh
