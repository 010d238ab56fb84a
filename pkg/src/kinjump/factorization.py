"""Canonical solution of the homogeneous Riemann-Hilbert problem
``X+/X- = lambda+/lambda-`` on (0, alpha):

    X(z) = z^-2 exp V(z),   V(z) = (1/pi) int_0^alpha (theta(mu) - 2 pi) / (mu - z) dmu.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dispersion import ThetaTable, theta_table
from .model import _as_gas
from .quadrature import GUARD, CutGrid, log_kernel


def _density_nodes(table: ThetaTable) -> np.ndarray:
    return (table.theta - 2 * math.pi) / math.pi


def _density_at(table: ThetaTable, x) -> np.ndarray:
    return (table.exact(x) - 2 * math.pi) / math.pi


def _subtracted(table: ThetaTable, x0, z):
    """sum_k w_k (g_k - g(x0)) / (mu_k - z) with a derivative guard."""
    mu, w = table.eta, table.weights
    g = _density_nodes(table)
    g0 = _density_at(table, x0)
    dg0 = table.spline(x0, 1) / math.pi
    diff = mu[None, :] - z[:, None]
    near = np.abs(mu[None, :] - x0[:, None]) < GUARD * table.alpha
    with np.errstate(divide="ignore", invalid="ignore"):
        q = (g[None, :] - g0[:, None]) / diff
    if np.any(near):
        q = np.where(near, dg0[:, None] * np.ones_like(diff), q)
    return q @ w, g0


def V_of_z(z, table: ThetaTable):
    """V(z) for z off [0, alpha]."""
    scalar = np.ndim(z) == 0
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    alpha = table.alpha
    if np.any((z.imag == 0) & (z.real >= 0) & (z.real <= alpha)):
        raise ValueError("z on [0, alpha]; use V_boundary")
    near = (np.abs(z.imag) < 0.1 * alpha) & (z.real > 0) & (z.real < alpha)
    out = np.empty(z.shape, dtype=complex)
    far = ~near
    if np.any(far):
        g = _density_nodes(table)
        out[far] = (g[None, :] / (table.eta[None, :] - z[far][:, None])) @ table.weights
    if np.any(near):
        s, g0 = _subtracted(table, z[near].real, z[near])
        out[near] = s + g0 * log_kernel(z[near], 0.0, alpha)
    return out[0] if scalar else out


def V_boundary(mu, table: ThetaTable, side: int = 0):
    """Principal value V(mu) on (0, alpha) (side=0) or ``V^{+-} = V +- i(theta - 2 pi)``."""
    scalar = np.ndim(mu) == 0
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    alpha = table.alpha
    if np.any((mu <= 0) | (mu >= alpha)):
        raise ValueError("mu must lie in (0, alpha)")
    s, g0 = _subtracted(table, mu, mu.astype(complex))
    val = s.real + g0 * np.log((alpha - mu) / mu)
    if side:
        val = val + side * 1j * math.pi * g0
    return val[0] if scalar else val


def X_of_z(z, table: ThetaTable):
    z = np.asarray(z, dtype=complex)
    return np.exp(V_of_z(z, table)) / z**2


def X_boundary(mu, table: ThetaTable, side: int):
    mu = np.asarray(mu, dtype=float)
    return np.exp(V_boundary(mu, table, side)) / mu**2


def laurent_coefficients(func, radius: float, orders, n_points: int = 128):
    """Coefficients ``c_k`` of ``func(z) = sum_k c_k z^k`` for |z| = radius,
    by the trapezoid rule on the circle (exponentially accurate for functions
    analytic outside a disc of smaller radius)."""
    phi = 2 * math.pi * (np.arange(n_points) + 0.5) / n_points
    z = radius * np.exp(1j * phi)
    vals = np.asarray(func(z))
    return np.array([np.mean(vals * z ** (-k)) for k in orders])


def v_moments(table: ThetaTable) -> tuple[float, float, float]:
    """``V_n = -(1/pi) int_0^alpha tau^(n-1) (theta(tau) - 2 pi) dtau`` for n = 1, 2, 3."""
    g = table.theta - 2 * math.pi
    return tuple(float(-np.sum(table.weights * table.eta ** (n - 1) * g) / math.pi) for n in (1, 2, 3))


def v_moments_fit(table: ThetaTable, radius: float | None = None) -> tuple[float, float, float]:
    """V_1..V_3 read off the large-|z| Laurent expansion of V(z)."""
    if radius is None:
        radius = 4.0 * table.alpha
    c = laurent_coefficients(lambda z: V_of_z(z, table), radius, (-1, -2, -3))
    return tuple(float(v.real) for v in c)


def v_star(V1: float, V2: float, V3: float) -> tuple[float, float, float]:
    """Coefficients of ``exp(-V(z)) = 1 + V1*/z + V2*/z^2 + V3*/z^3 + ...``."""
    return (-V1, -V2 + 0.5 * V1 * V1, -V3 + V1 * V2 - V1**3 / 6.0)


def x_reciprocal_jump(mu, table: ThetaTable):
    """``1/X+ - 1/X- = -2 i mu^2 exp(-V(mu)) sin theta(mu)``."""
    mu = np.asarray(mu, dtype=float)
    v = V_boundary(mu, table)
    th = table.exact(mu)
    return -2j * mu**2 * np.exp(-v) * np.sin(th - 2 * math.pi)


def x_reciprocal_jump_direct(mu, table: ThetaTable):
    return 1.0 / X_boundary(mu, table, 1) - 1.0 / X_boundary(mu, table, -1)


@dataclass(frozen=True, eq=False)
class FactorizationData:
    a: float
    V1: float
    V2: float
    V3: float
    V1s: float
    V2s: float
    V3s: float
    table: ThetaTable

    @property
    def grid(self) -> CutGrid:
        return self.table.grid

    def V(self, z):
        return V_of_z(z, self.table)

    def X(self, z):
        return X_of_z(z, self.table)


def factorize(a, grid: CutGrid, n_samples: int = 0) -> FactorizationData:
    gas = _as_gas(a)
    table = theta_table(gas, grid, n_samples)
    V1, V2, V3 = v_moments(table)
    return FactorizationData(gas.a, V1, V2, V3, *v_star(V1, V2, V3), table)
