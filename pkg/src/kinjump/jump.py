"""Temperature and concentration jumps, the continuous-spectrum coefficient
A(eta), and reconstruction of the full half-space solution.

The 2x2 system for (eps_n, eps_T) is assembled from the Laurent coefficients
of ``(1 - a z)^2 h_as(0, z)`` and the large-z moments of V, K and L.  Every
linear quantity is carried as a 4-vector of coefficients over
``(eps_n, eps_T, U, g_T)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dispersion import _c_raw, _rho_raw, det_expanded, kernel_parts, lambda_matrix, minors
from .factorization import (FactorizationData, V_boundary, factorize, laurent_coefficients,
                            x_reciprocal_jump)
from .model import AsymptoticState, _as_gas, h_asymptotic
from .quadrature import GUARD, CutGrid, _from_breaks, build_grid


class DegenerateSystemError(RuntimeError):
    pass


def laurent_lhs_matrix(a: float, omega: float) -> np.ndarray:
    """Rows give the z^0..z^3 coefficients of ``(1 - a z)^2 h_as(0, z)`` as
    linear forms in ``(eps_n, eps_T, U, g_T)``."""
    return np.array([
        [1.0, -0.5, 0.0, 0.0],
        [-2.0 * a, a, 2.0, omega + 1.5],
        [a * a, 1.0 - 0.5 * a * a, -2.0 * a, -a * (omega + 3.0)],
        [0.0, 0.0, 0.0, 1.5 * a * a - 1.0],
    ])


def laurent_lhs_coeffs(state: AsymptoticState, a: float, omega: float) -> np.ndarray:
    """Coefficients of z^0, z^1, z^2, z^3 in ``(1 - a z)^2 h_as(0, z)``."""
    return laurent_lhs_matrix(a, omega) @ state.as_vector()


@dataclass(frozen=True, eq=False)
class SpectralParts:
    """Cut quantities on a set of points eta in (0, alpha)."""

    eta: np.ndarray
    parts: np.ndarray  # P_0, P_1, P_2 with Q~(eta, mu) = P_0 + C(mu) P_1 + C(mu)^2 P_2
    lam: np.ndarray  # principal-value dispersion function
    abs_lam_plus: np.ndarray
    V: np.ndarray  # principal-value V
    W: np.ndarray  # (1/X+ - 1/X-) / (2 pi i (1 - a eta)^2 Q~(eta, eta))

    @property
    def q_diag(self) -> np.ndarray:
        c = self.c
        return self.parts[0] + c * self.parts[1] + c * c * self.parts[2]

    @property
    def c(self) -> np.ndarray:
        return self._c

    _c: np.ndarray = field(default=None, repr=False)


def spectral_parts(eta, fact: FactorizationData) -> SpectralParts:
    """Evaluate the minors, lambda, |lambda+|, V and the jump weight W.

    ``W`` uses ``sin theta / Q~(eta, eta) = pi eta rho / |lambda+|``, which
    removes the apparent pole where Q~(eta, eta) changes sign (theta = pi):
    ``W = -eta^3 rho exp(-V) / ((1 - a eta)^2 |lambda+|)``.
    """
    a = fact.a
    grid = fact.grid
    eta = np.asarray(eta, dtype=float)
    m = minors(eta, a, grid).real
    p = kernel_parts(m, a)
    lam = det_expanded(lambda_matrix(eta, a, grid)).real
    c = _c_raw(eta, a)
    rho = _rho_raw(eta, a)
    q = p[0] + c * p[1] + c * c * p[2]
    abs_lp = np.hypot(lam, math.pi * eta * rho * q)
    v = V_boundary(eta, fact.table) if eta.size else eta
    w = -(eta**3) * rho * np.exp(-v) / ((1.0 - a * eta) ** 2 * abs_lp)
    return SpectralParts(eta, p, lam, abs_lp, v, w, c)


@dataclass(frozen=True)
class KLMoments:
    K1: float
    K0: float
    L1: float
    L0: float
    error: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    raw_imag: float = 0.0

    def as_tuple(self):
        return self.K1, self.K0, self.L1, self.L0


def _poly_coeffs(parts: np.ndarray, a: float):
    """(1 - a z)^2 Q~(eta, z) = A z^2 + B z + D."""
    p0, p1, p2 = parts
    return a * a * p0 - a * p1 + p2, -2.0 * a * p0 + p1, p0


def _kl_from(sp: SpectralParts, weights, a):
    A, B, _ = _poly_coeffs(sp.parts, a)
    eta, W = sp.eta, sp.W
    K1 = -np.sum(weights * W * A)
    K0 = -np.sum(weights * W * (A * eta + B))
    L1 = -np.sum(weights * W * A * eta)
    L0 = -np.sum(weights * W * (A * eta**2 + B * eta))
    return np.array([K1, K0, L1, L0])


def kl_moments(a, fact: FactorizationData, grid: CutGrid | None = None,
               error_estimate: bool = True) -> KLMoments:
    """Coefficients of z^1 and z^0 of K(z) and L(z) at infinity.

    The error estimate compares against the same integrals on a rule with
    every panel halved.
    """
    gas = _as_gas(a)
    table = fact.table
    sp = spectral_parts(table.eta, fact)
    vals = _kl_from(sp, table.weights, gas.a)
    err = np.zeros(4)
    if error_estimate:
        half = _from_breaks(_half_breaks_of(table), table.grid.nodes_per_panel).refined()
        sp2 = spectral_parts(half.nodes, fact)
        err = np.abs(_kl_from(sp2, half.weights, gas.a) - vals)
    raw = _raw_imag(sp, table, gas.a)
    return KLMoments(*map(float, vals), error=tuple(map(float, err)), raw_imag=raw)


def _half_breaks_of(table) -> np.ndarray:
    br = table.grid.breaks
    # the table may sit on a refined rule; recover its panel breaks from node count
    npp = table.grid.nodes_per_panel
    n_panels = table.eta.size // npp
    base = br[br >= 0]
    while base.size - 1 < n_panels:
        mids = 0.5 * (base[:-1] + base[1:])
        nb = np.empty(2 * base.size - 1)
        nb[0::2] = base
        nb[1::2] = mids
        base = nb
    return base


def _raw_imag(sp: SpectralParts, table, a) -> float:
    """Largest |Im| of the moments when W is taken in its defining complex
    form, skipping nodes next to the removable zero of Q~(eta, eta)."""
    jump = x_reciprocal_jump(sp.eta, table)
    q = sp.q_diag
    ok = np.abs(q) > 1e-6 * np.max(np.abs(q))
    raw_w = np.where(ok, jump / (2j * math.pi * (1 - a * sp.eta) ** 2 * np.where(ok, q, 1.0)), 0.0)
    A, B, _ = _poly_coeffs(sp.parts, a)
    w = table.weights
    ints = [np.sum(w * raw_w * A), np.sum(w * raw_w * (A * sp.eta + B)),
            np.sum(w * raw_w * A * sp.eta), np.sum(w * raw_w * (A * sp.eta**2 + B * sp.eta))]
    return float(max(abs(v.imag) for v in ints))


def kl_direct(z, fact: FactorizationData, which: str = "K", sp: SpectralParts | None = None):
    """K(z) or L(z) evaluated by quadrature at z off the cut."""
    table = fact.table
    if sp is None:
        sp = spectral_parts(table.eta, fact)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    A, B, D = _poly_coeffs(sp.parts, fact.a)
    dens = table.weights * sp.W * (sp.eta if which == "L" else 1.0)
    num = A[None, :] * z[:, None] ** 2 + B[None, :] * z[:, None] + D[None, :]
    return (num * dens[None, :] / (sp.eta[None, :] - z[:, None])).sum(axis=1)


def kl_laurent(fact: FactorizationData, n_terms: int = 40, which: str = "K") -> np.ndarray:
    """Coefficients k_j of z^(1-j), j = 0..n_terms-1, in the large-z expansion of
    K(z) (or L(z)), each a moment integral of the jump weight."""
    sp = spectral_parts(fact.table.eta, fact)
    A, B, D = _poly_coeffs(sp.parts, fact.a)
    dens = fact.table.weights * sp.W * (sp.eta if which == "L" else 1.0)
    out = np.empty(n_terms)
    for j in range(n_terms):
        f = A * sp.eta**j
        if j >= 1:
            f = f + B * sp.eta ** (j - 1)
        if j >= 2:
            f = f + D * sp.eta ** (j - 2)
        out[j] = -np.sum(dens * f)
    return out


def kl_series(z, coeffs: np.ndarray):
    """Evaluate sum_j k_j z^(1-j)."""
    z = np.asarray(z, dtype=complex)
    powers = np.arange(coeffs.size)
    return np.sum(coeffs[:, None] * np.atleast_1d(z)[None, :] ** (1 - powers[:, None]), axis=0)


def kl_moments_fit(fact: FactorizationData, radius: float, n_points: int = 128) -> KLMoments:
    """Second route: Laurent coefficients of K, L sampled on |z| = radius."""
    sp = spectral_parts(fact.table.eta, fact)
    k = laurent_coefficients(lambda z: kl_direct(z, fact, "K", sp), radius, (1, 0), n_points)
    l = laurent_coefficients(lambda z: kl_direct(z, fact, "L", sp), radius, (1, 0), n_points)
    return KLMoments(k[0].real, k[1].real, l[0].real, l[1].real)


def printed_determinants(a, omega, fact: FactorizationData, kl: KLMoments) -> dict:
    """The closing determinant formulas as printed (typos included)."""
    V1, V2, V1s, V2s, V3s = fact.V1, fact.V2, fact.V1s, fact.V2s, fact.V3s
    K1, K0, L1, L0 = kl.as_tuple()
    S = V1 + K1
    D = V2s - K0
    g = 1.5 * a * a - 1.0
    delta = S - 2 * a * D
    d_TU = -1 + a * S - a * a * D
    d_nU = -0.5 + 0.5 * a * S - (1 + 0.5 * a * a) * D
    d_Tg = ((1 - a * a * D) * (g * (V2s - L1) - omega - 1.5)
            + (g * V1 - 3 * a - omega) * (2 * a * D - V1 - K1)
            + g * (V3s - L0) * (2 * a - a * a * S))
    d_ng = (-(a + (1 - 0.5 * a * a) * S) * ((3 * a + omega) * D - g * (V3s - L0 + V1 * V2s - V1 * K0))
            - (0.5 + (1 - 0.5 * a * a) * D)
            * (1.5 + omega + g * (L1 - V2s + V1 * V1 + V1 * K1) - (3 * a + omega) * S))
    return {
        "Delta": delta, "Delta_TU": d_TU, "Delta_nU": d_nU, "Delta_Tg": d_Tg, "Delta_ng": d_ng,
        "eps_T_per_U": 2 * d_TU / delta, "eps_n_per_U": 2 * d_nU / delta,
        "eps_T_per_gT": d_Tg / delta, "eps_n_per_gT": d_ng / delta,
    }


@dataclass(frozen=True, eq=False)
class JumpSolution:
    a: float
    U: float
    g_T: float
    eps_n: float
    eps_T: float
    C0: float
    C1: float
    eps_T_per_U: float
    eps_T_per_gT: float
    eps_n_per_U: float
    eps_n_per_gT: float
    C0_row: np.ndarray  # C0 as a linear form in (eps_n, eps_T, U, g_T)
    C1_row: np.ndarray
    system: np.ndarray  # 2x2 matrix acting on (eps_n, eps_T)
    forcing: np.ndarray  # 2x2 matrix acting on (U, g_T)
    delta: float  # determinant in the (eps_T, eps_n) column order
    omega: float
    kl: KLMoments
    fact: FactorizationData
    printed: dict
    diagnostics: dict = field(default_factory=dict)

    @property
    def state(self) -> AsymptoticState:
        return AsymptoticState(self.eps_n, self.eps_T, self.U, self.g_T)

    def with_forcing(self, U: float, g_T: float) -> "JumpSolution":
        return _finish(self.fact, self.kl, self.omega, U, g_T, self.diagnostics)

    def printed_discrepancy(self) -> dict:
        keys = ("eps_T_per_U", "eps_T_per_gT", "eps_n_per_U", "eps_n_per_gT")
        return {k: float(self.printed[k] - getattr(self, k)) for k in keys}


def _finish(fact, kl, omega, U, g_T, diagnostics=None) -> JumpSolution:
    a = fact.a
    P = laurent_lhs_matrix(a, omega)
    C1 = P[3]
    C0 = P[2] + fact.V1 * C1
    K1, K0, L1, L0 = kl.as_tuple()
    e1 = C0 * (fact.V1s - K1) + C1 * (fact.V2s - L1) - P[1]
    e2 = C0 * (fact.V2s - K0) + C1 * (fact.V3s - L0) - P[0]
    rows = np.array([e1, e2])
    M = rows[:, :2]
    F = rows[:, 2:]
    det = np.linalg.det(M)
    scale = np.abs(M).max()
    if abs(det) < 1e-12 * scale * scale:
        raise DegenerateSystemError(f"jump system is singular at a={a} (det={det:.3e})")
    per_unit = np.linalg.solve(M, -F)  # columns: per unit U, per unit g_T
    eps = per_unit @ np.array([U, g_T])
    v = np.array([eps[0], eps[1], U, g_T])
    return JumpSolution(
        a=a, U=U, g_T=g_T, eps_n=float(eps[0]), eps_T=float(eps[1]),
        C0=float(C0 @ v), C1=float(C1 @ v),
        eps_T_per_U=float(per_unit[1, 0]), eps_T_per_gT=float(per_unit[1, 1]),
        eps_n_per_U=float(per_unit[0, 0]), eps_n_per_gT=float(per_unit[0, 1]),
        C0_row=C0, C1_row=C1, system=M, forcing=F,
        delta=float(-det), omega=omega, kl=kl, fact=fact,
        printed=printed_determinants(a, omega, fact, kl),
        diagnostics=dict(diagnostics or {}),
    )


def solve_jumps(a, U: float = 0.0, g_T: float = 1.0, grid: CutGrid | None = None,
                fact: FactorizationData | None = None) -> JumpSolution:
    """Jump coefficients for forcing (U, g_T), plus the per-unit responses."""
    gas = _as_gas(a)
    if not gas.a > 0:
        raise ValueError("the analytic pipeline needs a > 0")
    if grid is None:
        grid = build_grid(gas.alpha)
    if fact is None:
        fact = factorize(gas, grid)
    kl = kl_moments(gas, fact)
    return _finish(fact, kl, gas.omega, U, g_T)


@dataclass(frozen=True, eq=False)
class SpectralDensity:
    """A(eta) sampled on the table nodes, with on-demand evaluation elsewhere."""

    solution: JumpSolution
    eta: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    G: np.ndarray  # eta rho A / lambda = (C0 + C1 eta) W
    sp: SpectralParts

    def __call__(self, eta):
        return spectral_density_at(eta, self.solution)


def spectral_density_at(eta, sol: JumpSolution, sp: SpectralParts | None = None):
    if sp is None:
        sp = spectral_parts(eta, sol.fact)
    a = sol.a
    e = sp.eta
    # A = lambda G / (eta rho); rho cancels against the factor inside W
    return -sp.lam * (sol.C0 + sol.C1 * e) * e**2 * np.exp(-sp.V) / ((1 - a * e) ** 2 * sp.abs_lam_plus)


def spectral_density(a, sol: JumpSolution, grid: CutGrid | None = None) -> SpectralDensity:
    table = sol.fact.table
    sp = spectral_parts(table.eta, sol.fact)
    vals = spectral_density_at(table.eta, sol, sp)
    G = (sol.C0 + sol.C1 * table.eta) * sp.W
    return SpectralDensity(sol, table.eta, table.weights, vals, G, sp)


def reconstruct_h(x, mu, a, sol: JumpSolution, density: SpectralDensity,
                  state: AsymptoticState | None = None):
    """Full solution h(x, mu) for x >= 0 and mu in (-alpha, alpha).

    Scalar x gives an array over mu; a 1-D x gives shape (len(x), len(mu)).
    ``state`` overrides the far-field parameters (used for sensitivity checks);
    the continuous-spectrum part always comes from ``density``.
    """
    x_scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs < 0):
        raise ValueError("x must be non-negative")
    scalar = np.ndim(mu) == 0
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    alpha = 1.0 / sol.a
    if np.any(np.abs(mu) >= alpha):
        raise ValueError("mu must lie inside the cut")
    if state is None:
        state = sol.state
    eta, w = density.eta, density.weights
    c = _c_raw(mu, sol.a)
    basis = np.stack([np.ones_like(c), c, c * c])
    pos = mu > 0
    neg = ~pos
    if np.any(neg):
        kern_neg = w[:, None] / (eta[:, None] - mu[neg][None, :])
    if np.any(pos):
        m = mu[pos]
        sp = spectral_parts(m, sol.fact)
        G0 = (sol.C0 + sol.C1 * m) * sp.W
        A0 = spectral_density_at(m, sol, sp)
        diff = eta[:, None] - m[None, :]
        near = np.abs(diff) < GUARD * alpha
        with np.errstate(divide="ignore"):
            inv = np.where(near, 0.0, 1.0 / np.where(near, 1.0, diff))
        logt = np.log((alpha - m) / m)
        # a node within the guard of mu contributes w_k F'(mu) to the subtracted sum
        k_hit, j_hit = np.nonzero(near)
        if k_hit.size:
            step = 1e-6 * m[j_hit]
            e_pm = np.concatenate([m[j_hit] + step, m[j_hit] - step])
            sp_pm = spectral_parts(e_pm, sol.fact)
            G_pm = (sol.C0 + sol.C1 * e_pm) * sp_pm.W
    out = np.empty((xs.size, mu.size))
    for n, xv in enumerate(xs):
        F = density.sp.parts * (np.exp(-xv / eta) * density.G)[None, :]  # 3 x n_eta
        row = np.asarray(h_asymptotic(xv, mu, state, sol.a), dtype=float).copy()
        if np.any(neg):
            row[neg] += np.sum(basis[:, neg] * (F @ kern_neg), axis=0)
        if np.any(pos):
            e0 = np.exp(-xv / m)
            F0 = sp.parts * (e0 * G0)[None, :]
            # sum_k w_k (F_k - F0) / (eta_k - mu), PV by subtraction
            ints = (F * w[None, :]) @ inv - F0 * (w @ inv)[None, :] + F0 * logt[None, :]
            if k_hit.size:
                F_pm = sp_pm.parts * (np.exp(-xv / e_pm) * G_pm)[None, :]
                nh = k_hit.size
                dF = (F_pm[:, :nh] - F_pm[:, nh:]) / (2 * step)
                np.add.at(ints.T, j_hit, (w[k_hit] * dF).T)
            row[pos] += np.sum(basis[:, pos] * ints, axis=0) + e0 * A0
        out[n] = row
    if x_scalar:
        out = out[0]
        return out[0] if scalar else out
    return out[:, 0] if scalar else out


def probe_points(alpha: float, n_probe: int) -> np.ndarray:
    """Midpoints of ``n_probe`` equal cells of (0, alpha).

    h_as(0, mu) grows like C^2 toward the endpoint and is cancelled by the
    spectral terms, so the attainable absolute residual grows like
    ``1e-10 C^2``; the last midpoint sits at C ~ 2 n_probe alpha.
    """
    return alpha * (np.arange(n_probe) + 0.5) / n_probe


def boundary_residual(a, sol: JumpSolution, density: SpectralDensity, n_probe: int = 200,
                      state: AsymptoticState | None = None) -> float:
    """sup |h(0, mu)| over probe points in (0, alpha), normalized by the forcing scale."""
    s = state or sol.state
    scale = max(abs(s.eps_T), abs(s.eps_n), abs(2 * s.U), abs(s.g_T))
    if scale == 0:
        return 0.0
    mu = probe_points(1.0 / sol.a, n_probe)
    h0 = reconstruct_h(0.0, mu, a, sol, density, state=state)
    return float(np.max(np.abs(h0)) / scale)


def m_representation_residual(sol: JumpSolution, z) -> float:
    """max |C0 K(z) + C1 L(z) - [-(1-az)^2 h_as(0,z) + (C0 + C1 z)/X(z)]| / |z|,
    i.e. agreement of the two expressions for M(z) off the cut."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    fact = sol.fact
    sp = spectral_parts(fact.table.eta, fact)
    m_kl = sol.C0 * kl_direct(z, fact, "K", sp) + sol.C1 * kl_direct(z, fact, "L", sp)
    p = laurent_lhs_coeffs(sol.state, sol.a, sol.omega)
    poly = p[0] + p[1] * z + p[2] * z**2 + p[3] * z**3
    m_rh = -poly + (sol.C0 + sol.C1 * z) / fact.X(z)
    return float(np.max(np.abs(m_kl - m_rh) / np.maximum(1.0, np.abs(z))))
