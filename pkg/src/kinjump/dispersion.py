"""Dispersion matrix, dispersion function and its boundary values on the cut.

With ``t_n(z) = z int C^n rho / (mu - z) dmu`` the characteristic equation
reduces to a 3x3 system ``Lambda(z) n = rho (1, C, C^2)``.  Writing
``t_n = s_n - M_n`` with ``s_n(z) = int C^n rho mu / (mu - z) dmu`` and the
exact weight moments ``M_n``, the constant part of ``Lambda`` cancels
identically (that is the conservation of mass, momentum and energy), so the
corrected matrix is assembled from ``s_n`` alone.  This keeps the fourth
order zero of ``det Lambda`` at infinity visible in double precision.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .model import _as_gas, weight_moments
from .quadrature import GUARD, CutGrid, QuadratureError, cauchy_integral, principal_value

# (lambda_11 bracket coefficient, t-index in lambda_22, t-index in lambda_32)
VARIANTS = {
    "corrected": ("r0", 2, 3),
    "printed": ("r2", 3, 3),
    "row3_t2": ("r0", 3, 2),
}


class DispersionError(RuntimeError):
    pass


def _c_raw(mu, a):
    return mu / (1.0 - a * np.abs(mu))


def _rho_raw(mu, a):
    d = 1.0 - a * np.abs(mu)
    inside = d > 0
    dd = np.where(inside, d, 1.0)
    c = mu / dd
    return np.where(inside, np.exp(-c * c) / dd**3, 0.0)


def _s_density(n, a):
    """``C^n rho mu`` and its derivative in mu."""

    def f(mu):
        mu = np.asarray(mu, dtype=float)
        return _c_raw(np.where(np.abs(mu) * a < 1, mu, 0.0), a) ** n * _rho_raw(mu, a) * mu

    def df(mu):
        mu = np.asarray(mu, dtype=float)
        inside = np.abs(mu) * a < 1
        m = np.where(inside, mu, 0.0)
        d = 1.0 - a * np.abs(m)
        c = m / d
        dc = 1.0 / d**2
        r = _rho_raw(m, a)
        dr = r * (-2.0 * c * dc + 3.0 * a * np.sign(m) / d)
        cn = c**n
        dcn = n * c ** (n - 1) * dc if n > 0 else 0.0 * c
        return np.where(inside, dcn * r * m + cn * dr * m + cn * r, 0.0)

    return f, df


def s_moments(z, a, grid: CutGrid, side: int = 0) -> np.ndarray:
    """``s_n(z)`` for n = 0..4, shape ``(5, *z.shape)``.

    For real z inside the cut, ``side`` selects the principal value (0) or the
    boundary value from above (+1) / below (-1):
    ``s_n^{+-} = s_n +- i pi z C^n(z) rho(z)``.
    """
    gas = _as_gas(a)
    z = np.asarray(z)
    alpha = gas.alpha
    on_cut = (not np.iscomplexobj(z) or np.all(z.imag == 0)) and np.all(np.abs(z.real) < alpha)
    out = []
    if on_cut:
        x = np.asarray(z.real, dtype=float)
        if np.any(alpha - np.abs(x) < 1e-9 * alpha):
            raise DispersionError("evaluation point inside the endpoint guard band")
        for n in range(5):
            f, df = _s_density(n, gas.a)
            val = principal_value(f, x.ravel(), grid, df=df).reshape(x.shape)
            if side:
                val = val + side * 1j * math.pi * f(x)
            out.append(val)
    else:
        if np.any((z.imag == 0) & (np.abs(z.real) < alpha)):
            raise DispersionError("mixed on-cut and off-cut points; evaluate separately")
        for n in range(5):
            f, _ = _s_density(n, gas.a)
            out.append(np.asarray(cauchy_integral(f, z.ravel(), grid)).reshape(z.shape))
    return np.array(out)


def t_moments(z, a, grid: CutGrid, side: int = 0) -> np.ndarray:
    """``t_n(z) = z int C^n rho / (mu - z) dmu``, n = 0..4."""
    gas = _as_gas(a)
    s = s_moments(z, gas, grid, side)
    m = np.array(weight_moments(gas.a)).reshape((5,) + (1,) * (s.ndim - 1))
    return s - m


def _assemble(t, gas, variant, identity: bool):
    bracket, k22, k32 = VARIANTS[variant]
    r0, r1, r2, b = gas.r0, gas.r1, gas.r2, gas.beta
    c11 = (r2 if bracket == "r2" else r0) + b * b * r2
    cc = r0 + b * b * r2
    one = 1.0 if identity else 0.0
    L = np.empty(t.shape[1:] + (3, 3), dtype=np.result_type(t, float))
    L[..., 0, 0] = one + c11 * t[0] - b * r2 * t[2]
    L[..., 0, 1] = r1 * t[1]
    L[..., 0, 2] = r2 * (t[2] - b * t[0])
    L[..., 1, 0] = cc * t[1] - b * r2 * t[3]
    L[..., 1, 1] = one + r1 * t[k22]
    L[..., 1, 2] = r2 * (t[3] - b * t[1])
    L[..., 2, 0] = cc * t[2] - b * r2 * t[4]
    L[..., 2, 1] = r1 * t[k32]
    L[..., 2, 2] = one + r2 * (t[4] - b * t[2])
    return L


def lambda_matrix(z, a, grid: CutGrid, side: int = 0, variant: str = "corrected",
                  explicit: bool = False) -> np.ndarray:
    """Dispersion matrix, shape ``(*z.shape, 3, 3)``.

    ``variant`` selects the corrected matrix or one of the misprinted forms.
    ``explicit=True`` builds the corrected matrix from the written-out
    ``t_n`` formulas instead of the cancelled ``s_n`` form (a second code path).
    """
    gas = _as_gas(a)
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; choose from {sorted(VARIANTS)}")
    if variant == "corrected" and not explicit:
        return _assemble(s_moments(z, gas, grid, side), gas, variant, identity=False)
    return _assemble(t_moments(z, gas, grid, side), gas, variant, identity=True)


def det_expanded(L: np.ndarray) -> np.ndarray:
    """Six-term expansion of ``det L`` written out entry by entry."""
    l11, l12, l13 = L[..., 0, 0], L[..., 0, 1], L[..., 0, 2]
    l21, l22, l23 = L[..., 1, 0], L[..., 1, 1], L[..., 1, 2]
    l31, l32, l33 = L[..., 2, 0], L[..., 2, 1], L[..., 2, 2]
    return (l11 * l22 * l33 + l32 * l13 * l21 + l12 * l31 * l23
            - l13 * l22 * l31 - l32 * l11 * l23 - l12 * l21 * l33)


def lambda_det(z, a, grid: CutGrid, side: int = 0, variant: str = "corrected",
               method: str = "expanded"):
    """Dispersion function ``lambda(z) = det Lambda(z)``.

    ``method`` is ``"expanded"`` (six-term formula) or ``"generic"`` (LAPACK).
    """
    L = lambda_matrix(z, a, grid, side, variant)
    if method == "expanded":
        return det_expanded(L)
    if method == "generic":
        return np.linalg.det(L)
    raise ValueError(f"unknown method {method!r}")


def lambda_boundary(eta, side: int, a, grid: CutGrid, variant: str = "corrected"):
    """Boundary value ``lambda^{+}`` (side=+1) or ``lambda^{-}`` (side=-1) on (0, alpha)."""
    gas = _as_gas(a)
    eta = np.asarray(eta, dtype=float)
    if np.any(eta < 1e-9 * gas.alpha) or np.any(eta > gas.alpha * (1 - 1e-9)):
        raise DispersionError("eta must lie in (0, alpha) away from the endpoints")
    if side not in (1, -1):
        raise ValueError("side must be +1 or -1")
    return lambda_det(eta, gas, grid, side=side, variant=variant)


def _c_analytic(z, a):
    """C continued off the cut as ``z / (1 - a z)`` (right half plane branch);
    equal to C(mu) for real mu in [0, alpha)."""
    z = np.asarray(z)
    if np.iscomplexobj(z) and np.any(z.imag != 0):
        return z / (1.0 - a * z)
    return _c_raw(z.real if np.iscomplexobj(z) else z, a)


def minors_from_matrix(L: np.ndarray, c) -> np.ndarray:
    """Cramer numerators ``Lambda_k`` for the right-hand side ``(1, C, C^2)``,
    from the cofactor expansions.  Shape ``(3, *batch)``."""
    l11, l12, l13 = L[..., 0, 0], L[..., 0, 1], L[..., 0, 2]
    l21, l22, l23 = L[..., 1, 0], L[..., 1, 1], L[..., 1, 2]
    l31, l32, l33 = L[..., 2, 0], L[..., 2, 1], L[..., 2, 2]
    c2 = c * c
    m0 = (l22 * l33 - l23 * l32) - c * (l12 * l33 - l13 * l32) + c2 * (l12 * l23 - l13 * l22)
    m1 = -(l21 * l33 - l23 * l31) + c * (l11 * l33 - l13 * l31) - c2 * (l11 * l23 - l13 * l21)
    m2 = (l21 * l32 - l22 * l31) - c * (l11 * l32 - l12 * l31) + c2 * (l11 * l22 - l12 * l21)
    return np.array([m0, m1, m2])


def minors_printed(z, a, grid: CutGrid, side: int = 0) -> np.ndarray:
    """The cofactor formulas exactly as they appear in print (with the
    misprints), over the corrected matrix entries.  Diagnostic only."""
    gas = _as_gas(a)
    t = t_moments(z, gas, grid, side)
    L = _assemble(t, gas, "corrected", identity=True)
    r1 = gas.r1
    c = _c_analytic(z, gas.a)
    c2 = c * c
    l11, l13 = L[..., 0, 0], L[..., 0, 2]
    l21, l22, l23 = L[..., 1, 0], L[..., 1, 1], L[..., 1, 2]
    l31, l33 = L[..., 2, 0], L[..., 2, 2]
    t1, t2, t3 = t[1], t[2], t[3]
    m0 = (l22 * l33 - r1 * t3 * l23 - c * r1 * (t1 * l33 - t2 * l13)
          + c2 * (r1 * t1 * l23 - l22 * l13))
    m1 = -l21 * l33 + l31 * l33 + c * (l11 * l33 - l31 * l13) - c2 * (l11 * l23 - l21 * l13)
    m2 = (r1 * t3 * l21 - l31 * l22 - c * r1 * (t3 * l11 - t1 * l33)
          + c2 * (l11 * l22 - r1 * t1 * l21))
    return np.array([m0, m1, m2])


def minors(z, a, grid: CutGrid, side: int = 0, method: str = "cofactor") -> np.ndarray:
    """``Lambda_0, Lambda_1, Lambda_2`` at z; ``method`` is ``"cofactor"`` or
    ``"cramer"`` (generic linear solve times the determinant)."""
    gas = _as_gas(a)
    L = lambda_matrix(z, gas, grid, side)
    c = _c_analytic(z, gas.a)
    if method == "cofactor":
        return minors_from_matrix(L, c)
    if method == "cramer":
        c = np.asarray(c)
        rhs = np.stack([np.ones_like(c), c, c * c], axis=-1).astype(L.dtype)
        n = np.linalg.solve(L, rhs[..., None])[..., 0]
        det = np.linalg.det(L)
        return np.moveaxis(n * det[..., None], -1, 0)
    raise ValueError(f"unknown method {method!r}")


def kernel_parts(m: np.ndarray, a) -> np.ndarray:
    """Coefficients ``P_0, P_1, P_2`` with ``Q~(eta, mu) = P_0 + C(mu) P_1 + C(mu)^2 P_2``."""
    gas = _as_gas(a)
    r0, r1, r2, b = gas.r0, gas.r1, gas.r2, gas.beta
    shifted = m[2] - b * m[0]
    return np.array([r0 * m[0] - b * r2 * shifted, r1 * m[1], r2 * shifted])


def q_tilde(eta, mu, a, grid: CutGrid, side: int = 0):
    """``Q~(eta, mu) = r0 L0 + r1 C(mu) L1 + r2 (C(mu)^2 - beta)(L2 - beta L0)``
    with the minors taken at eta (principal value on the cut)."""
    gas = _as_gas(a)
    p = kernel_parts(minors(eta, gas, grid, side), gas)
    c = _c_analytic(mu, gas.a)
    return p[0] + c * p[1] + c * c * p[2]


def q_tilde_diag(eta, a, grid: CutGrid):
    """``Q~(eta, eta)`` on the cut (principal-value minors), real."""
    return q_tilde(eta, eta, a, grid)


@dataclass(frozen=True)
class EigenfunctionValue:
    regular: np.ndarray  # coefficient of PV 1/(eta - mu)
    delta_weight: float = 1.0


def eigenfunction(eta, mu, a, grid: CutGrid) -> EigenfunctionValue:
    """Continuous-spectrum eigenfunction normalized to unit delta weight.

    The regular part is ``eta Q~(eta, mu) rho(eta) / (lambda(eta) (eta - mu))``;
    at ``eta == mu`` only the delta term is meaningful and NaN is returned
    for the regular density.
    """
    gas = _as_gas(a)
    eta = np.asarray(eta, dtype=float)
    mu = np.asarray(mu, dtype=float)
    lam = lambda_det(eta, gas, grid).real
    q = q_tilde(eta, mu, gas, grid).real
    with np.errstate(divide="ignore", invalid="ignore"):
        reg = np.where(eta == mu, np.nan, eta * q * _rho_raw(eta, gas.a) / (lam * (eta - mu)))
    return EigenfunctionValue(reg, 1.0)


@dataclass(frozen=True, eq=False)
class ThetaTable:
    """Continuous argument of lambda^+ on (0, alpha), anchored at theta(0+) = 0.

    The nodes are those of a Gauss rule on (0, alpha) so the same table drives
    the Cauchy integrals of the factorization.
    """

    a: float
    grid: CutGrid  # full symmetric rule used for the t-moments
    eta: np.ndarray
    weights: np.ndarray
    theta: np.ndarray
    lam_plus: np.ndarray
    spline: CubicSpline = field(repr=False)

    @property
    def alpha(self) -> float:
        return 1.0 / self.a

    @property
    def endpoint_theta(self) -> float:
        return float(self.spline(self.alpha))

    def __call__(self, eta):
        return self.spline(eta)

    def exact(self, eta):
        """theta(eta) from a fresh evaluation of lambda^+, on the branch picked
        by the interpolant."""
        eta = np.asarray(eta, dtype=float)
        lp = lambda_det(eta, self.a, self.grid, side=1)
        base = np.angle(lp)
        guess = self.spline(eta)
        return base + 2 * math.pi * np.round((guess - base) / (2 * math.pi))


def theta_table(a, grid: CutGrid, n_samples: int = 0, max_refine: int = 6) -> ThetaTable:
    """Tabulate theta on the positive half of ``grid`` (refined until it has at
    least ``n_samples`` nodes and adjacent phase steps are below pi/2), then
    verify the total winding of 2 pi."""
    gas = _as_gas(a)
    if not gas.a > 0:
        raise ValueError("theta table needs a > 0")
    alpha = gas.alpha
    qgrid = grid
    for _ in range(max_refine + 1):
        half = qgrid.half()
        if half.nodes.size >= n_samples:
            lp = lambda_det(half.nodes, gas, grid, side=1)
            raw = np.angle(lp)
            steps = np.diff(np.concatenate([[0.0], raw]))
            steps = (steps + math.pi) % (2 * math.pi) - math.pi
            if np.all(np.abs(steps) < math.pi / 2):
                break
        qgrid = qgrid.refined()
    else:
        bad = int(np.argmax(np.abs(steps)))
        raise DispersionError(f"theta unwrap failed near eta={half.nodes[bad]:.6g}")
    theta = np.cumsum(steps)
    x = np.concatenate([[0.0], half.nodes, [alpha]])
    end = theta[-1] + np.angle(lp[-1] * np.exp(-1j * theta[-1]))
    y = np.concatenate([[0.0], theta, [end]])
    spline = CubicSpline(x, y)
    table = ThetaTable(gas.a, grid, half.nodes, half.weights, theta, lp, spline)
    winding = end / (2 * math.pi)
    if abs(winding - 1.0) > 1e-3:
        raise DispersionError(f"theta winding {winding:.6f} x 2pi differs from 1 (a={gas.a})")
    return table


def sokhotsky_residual(eta, a, grid: CutGrid, variant: str = "corrected",
                       eta_factor: bool = True) -> np.ndarray:
    """``|(lambda^+ - lambda^-) - 2 pi i eta rho Q~(eta, eta)| / |lambda^+|``.

    For a misprinted variant the minors are formed from that variant's
    matrix, so the identity only closes for a matrix whose jump across the
    cut is rank one.  ``eta_factor=False`` drops the factor eta from the jump
    (the form without it does not hold for any variant).
    """
    gas = _as_gas(a)
    eta = np.asarray(eta, dtype=float)
    lp = lambda_det(eta, gas, grid, side=1, variant=variant)
    lm = lambda_det(eta, gas, grid, side=-1, variant=variant)
    L = lambda_matrix(eta, gas, grid, side=0, variant=variant)
    p = kernel_parts(minors_from_matrix(L, _c_raw(eta, gas.a)), gas)
    c = _c_raw(eta, gas.a)
    q = p[0] + c * p[1] + c * c * p[2]
    jump = 2j * math.pi * (eta if eta_factor else 1.0) * _rho_raw(eta, gas.a) * q
    return np.abs((lp - lm) - jump) / np.abs(lp)
