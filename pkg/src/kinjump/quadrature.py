"""Composite Gauss-Legendre rules on the velocity cut, with principal values
and Cauchy integrals by singularity subtraction.

Panels are uniform in the velocity ``C`` over the thermal core and graded
geometrically toward the cut centre and toward the endpoints, where the
weight has a kink (mu = 0) or an essential zero (mu = +-alpha).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

CORE_EXTENT = 7.0  # exp(-49) is below double-precision relevance
GRADING_RATIO = 0.5
GUARD = 1e-7  # relative pole distance below which the derivative replaces the quotient
SMOOTH_TOL = 1e-10
PV_TOL = 1e-8


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class CutGrid:
    """Gauss nodes and weights on ``(lo, hi)``, nodes strictly interior."""

    nodes: np.ndarray
    weights: np.ndarray
    breaks: np.ndarray
    nodes_per_panel: int
    lo: float
    hi: float
    level: int = 0
    tol: float = SMOOTH_TOL

    @property
    def alpha(self) -> float:
        return max(abs(self.lo), abs(self.hi))

    @property
    def n_panels(self) -> int:
        return len(self.breaks) - 1

    def half(self) -> "CutGrid":
        """The sub-rule on (0, hi); 0 must be a panel break."""
        if not np.any(self.breaks == 0.0):
            raise QuadratureError("grid has no panel break at 0")
        keep = self.nodes > 0
        return CutGrid(self.nodes[keep], self.weights[keep], self.breaks[self.breaks >= 0],
                       self.nodes_per_panel, 0.0, self.hi, self.level, self.tol)

    def refined(self) -> "CutGrid":
        """Every panel halved."""
        mids = 0.5 * (self.breaks[:-1] + self.breaks[1:])
        br = np.empty(2 * len(self.breaks) - 1)
        br[0::2] = self.breaks
        br[1::2] = mids
        return _from_breaks(br, self.nodes_per_panel, self.level + 1, self.tol)


def _from_breaks(breaks, npp, level=0, tol=SMOOTH_TOL) -> CutGrid:
    x, w = np.polynomial.legendre.leggauss(npp)
    lo = breaks[:-1, None]
    hi = breaks[1:, None]
    half = 0.5 * (hi - lo)
    nodes = (0.5 * (lo + hi) + half * x).ravel()
    weights = (half * w).ravel()
    return CutGrid(nodes, weights, np.asarray(breaks, dtype=float), npp,
                   float(breaks[0]), float(breaks[-1]), level, tol)


def _half_breaks(alpha: float, n_half: int, grading_levels: int) -> np.ndarray:
    n_end = min(grading_levels, n_half // 3)
    n_zero = min(grading_levels // 2, n_half // 3)
    n_core = n_half - n_end - n_zero
    a = 1.0 / alpha
    c = np.linspace(0.0, CORE_EXTENT, n_core + 1)
    core = c / (1.0 + a * c)
    first = core[1]
    toward_zero = first * GRADING_RATIO ** np.arange(n_zero, 0, -1)
    last = core[-1]
    toward_end = alpha - (alpha - last) * GRADING_RATIO ** np.arange(1, n_end + 1)
    return np.concatenate([[0.0], toward_zero, core[1:], toward_end, [alpha]])


def build_grid(alpha: float, n_panels: int = 64, nodes_per_panel: int = 12,
               grading_levels: int = 8) -> CutGrid:
    """Symmetric composite Gauss rule on (-alpha, alpha)."""
    if not (math.isfinite(alpha) and alpha > 0):
        raise ValueError(f"alpha must be positive and finite, got {alpha}")
    if n_panels < 4 or n_panels % 2:
        raise ValueError(f"n_panels must be even and >= 4, got {n_panels}")
    if nodes_per_panel < 4:
        raise ValueError(f"nodes_per_panel must be >= 4, got {nodes_per_panel}")
    half = _half_breaks(alpha, n_panels // 2, grading_levels)
    breaks = np.concatenate([-half[::-1], half[1:]])
    return _from_breaks(breaks, nodes_per_panel)


@lru_cache(maxsize=32)
def default_grid(alpha: float) -> CutGrid:
    return build_grid(alpha)


def _check_finite(vals, nodes):
    bad = ~np.isfinite(vals)
    if np.any(bad):
        idx = np.argwhere(bad)[0]
        raise QuadratureError(f"non-finite integrand at node mu={nodes[idx[-1]]!r}")


def integrate(f, grid: CutGrid, error_estimate: bool = False):
    """``sum w_k f(mu_k)``; optionally also the panel-halving error estimate."""
    vals = np.asarray(f(grid.nodes))
    _check_finite(vals, grid.nodes)
    total = np.tensordot(grid.weights, vals, axes=(0, 0))
    if not error_estimate:
        return total
    fine = grid.refined()
    vf = np.asarray(f(fine.nodes))
    _check_finite(vf, fine.nodes)
    return total, np.abs(np.tensordot(fine.weights, vf, axes=(0, 0)) - total)


def _numeric_derivative(f, x, scale):
    h = 1e-5 * scale
    return (f(x + h) - f(x - h)) / (2 * h)


def _subtracted_sum(fm, fe, dfe, nodes, weights, poles, z, scale):
    """sum_k w_k (f_k - f(x0)) / (mu_k - z) with a derivative guard at x0 = pole."""
    diff = nodes[None, :] - z[:, None]
    near = np.abs(nodes[None, :] - poles[:, None]) < GUARD * scale
    num = fm[None, :] - fe[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        q = num / diff
    if np.any(near):
        q = np.where(near, dfe[:, None] * np.ones_like(diff), q)
    return q @ weights


def principal_value(f, pole, grid: CutGrid, df=None):
    """PV of ``int f(mu) / (mu - pole) dmu`` over the grid interval.

    ``f`` is vectorized; ``df`` (optional) is its derivative, used where a node
    falls within ``GUARD * alpha`` of the pole.
    """
    scalar = np.ndim(pole) == 0
    pole = np.atleast_1d(np.asarray(pole, dtype=float))
    if np.any((pole <= grid.lo) | (pole >= grid.hi)):
        raise ValueError("pole must lie inside the open interval")
    scale = grid.hi - grid.lo
    fm = np.asarray(f(grid.nodes))
    fe = np.asarray(f(pole))
    _check_finite(fm, grid.nodes)
    dfe = np.asarray(df(pole)) if df is not None else _numeric_derivative(f, pole, scale)
    val = _subtracted_sum(fm, fe, dfe, grid.nodes, grid.weights, pole, pole, scale)
    val = val + fe * np.log((grid.hi - pole) / (pole - grid.lo))
    return val[0] if scalar else val


def log_kernel(z, lo, hi):
    """``int_lo^hi dmu / (mu - z)`` for z off the segment."""
    z = np.asarray(z)
    if np.iscomplexobj(z):
        return np.log(hi - z) - np.log(lo - z)
    return np.log(np.abs(hi - z)) - np.log(np.abs(lo - z))


def cauchy_integral(f, z, grid: CutGrid):
    """``int f(mu) / (mu - z) dmu`` for z off the cut.

    Close to the cut the value ``f(Re z)`` is subtracted so the remaining
    integrand stays bounded; the limit Im z -> 0+- then reproduces the
    Plemelj boundary values.
    """
    scalar = np.ndim(z) == 0
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    on_cut = (z.imag == 0) & (z.real > grid.lo) & (z.real < grid.hi)
    if np.any(on_cut):
        raise ValueError("z lies on the cut; use principal_value or boundary values")
    fm = np.asarray(f(grid.nodes))
    _check_finite(fm, grid.nodes)
    scale = grid.hi - grid.lo
    near = (np.abs(z.imag) < 0.1 * scale) & (z.real > grid.lo) & (z.real < grid.hi)
    out = np.empty(z.shape, dtype=complex)
    far = ~near
    if np.any(far):
        out[far] = (fm[None, :] / (grid.nodes[None, :] - z[far][:, None])) @ grid.weights
    if np.any(near):
        x0 = z[near].real
        fe = np.asarray(f(x0))
        dfe = _numeric_derivative(f, x0, scale)
        val = _subtracted_sum(fm, fe, dfe, grid.nodes, grid.weights, x0, z[near], scale)
        out[near] = val + fe * log_kernel(z[near], grid.lo, grid.hi)
    return out[0] if scalar else out


def cauchy_integral_with_error(f, z, grid: CutGrid):
    coarse = cauchy_integral(f, z, grid)
    fine = cauchy_integral(f, z, grid.refined())
    return fine, np.abs(fine - coarse)
