"""Temperature and concentration jumps for the linearized BGK equation with a
collision frequency affine in the molecular speed (generalized Smoluchowski
problem), by exact half-space solution and by a discrete-ordinates check."""
from .model import (AsymptoticState, DomainError, GasModel, PhysicalScaling, gas_model,
                    h_asymptotic, omega, rescale_slope)
from .quadrature import CutGrid, build_grid
from .dispersion import lambda_det, theta_table
from .factorization import factorize
from .jump import JumpSolution, boundary_residual, reconstruct_h, solve_jumps, spectral_density
from .oracle import extract_jumps, solve_direct

__all__ = [
    "AsymptoticState", "CutGrid", "DomainError", "GasModel", "JumpSolution", "PhysicalScaling",
    "boundary_residual", "build_grid", "extract_jumps", "factorize", "gas_model", "h_asymptotic",
    "lambda_det", "omega", "reconstruct_h", "rescale_slope", "solve_direct", "solve_jumps",
    "spectral_density", "theta_table",
]
__version__ = "0.1.0"
