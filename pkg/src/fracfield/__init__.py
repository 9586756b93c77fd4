"""fracfield: fractional Cahn-Hilliard dynamics with solid Dirichlet
conditions, plus its Allen-Cahn and porous-medium singular limits.

Core layers:

- grid / potential: interval meshes, zero-extended nodal fields, the
  power-law double well and its monotone derivative;
- fracop: Galerkin stiffness of the weak fractional Laplacian (full
  Gagliardo form including the exterior tail), elliptic solves, dual norms;
- spectral: first eigenpair, interpolation constant, eigenvalue bounds;
- dynamics: energy-stable implicit steppers with per-step inequality
  monitors;
- stationary: free-energy minimization and existence criteria;
- limits: quantitative singular-limit experiments;
- cli: the `fracfield` command.
"""

__version__ = "0.1.0"

from .grid import Domain1D, Field, bump_field, lp_norm, make_domain, sample, zero_field
from .potential import PotentialParams, W, beta, beta_hat, truncate_beta, yosida_beta
from .fracop import FracOperator, KernelConstant, assemble, kernel_constant, poincare_lower_bound
from .spectral import (
    EigenBounds,
    EigenPair,
    first_eigenpair,
    kappa,
    lambda1_lower_bound,
    lambda1_sweep,
)
from .dynamics import (
    EnergyTrace,
    SolverSettings,
    Trajectory,
    ac_evolve,
    beta_bound_check,
    ch_evolve,
    ch_evolve_modified,
    ch_step,
    check_energy_identity_gap,
    energy,
    energy_modified,
    pm_evolve,
)
from .stationary import (
    StationaryResult,
    minimize_energy,
    nontriviality_predicate,
    smallness_bound,
    stationary_sigma_sweep,
)
from .limits import (
    LimitReport,
    limit_s_to_ac,
    limit_sigma_to_fd,
    limit_sigma_to_pm,
    operator_identity_limit,
)

__all__ = [
    "Domain1D", "Field", "make_domain", "sample", "zero_field", "bump_field",
    "lp_norm",
    "PotentialParams", "beta", "beta_hat", "W", "yosida_beta", "truncate_beta",
    "KernelConstant", "FracOperator", "kernel_constant", "assemble",
    "poincare_lower_bound",
    "EigenPair", "EigenBounds", "first_eigenpair", "kappa",
    "lambda1_lower_bound", "lambda1_sweep",
    "SolverSettings", "Trajectory", "EnergyTrace", "energy", "energy_modified",
    "ch_step", "ch_evolve", "ch_evolve_modified", "ac_evolve", "pm_evolve",
    "check_energy_identity_gap", "beta_bound_check",
    "StationaryResult", "minimize_energy", "nontriviality_predicate",
    "smallness_bound", "stationary_sigma_sweep",
    "LimitReport", "limit_sigma_to_pm", "limit_sigma_to_fd", "limit_s_to_ac",
    "operator_identity_limit",
    "__version__",
]
