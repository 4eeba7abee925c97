"""Replica-exchange constrained Hamiltonian Monte Carlo on implicit manifolds."""

from .dynamics import PhaseState, Potential, Rejected
from .geometry import ConstraintModel, SolverConfig, project_to_manifold
from .samplers import KernelConfig, RelaxedTarget, chmc_step, hmc_step, make_rng

__version__ = "0.1.0"

__all__ = [
    "ConstraintModel",
    "KernelConfig",
    "PhaseState",
    "Potential",
    "Rejected",
    "RelaxedTarget",
    "SolverConfig",
    "chmc_step",
    "hmc_step",
    "make_rng",
    "project_to_manifold",
]
