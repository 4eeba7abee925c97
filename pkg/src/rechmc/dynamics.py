"""Symplectic integrators.

Unconstrained Stormer-Verlet (leapfrog) for ambient chains and RATTLE with a
reversibility check for chains living on a constraint manifold.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from . import _kernels
from .errors import NonFiniteState, PositionSolveFailed
from .geometry import DEFAULT_SOLVER, ConstraintModel, SolverConfig

Array = np.ndarray


@dataclass(frozen=True)
class PhaseState:
    position: Array
    momentum: Array


@dataclass(frozen=True)
class Potential:
    """Potential energy ``value`` with its ``gradient``.

    Both callables may be numba-jitted, in which case samplers built on the
    potential run compiled trajectories.
    """

    value: Callable[[Array], float]
    gradient: Callable[[Array], Array]


@dataclass(frozen=True)
class LagrangeMultipliers:
    half_step: Array
    full_step: Array


@dataclass(frozen=True)
class Rejected:
    """A trajectory that was abandoned; ``reason`` is a short status name."""

    reason: str


def hamiltonian(pot: Potential, s: PhaseState) -> float:
    p = np.asarray(s.momentum)
    return float(pot.value(s.position)) + 0.5 * float(p @ p)


def leapfrog_step(pot: Potential, s: PhaseState, h: float) -> PhaseState:
    """Half kick, drift, half kick.

    Raises:
        NonFiniteState: if the new state has a non-finite coordinate.
    """
    q = np.asarray(s.position, dtype=float)
    p = np.asarray(s.momentum, dtype=float)
    kern = _kernels.backend(pot.gradient)
    q1, p1, status = kern.leapfrog(pot.gradient, q, p, float(h), 1)
    if status != _kernels.OK:
        raise NonFiniteState("leapfrog produced a non-finite state")
    return PhaseState(q1, p1)


def rattle_step(model: ConstraintModel, pot: Potential, s: PhaseState, h: float,
                cfg: SolverConfig = DEFAULT_SOLVER):
    """One RATTLE step, returning ``(PhaseState, LagrangeMultipliers)``.

    The position stage solves for the half-step multiplier by a quasi-Newton
    iteration; the momentum stage is an exact linear solve that makes the new
    momentum cotangent.

    Raises:
        PositionSolveFailed: the position stage did not converge, or its
            correction exceeded ``cfg.rattle_max_correction``.
        NonFiniteState: the step produced non-finite values.
    """
    q = np.asarray(s.position, dtype=float)
    p = np.asarray(s.momentum, dtype=float)
    kern = _kernels.backend(model.residual, model.jacobian, pot.gradient)
    q1, p1, lam, mu, status = kern.rattle_step(
        model.residual, model.jacobian, pot.gradient, q, p, float(h),
        cfg.rattle_tol, cfg.rattle_max_iter, cfg.rattle_max_correction)
    if status == _kernels.NON_FINITE:
        raise NonFiniteState("RATTLE produced a non-finite state")
    if status != _kernels.OK:
        raise PositionSolveFailed(_kernels.STATUS_NAMES[status])
    return PhaseState(q1, p1), LagrangeMultipliers(lam, mu)


def reversible_trajectory(model: ConstraintModel, pot: Potential, s: PhaseState,
                          h: float, n_steps: int,
                          cfg: SolverConfig = DEFAULT_SOLVER) -> Union[PhaseState, Rejected]:
    """``n_steps`` RATTLE steps followed by a momentum flip.

    The trajectory is integrated back from the flipped end point and must
    return to the start within ``cfg.rev_tol``; otherwise, or when any step
    fails, the result is ``Rejected``.
    """
    q = np.asarray(s.position, dtype=float)
    p = np.asarray(s.momentum, dtype=float)
    kern = _kernels.backend(model.residual, model.jacobian, pot.gradient)
    q1, p1, status = kern.rattle_trajectory(
        model.residual, model.jacobian, pot.gradient, q, p, float(h), int(n_steps),
        cfg.rattle_tol, cfg.rattle_max_iter, cfg.rattle_max_correction, cfg.rev_tol)
    if status != _kernels.OK:
        return Rejected(_kernels.STATUS_NAMES[status])
    return PhaseState(q1, p1)
