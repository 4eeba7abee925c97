"""Metropolis-corrected Hamiltonian kernels.

``hmc_step`` targets the relaxed ambient density
``exp(-V(x) - |residual(x)|^2 / eps)``; ``chmc_step`` targets ``exp(-V)``
with respect to surface measure on the constraint manifold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .dynamics import Potential
from .errors import SingularGram
from .geometry import DEFAULT_SOLVER, ConstraintModel, SolverConfig

Array = np.ndarray


def make_rng(master_seed: int, chain_index: int) -> np.random.Generator:
    """Independent counter-based stream for one chain of a run."""
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(int(chain_index),))
    return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class RelaxedTarget:
    """Ambient potential ``V(x) + |residual(x)|^2 / epsilon``."""

    model: ConstraintModel
    base_potential: Potential
    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")

    def _kern(self):
        m = self.model
        return _kernels.backend(m.residual, m.jacobian, self.base_potential.gradient,
                                self.base_potential.value)

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(self._kern().relaxed_value(
            self.model.residual, self.base_potential.value, float(self.epsilon), x))

    def gradient(self, x) -> Array:
        x = np.asarray(x, dtype=float)
        return self._kern().relaxed_grad(self.model.residual, self.model.jacobian,
                                         self.base_potential.gradient,
                                         float(self.epsilon), x)

    @property
    def potential(self) -> Potential:
        return Potential(self.value, self.gradient)


@dataclass
class KernelConfig:
    """Step size ``h``, trajectory length ``L`` and the chain's random stream.

    With ``step_range = r > 1`` each trajectory uses ``h * r**(-w)`` with
    ``w`` uniform on ``[0, 1]``: a log-uniform step between ``h / r`` and
    ``h``. Randomising the step breaks periodic orbits and lets one kernel
    cope with curvature that varies by orders of magnitude across the space.
    The draw does not depend on the state, so the kernel stays reversible.
    """

    step_size: float
    n_steps: int
    rng: np.random.Generator
    step_range: float = 1.0

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")
        if int(self.n_steps) < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")
        if not self.step_range >= 1:
            raise ValueError(f"step_range must be >= 1, got {self.step_range}")

    def draw_step(self) -> float:
        if self.step_range == 1:
            return float(self.step_size)
        return float(self.step_size * self.step_range ** (-self.rng.random()))


def project_momentum(model: ConstraintModel, q, p) -> Array:
    """Orthogonal projection of ``p`` onto the null space of ``jac(q).T``."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    kern = _kernels.backend(model.jacobian)
    out, status = kern.project_cotangent(model.jacobian, q, p)
    if status != _kernels.OK:
        raise SingularGram("cannot project momentum: singular Gram matrix")
    return out


def hmc_step(target: RelaxedTarget, q, cfg: KernelConfig):
    """One HMC transition; returns ``(new_point, accepted)``.

    Divergent trajectories and non-finite energies are rejected.
    """
    q = np.asarray(q, dtype=float)
    h = cfg.draw_step()
    p = cfg.rng.standard_normal(q.shape[0])
    log_u = float(np.log(cfg.rng.random()))
    m, pot = target.model, target.base_potential
    kern = target._kern()
    q1, accepted, _ = kern.hmc_transition(
        m.residual, m.jacobian, pot.gradient, pot.value, float(target.epsilon),
        q, p, h, int(cfg.n_steps), log_u)
    return (q1, True) if accepted else (q, False)


def hmc_ladder_step(targets, states, cfgs):
    """``hmc_step`` on every level of a ladder in a single compiled call.

    All targets must share one model and base potential. Random draws come
    from each level's own stream in the same order as ``hmc_step``, so the
    result equals applying ``hmc_step`` level by level.
    Returns ``(new_states, accepted)``.
    """
    if not targets:
        return [], np.zeros(0, dtype=bool)
    t0 = targets[0]
    n = t0.model.ambient_dim
    k = len(targets)
    xs = np.array(states, dtype=float).reshape(k, n)
    ps = np.empty((k, n))
    hs = np.empty(k)
    log_us = np.empty(k)
    for i, cfg in enumerate(cfgs):
        hs[i] = cfg.draw_step()
        ps[i] = cfg.rng.standard_normal(n)
        log_us[i] = np.log(cfg.rng.random())
    eps = np.array([t.epsilon for t in targets], dtype=float)
    n_steps = np.array([c.n_steps for c in cfgs], dtype=np.int64)
    m, pot = t0.model, t0.base_potential
    accepted = t0._kern().hmc_ladder(m.residual, m.jacobian, pot.gradient, pot.value, eps,
                                     xs, ps, hs, n_steps, log_us)
    return list(xs), accepted


def chmc_step(model: ConstraintModel, pot: Potential, q, cfg: KernelConfig,
              solver: SolverConfig = DEFAULT_SOLVER):
    """One constrained HMC transition; returns ``(new_point, accepted)``.

    The momentum is drawn from a standard normal and projected onto the
    cotangent space at ``q``. Failed or irreversible trajectories are rejected.
    """
    q = np.asarray(q, dtype=float)
    h = cfg.draw_step()
    p = cfg.rng.standard_normal(q.shape[0])
    log_u = float(np.log(cfg.rng.random()))
    kern = _kernels.backend(model.residual, model.jacobian, pot.gradient, pot.value)
    q1, accepted, _, _ = kern.chmc_transition(
        model.residual, model.jacobian, pot.gradient, pot.value, q, p, h,
        int(cfg.n_steps), solver.rattle_tol, solver.rattle_max_iter,
        solver.rattle_max_correction, solver.rev_tol, log_u)
    return (q1, True) if accepted else (q, False)
