"""Exchange moves between the manifold chain and a relaxed ambient chain.

For a joint state ``(q, x)`` the proposal decomposes ``x = q_x + jac(q_x) v``
and swaps base points while keeping ``v``:

    (q, x) -> (q_x, q + jac(q) v).

The map is an involution on the states where both decompositions exist and
agree, so a Metropolis-Hastings correction with its Jacobian determinant
gives an exact kernel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import (NoConvergence, NormalCapExceeded, SingularCurvatureFactor,
                     SingularGram)
from .geometry import (DEFAULT_SOLVER, ConstraintModel, SolverConfig, gram,
                       project_to_manifold, reconstruct, tangent_basis)
from .samplers import RelaxedTarget

Array = np.ndarray
MODES = ("exact", "gram")


@dataclass(frozen=True)
class JointState:
    cold: Array
    hot: Array


@dataclass(frozen=True)
class ExchangeProposal:
    cold_new: Array
    hot_new: Array
    normal: Array
    jacobian_factor: float
    mode: str


@dataclass(frozen=True)
class NotAdmissible:
    """The joint state lies outside the domain where the swap is an involution."""

    reason: str


def default_mode(model: ConstraintModel) -> str:
    """Exact Jacobians for small problems, the Gram approximation otherwise."""
    return "exact" if model.ambient_dim + model.codim <= 64 else "gram"


def _curvature_det(model: ConstraintModel, q: Array, v: Array) -> float:
    u = tangent_basis(model, q).columns
    s = np.tensordot(v, np.asarray(model.hessians(q)), axes=1)
    a = np.eye(u.shape[1]) + u.T @ s @ u
    d = abs(float(np.linalg.det(a)))
    if not d > 1e-14:
        raise SingularCurvatureFactor(f"tangent curvature determinant {d:.3g}")
    return d


def jacobian_gram(model: ConstraintModel, q, q_x) -> float:
    """``sqrt(det G(q) / det G(q_x))``."""
    return float(np.exp(0.5 * (gram(model, q).log_det - gram(model, q_x).log_det)))


def jacobian_exact(model: ConstraintModel, q, q_x, v) -> float:
    """Absolute Jacobian determinant of the swap at ``(q, x = q_x + jac(q_x) v)``.

    The Gram ratio times the ratio of tangent curvature factors
    ``|det(I + sum_i v_i U^T H_i U)|`` at ``q`` and at ``q_x``.

    Raises:
        SingularGram: rank-deficient constraint Jacobian.
        SingularCurvatureFactor: a curvature factor is numerically zero.
    """
    q = np.asarray(q, dtype=float)
    q_x = np.asarray(q_x, dtype=float)
    v = np.atleast_1d(np.asarray(v, dtype=float))
    ratio = _curvature_det(model, q, v) / _curvature_det(model, q_x, v)
    return jacobian_gram(model, q, q_x) * ratio


def propose_exchange(model: ConstraintModel, z: JointState,
                     cfg: SolverConfig = DEFAULT_SOLVER,
                     mode: str = "exact") -> Union[ExchangeProposal, NotAdmissible]:
    """Swap proposal with the reversible involution check.

    ``x`` is decomposed, the normal coordinate is carried over to ``q``, and
    the new ambient point must decompose back onto ``q`` within
    ``cfg.involution_tol``.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    q = np.asarray(z.cold, dtype=float)
    try:
        dec = project_to_manifold(model, z.hot, cfg)
    except (NoConvergence, NormalCapExceeded) as exc:
        return NotAdmissible(f"projection: {exc}")
    x_new = reconstruct(model, q, dec.normal)
    try:
        back = project_to_manifold(model, x_new, cfg)
    except (NoConvergence, NormalCapExceeded) as exc:
        return NotAdmissible(f"reprojection: {exc}")
    if np.max(np.abs(back.base - q)) > cfg.involution_tol:
        return NotAdmissible("involution check failed")
    try:
        if mode == "exact":
            factor = jacobian_exact(model, q, dec.base, dec.normal)
        else:
            factor = jacobian_gram(model, q, dec.base)
    except (SingularGram, SingularCurvatureFactor) as exc:
        return NotAdmissible(f"jacobian: {exc}")
    return ExchangeProposal(dec.base, x_new, dec.normal, factor, mode)


def log_accept_ratio(target: RelaxedTarget, z: JointState, prop: ExchangeProposal) -> float:
    v = target.base_potential.value
    log_new = -float(v(prop.cold_new)) - target.value(prop.hot_new)
    log_old = -float(v(np.asarray(z.cold, dtype=float))) - target.value(z.hot)
    return log_new - log_old + float(np.log(prop.jacobian_factor))


def exchange_accept_prob(target: RelaxedTarget, z: JointState,
                         prop: ExchangeProposal) -> float:
    """``min(1, pi(S z) / pi(z) * |J|)``; non-finite ratios give 0.

    The cold factor is ``exp(-V)`` and the hot factor the unnormalised
    relaxed density of ``target``.
    """
    with np.errstate(invalid="ignore", over="ignore"):
        r = log_accept_ratio(target, z, prop)
    if np.isnan(r) or r == -np.inf:
        return 0.0
    return float(min(1.0, np.exp(min(r, 0.0))))


def exchange_transition(target: RelaxedTarget, z: JointState, rng: np.random.Generator,
                        cfg: SolverConfig = DEFAULT_SOLVER, mode: str = "exact"):
    """One exchange move; returns ``(state, outcome)``.

    ``outcome`` is ``"accepted"``, ``"rejected"`` or ``"not_admissible"``.
    A uniform variate is drawn in every case to keep streams aligned.
    """
    u = rng.random()
    prop = propose_exchange(target.model, z, cfg, mode)
    if isinstance(prop, NotAdmissible):
        return z, "not_admissible"
    if u < exchange_accept_prob(target, z, prop):
        return JointState(prop.cold_new, prop.hot_new), "accepted"
    return z, "rejected"


def exchange_step(target: RelaxedTarget, z: JointState, rng: np.random.Generator,
                  cfg: SolverConfig = DEFAULT_SOLVER, mode: str = "exact") -> JointState:
    """Exchange kernel: the swapped state with its acceptance probability, else ``z``."""
    return exchange_transition(target, z, rng, cfg, mode)[0]
