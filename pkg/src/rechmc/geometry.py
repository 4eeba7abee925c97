"""Implicit-manifold primitives.

A manifold is the zero level set of a constraint map ``residual: R^n -> R^m``.
This module evaluates its Gram matrix and tangent frames and solves the
normal-bundle decomposition ``x = q + jac(q) v`` with ``residual(q) = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .errors import NoConvergence, NormalCapExceeded, SingularGram

Array = np.ndarray


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances for every nonlinear solve in the package.

    Attributes:
        tol: Constraint tolerance, infinity norm of the residual.
        recon_tol: Tolerance on ``|q + jac(q) v - x|`` for projections.
        max_iter: Newton iteration budget for projections.
        max_backtrack: Step halvings allowed when the residual does not drop.
        rattle_tol: Constraint tolerance of the RATTLE position stage.
        rattle_max_iter: Newton budget of the RATTLE position stage.
        rattle_max_correction: Largest allowed ratio of the RATTLE position
            correction to the unconstrained move; longer corrections land on
            a distant root of the constraint and are rejected.
        rev_tol: Position tolerance of the trajectory reversibility check.
        involution_tol: Position tolerance of the exchange involution check.
    """

    tol: float = 1e-10
    recon_tol: float = 1e-8
    max_iter: int = 50
    max_backtrack: int = 20
    rattle_tol: float = 1e-10
    rattle_max_iter: int = 50
    rattle_max_correction: float = 1.0
    rev_tol: float = 1e-8
    involution_tol: float = 1e-6


DEFAULT_SOLVER = SolverConfig()


def _fd_hessians(jacobian, step=1e-5):
    def hessians(x):
        x = np.asarray(x, dtype=float)
        n = x.shape[0]
        m = np.asarray(jacobian(x)).shape[1]
        out = np.empty((m, n, n))
        for k in range(n):
            h = step * max(1.0, abs(x[k]))
            e = np.zeros(n)
            e[k] = h
            d = (np.asarray(jacobian(x + e)) - np.asarray(jacobian(x - e))) / (2 * h)
            out[:, :, k] = d.T
        return 0.5 * (out + np.transpose(out, (0, 2, 1)))

    return hessians


@dataclass(frozen=True)
class ConstraintModel:
    """Implicitly defined manifold ``{q : residual(q) = 0}``.

    ``jacobian`` returns the ``n x m`` matrix whose columns are the constraint
    gradients and ``hessians`` the ``(m, n, n)`` stack of constraint Hessians.
    When ``hessians`` is omitted, central differences of ``jacobian`` are used
    and ``hessians_fd`` is set. Numba-jitted callables enable compiled kernels.
    """

    ambient_dim: int
    codim: int
    residual: Callable[[Array], Array]
    jacobian: Callable[[Array], Array]
    hessians: Optional[Callable[[Array], Array]] = None
    v_max: float = 1.0
    name: str = "model"
    hessians_fd: bool = field(init=False, default=False)

    def __post_init__(self):
        if self.ambient_dim < 1 or self.codim < 0 or self.codim >= self.ambient_dim:
            raise ValueError(
                f"need 0 <= codim < ambient_dim, got n={self.ambient_dim}, m={self.codim}")
        if self.hessians is None:
            object.__setattr__(self, "hessians", _fd_hessians(self.jacobian))
            object.__setattr__(self, "hessians_fd", True)

    @property
    def manifold_dim(self) -> int:
        return self.ambient_dim - self.codim

    def violation(self, q) -> float:
        """Infinity norm of the residual at ``q``."""
        return float(np.max(np.abs(self.residual(np.asarray(q, dtype=float)))))


@dataclass(frozen=True)
class GramMatrix:
    value: Array
    log_det: float


@dataclass(frozen=True)
class TangentBasis:
    columns: Array


@dataclass(frozen=True)
class TubularDecomposition:
    """``source = base + jac(base) @ normal`` with ``base`` on the manifold."""

    base: Array
    normal: Array
    source: Array


def gram(model: ConstraintModel, q) -> GramMatrix:
    """Gram matrix ``jac(q).T @ jac(q)`` and its log-determinant.

    Raises:
        SingularGram: if the matrix is not numerically positive definite.
    """
    j = np.asarray(model.jacobian(np.asarray(q, dtype=float)))
    g = j.T @ j
    g = 0.5 * (g + g.T)
    if g.shape[0] == 0:
        return GramMatrix(g, 0.0)
    try:
        chol = np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise SingularGram("Gram matrix is not positive definite") from exc
    diag = np.diag(chol)
    if not np.all(np.isfinite(diag)) or diag.min() <= 1e-10 * diag.max():
        raise SingularGram("Gram matrix is numerically rank deficient")
    return GramMatrix(g, float(2.0 * np.sum(np.log(diag))))


def _fix_signs(u):
    for k in range(u.shape[1]):
        col = u[:, k]
        idx = np.flatnonzero(np.abs(col) > 1e-8)
        if idx.size and col[idx[0]] < 0:
            u[:, k] = -col
    return u


def tangent_basis(model: ConstraintModel, q) -> TangentBasis:
    """Orthonormal basis of the tangent space at ``q``.

    Built from a complete QR factorisation of the constraint Jacobian, with
    each column's first entry above 1e-8 in magnitude made positive so the
    basis is a deterministic function of ``q``.
    """
    q = np.asarray(q, dtype=float)
    gram(model, q)  # rank check
    j = np.asarray(model.jacobian(q))
    qmat, _ = np.linalg.qr(j, mode="complete")
    return TangentBasis(_fix_signs(np.array(qmat[:, model.codim:])))


def cotangent_projector(model: ConstraintModel, q) -> Array:
    """``I - J (J^T J)^{-1} J^T``: orthogonal projection onto ``ker J(q)^T``."""
    j = np.asarray(model.jacobian(np.asarray(q, dtype=float)))
    g = gram(model, q).value
    return np.eye(model.ambient_dim) - j @ np.linalg.solve(g, j.T)


def reconstruct(model: ConstraintModel, q, v) -> Array:
    """Inverse decomposition ``q + jac(q) v``."""
    q = np.asarray(q, dtype=float)
    return q + np.asarray(model.jacobian(q)) @ np.atleast_1d(np.asarray(v, dtype=float))


def project_to_manifold(model: ConstraintModel, x,
                        cfg: SolverConfig = DEFAULT_SOLVER) -> TubularDecomposition:
    """Solve ``x = q + jac(q) v``, ``residual(q) = 0`` for ``(q, v)``.

    Newton's method on the joint unknowns starting from ``q = x, v = 0`` with
    step halving whenever the residual norm fails to decrease.

    Raises:
        NoConvergence: no solution within ``cfg.max_iter`` iterations.
        NormalCapExceeded: converged, but ``|v|`` exceeds ``model.v_max``.
    """
    x = np.asarray(x, dtype=float)
    kern = _kernels.backend(model.residual, model.jacobian, model.hessians)
    q, v, status = kern.project(model.residual, model.jacobian, model.hessians, x,
                                cfg.tol, cfg.recon_tol, cfg.max_iter, cfg.max_backtrack)
    if status != _kernels.OK:
        raise NoConvergence(f"projection failed: {_kernels.STATUS_NAMES[status]}")
    norm = float(np.linalg.norm(v))
    if norm > model.v_max:
        raise NormalCapExceeded(norm, model.v_max)
    return TubularDecomposition(q, v, x)


def relative_error(approx, exact) -> float:
    approx = np.asarray(approx, dtype=float)
    exact = np.asarray(exact, dtype=float)
    scale = max(float(np.max(np.abs(exact))), 1e-300)
    return float(np.max(np.abs(approx - exact))) / scale


def fd_jacobian_error(model: ConstraintModel, x, step=1e-6) -> float:
    """Relative error of ``model.jacobian`` against central differences."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    fd = np.empty((n, model.codim))
    for k in range(n):
        h = step * max(1.0, abs(x[k]))
        e = np.zeros(n)
        e[k] = h
        fd[k] = (np.asarray(model.residual(x + e)) - np.asarray(model.residual(x - e))) / (2 * h)
    return relative_error(fd, model.jacobian(x))


def fd_hessian_error(model: ConstraintModel, x, step=1e-5) -> float:
    """Relative error of ``model.hessians`` against differences of the Jacobian."""
    x = np.asarray(x, dtype=float)
    fd = _fd_hessians(model.jacobian, step)(x)
    return relative_error(fd, model.hessians(x))
