"""Level set of the identifiable combinations of a two-strain SIR model.

Parameters are ``theta = (beta1, beta2, gamma1, gamma2, rho)``. The sampler
works in rescaled coordinates ``z`` with ``theta = SCALE * z`` so that all
coordinates are of order one. The level set is that of the regularised map

    xi(theta) = (g1 + g2, g1 g2, (b1 + b2) rho / (rho^2 + d^2),
                 rho (g1 - g2)(b1 - b2) / ((b1 - b2)^2 + d^2)).

With ``form="rational"`` the residual is the relative mismatch
``xi(theta) / target - 1``. The default ``form="polynomial"`` clears the
positive denominator of the last component,

    (rho (g1 - g2) dB - t4 (dB^2 + d^2)) / (t4 (dB_ref^2 + d^2)),  dB = b1 - b2,

which has the same zero set but a gradient of equal size on both roots in
``dB``; the rational form's gradient differs tenfold between them, which
makes exchanges between the two parts of a branch fail.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from numba import njit

from ..errors import ConstructionError
from ..geometry import ConstraintModel
from ._common import Benchmark, box_potential

SCALE = np.array([1e-7, 1e-7, 1.0, 1.0, 1.0])
THETA_STAR = (1.6e-7, 1.3e-7, 0.2, 0.1, 0.3)
THETA_SWAPPED = (1.3e-7, 1.6e-7, 0.1, 0.2, 0.3)
FORMS = ("polynomial", "rational")


@njit
def _rational(t, d):
    # t / (t^2 + d^2) and its first two derivatives
    den = t * t + d * d
    f = t / den
    f1 = (d * d - t * t) / (den * den)
    f2 = (2.0 * t ** 3 - 6.0 * d * d * t) / (den * den * den)
    return f, f1, f2


@njit
def combinations(theta, delta):
    """Regularised identifiable combinations at ``theta`` (original units)."""
    b1, b2, g1, g2, rho = theta[0], theta[1], theta[2], theta[3], theta[4]
    fr = _rational(rho, delta)[0]
    fd = _rational(b1 - b2, delta)[0]
    return np.array([g1 + g2, g1 * g2, (b1 + b2) * fr, rho * (g1 - g2) * fd])


def combinations_unregularized(theta) -> np.ndarray:
    b1, b2, g1, g2, rho = (float(t) for t in theta)
    return np.array([g1 + g2, g1 * g2, (b1 + b2) / rho, rho * (g1 - g2) / (b1 - b2)])


@njit
def _theta_derivatives(theta, delta):
    b1, b2, g1, g2, rho = theta[0], theta[1], theta[2], theta[3], theta[4]
    fr, fr1, fr2 = _rational(rho, delta)
    fd, fd1, fd2 = _rational(b1 - b2, delta)
    s = b1 + b2
    dg = g1 - g2
    jac = np.zeros((5, 4))
    hes = np.zeros((4, 5, 5))
    jac[2, 0] = 1.0
    jac[3, 0] = 1.0
    jac[2, 1] = g2
    jac[3, 1] = g1
    hes[1, 2, 3] = 1.0
    hes[1, 3, 2] = 1.0
    jac[0, 2] = fr
    jac[1, 2] = fr
    jac[4, 2] = s * fr1
    for i in range(2):
        hes[2, i, 4] = fr1
        hes[2, 4, i] = fr1
    hes[2, 4, 4] = s * fr2
    jac[0, 3] = rho * dg * fd1
    jac[1, 3] = -rho * dg * fd1
    jac[2, 3] = rho * fd
    jac[3, 3] = -rho * fd
    jac[4, 3] = dg * fd
    sb = np.array([1.0, -1.0])
    for i in range(2):
        for k in range(2):
            hes[3, i, k] = rho * dg * fd2 * sb[i] * sb[k]
            hes[3, i, 2 + k] = rho * fd1 * sb[i] * sb[k]
            hes[3, 2 + k, i] = hes[3, i, 2 + k]
        hes[3, i, 4] = dg * fd1 * sb[i]
        hes[3, 4, i] = hes[3, i, 4]
        hes[3, 2 + i, 4] = fd * sb[i]
        hes[3, 4, 2 + i] = hes[3, 2 + i, 4]
    return jac, hes


@njit
def _cleared_last(theta, delta, t4):
    # rho (g1 - g2) dB - t4 (dB^2 + delta^2) with gradient and Hessian
    b1, b2, g1, g2, rho = theta[0], theta[1], theta[2], theta[3], theta[4]
    db = b1 - b2
    dg = g1 - g2
    val = rho * dg * db - t4 * (db * db + delta * delta)
    grad = np.zeros(5)
    hes = np.zeros((5, 5))
    sb = np.array([1.0, -1.0])
    for i in range(2):
        grad[i] = sb[i] * (rho * dg - 2.0 * t4 * db)
        grad[2 + i] = sb[i] * rho * db
        for k in range(2):
            hes[i, k] = -2.0 * t4 * sb[i] * sb[k]
            hes[i, 2 + k] = rho * sb[i] * sb[k]
            hes[2 + k, i] = hes[i, 2 + k]
        hes[i, 4] = dg * sb[i]
        hes[4, i] = hes[i, 4]
        hes[2 + i, 4] = db * sb[i]
        hes[4, 2 + i] = hes[2 + i, 4]
    grad[4] = dg * db
    return val, grad, hes


@dataclass(frozen=True)
class SirParams:
    """``target_combo`` defaults to the regularised combinations at ``THETA_STAR``.

    ``db_ref`` sets the normalisation of the polynomial last component.
    Normal coordinates scale inversely with the residual normalisation, and
    relaxed samples at useful ``epsilon`` have ``|v|`` of a few units, hence
    the large default ``v_max``.
    """

    target_combo: Optional[Tuple[float, float, float, float]] = None
    delta: float = 1e-8
    form: str = "polynomial"
    db_ref: float = 3e-8
    box: Tuple[Tuple[float, float], ...] = ((1e-8, 1e-6), (1e-8, 1e-6), (0.01, 1.0),
                                            (0.01, 1.0), (0.01, 1.0))
    v_max: float = 20.0

    def resolved_target(self) -> np.ndarray:
        if self.target_combo is None:
            return combinations(np.array(THETA_STAR), self.delta)
        return np.asarray(self.target_combo, dtype=float)


def to_theta(z) -> np.ndarray:
    return np.asarray(z, dtype=float) * SCALE


def to_z(theta) -> np.ndarray:
    return np.asarray(theta, dtype=float) / SCALE


@lru_cache(maxsize=None)
def build_sir(p: SirParams = SirParams()) -> Benchmark:
    """One-dimensional level set in the rescaled 5-d parameter box."""
    if not p.delta > 0:
        raise ConstructionError("delta must be positive")
    if p.form not in FORMS:
        raise ConstructionError(f"form must be one of {FORMS}")
    box = np.asarray(p.box, dtype=float)
    if box.shape != (5, 2) or not np.all(np.isfinite(box)) or np.any(box[:, 0] >= box[:, 1]):
        raise ConstructionError("box must be five finite intervals with lower < upper")
    if np.any(box[:, 0] <= 0):
        raise ConstructionError("box must lie in the positive orthant")
    target = p.resolved_target()
    if target.shape != (4,) or np.any(target == 0) or not np.all(np.isfinite(target)):
        raise ConstructionError("target combinations must be four finite nonzero numbers")
    inv_t = 1.0 / target
    scale = SCALE.copy()
    delta = float(p.delta)
    t4 = float(target[3])
    polynomial = p.form == "polynomial"
    if polynomial:
        inv_t[3] = 1.0 / (abs(t4) * (p.db_ref ** 2 + delta ** 2))

    @njit
    def residual(z):
        theta = z * scale
        r = combinations(theta, delta) * inv_t - 1.0
        if polynomial:
            r[3] = _cleared_last(theta, delta, t4)[0] * inv_t[3]
        return r

    @njit
    def jacobian(z):
        theta = z * scale
        jac, _ = _theta_derivatives(theta, delta)
        if polynomial:
            jac[:, 3] = _cleared_last(theta, delta, t4)[1]
        out = np.empty((5, 4))
        for i in range(5):
            for k in range(4):
                out[i, k] = jac[i, k] * scale[i] * inv_t[k]
        return out

    @njit
    def hessians(z):
        theta = z * scale
        _, hes = _theta_derivatives(theta, delta)
        if polynomial:
            hes[3] = _cleared_last(theta, delta, t4)[2]
        out = np.empty((4, 5, 5))
        for k in range(4):
            for i in range(5):
                for j in range(5):
                    out[k, i, j] = hes[k, i, j] * scale[i] * scale[j] * inv_t[k]
        return out

    @njit
    def labeler(z):
        return 0 if z[2] > z[3] else 1

    model = ConstraintModel(5, 4, residual, jacobian, hessians, v_max=p.v_max, name="sir")
    pot = box_potential(box[:, 0] / SCALE, box[:, 1] / SCALE)
    return Benchmark(model, pot, labeler)
