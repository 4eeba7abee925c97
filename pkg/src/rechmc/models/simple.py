"""Small analytic manifolds used for validation."""

from functools import lru_cache

import numpy as np
from numba import njit

from ..geometry import ConstraintModel
from ._common import ZERO_POTENTIAL, Benchmark


@lru_cache(maxsize=None)
def ellipse(a: float = 1.0, b: float = 1.0, v_max: float = 1.0) -> Benchmark:
    """Ellipse ``x1^2/a^2 + x2^2/b^2 = 1`` in the plane with ``V = 0``."""
    a2, b2 = float(a) ** 2, float(b) ** 2

    @njit
    def residual(x):
        return np.array([x[0] ** 2 / a2 + x[1] ** 2 / b2 - 1.0])

    @njit
    def jacobian(x):
        j = np.empty((2, 1))
        j[0, 0] = 2.0 * x[0] / a2
        j[1, 0] = 2.0 * x[1] / b2
        return j

    @njit
    def hessians(x):
        h = np.zeros((1, 2, 2))
        h[0, 0, 0] = 2.0 / a2
        h[0, 1, 1] = 2.0 / b2
        return h

    @njit
    def labeler(x):
        return 0

    model = ConstraintModel(2, 1, residual, jacobian, hessians, v_max=v_max,
                            name=f"ellipse({a:g},{b:g})")
    return Benchmark(model, ZERO_POTENTIAL, labeler)


def circle(v_max: float = 1.0) -> Benchmark:
    """Unit circle ``|x|^2 = 1``."""
    return ellipse(1.0, 1.0, v_max)


@lru_cache(maxsize=None)
def hyperplane(n: int = 2) -> Benchmark:
    """The hyperplane ``x_0 = 0`` in ``R^n``; relaxations are Gaussian in ``x_0``."""

    @njit
    def residual(x):
        return x[:1].copy()

    @njit
    def jacobian(x):
        j = np.zeros((x.shape[0], 1))
        j[0, 0] = 1.0
        return j

    @njit
    def hessians(x):
        return np.zeros((1, x.shape[0], x.shape[0]))

    @njit
    def labeler(x):
        return 0

    model = ConstraintModel(n, 1, residual, jacobian, hessians, name=f"hyperplane({n})")
    return Benchmark(model, ZERO_POTENTIAL, labeler)
