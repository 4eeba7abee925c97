"""Four disjoint ellipses in the plane, encoded by a single product constraint."""

from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np
from numba import njit

from ..errors import ConstructionError
from ..geometry import ConstraintModel
from ._common import ZERO_POTENTIAL, Benchmark


@dataclass(frozen=True)
class EllipseSuiteParams:
    centers: Tuple[Tuple[float, float], ...] = ((2.0, 0.0), (-2.0, 0.0), (0.0, 2.0), (0.0, -2.0))
    a: Tuple[float, ...] = (1.6, 0.8, 1.2, 0.6)
    b: Tuple[float, ...] = (0.6, 1.4, 0.9, 1.3)
    v_max: float = 1.0

    def arrays(self):
        c = np.asarray(self.centers, dtype=float)
        return c, np.asarray(self.a, dtype=float), np.asarray(self.b, dtype=float)


def ellipse_factors(p: EllipseSuiteParams, x) -> np.ndarray:
    """Single-ellipse residuals ``f_k(x)``; the suite residual is their product."""
    c, a, b = p.arrays()
    x = np.asarray(x, dtype=float)
    return (x[0] - c[:, 0]) ** 2 / a ** 2 + (x[1] - c[:, 1]) ** 2 / b ** 2 - 1.0


def _check_disjoint(p: EllipseSuiteParams, n_points: int = 4000):
    c, a, b = p.arrays()
    if not (len(c) == len(a) == len(b)) or np.any(a <= 0) or np.any(b <= 0):
        raise ConstructionError("need matching centers and positive semi-axes")
    t = np.linspace(0.0, 2 * np.pi, n_points, endpoint=False)
    for k in range(len(a)):
        pts = np.stack([c[k, 0] + a[k] * np.cos(t), c[k, 1] + b[k] * np.sin(t)])
        for j in range(len(a)):
            if j == k:
                continue
            f = (pts[0] - c[j, 0]) ** 2 / a[j] ** 2 + (pts[1] - c[j, 1]) ** 2 / b[j] ** 2 - 1
            if f.min() <= 1e-3:
                raise ConstructionError(f"ellipses {k} and {j} intersect or touch")
    # containment without boundary contact
    for k in range(len(a)):
        for j in range(len(a)):
            if j != k and (c[k, 0] - c[j, 0]) ** 2 / a[j] ** 2 + (c[k, 1] - c[j, 1]) ** 2 / b[j] ** 2 < 1:
                raise ConstructionError(f"ellipse {k} lies inside ellipse {j}")


@lru_cache(maxsize=None)
def build_ellipse_suite(p: EllipseSuiteParams = EllipseSuiteParams()) -> Benchmark:
    """Union of disjoint ellipses as the zero set of ``prod_k f_k``.

    Derivatives use the expanded product rule, so no division by a factor
    that vanishes on the manifold is ever performed.
    """
    _check_disjoint(p)
    c, a, b = p.arrays()
    ia2 = 1.0 / a ** 2
    ib2 = 1.0 / b ** 2
    cx = c[:, 0].copy()
    cy = c[:, 1].copy()
    k_count = len(a)

    @njit
    def _parts(x):
        dx = x[0] - cx
        dy = x[1] - cy
        f = dx * dx * ia2 + dy * dy * ib2 - 1.0
        g = np.empty((k_count, 2))
        g[:, 0] = 2.0 * dx * ia2
        g[:, 1] = 2.0 * dy * ib2
        return f, g

    @njit
    def _prod_except(f, skip1, skip2):
        out = 1.0
        for j in range(f.shape[0]):
            if j != skip1 and j != skip2:
                out *= f[j]
        return out

    @njit
    def residual(x):
        f, _ = _parts(x)
        return np.array([_prod_except(f, -1, -1)])

    @njit
    def jacobian(x):
        f, g = _parts(x)
        j = np.zeros((2, 1))
        for k in range(k_count):
            w = _prod_except(f, k, -1)
            j[0, 0] += g[k, 0] * w
            j[1, 0] += g[k, 1] * w
        return j

    @njit
    def hessians(x):
        f, g = _parts(x)
        h = np.zeros((1, 2, 2))
        for k in range(k_count):
            w = _prod_except(f, k, -1)
            h[0, 0, 0] += 2.0 * ia2[k] * w
            h[0, 1, 1] += 2.0 * ib2[k] * w
            for l in range(k_count):
                if l != k:
                    w2 = _prod_except(f, k, l)
                    for r in range(2):
                        for s in range(2):
                            h[0, r, s] += g[k, r] * g[l, s] * w2
        return h

    @njit
    def labeler(x):
        f, _ = _parts(x)
        return int(np.argmin(np.abs(f)))

    model = ConstraintModel(2, 1, residual, jacobian, hessians, v_max=p.v_max,
                            name="ellipses")
    return Benchmark(model, ZERO_POTENTIAL, labeler)


def ellipse_point(p: EllipseSuiteParams, k: int, t: float) -> np.ndarray:
    """Point of ellipse ``k`` at parameter angle ``t``."""
    c, a, b = p.arrays()
    return np.array([c[k, 0] + a[k] * np.cos(t), c[k, 1] + b[k] * np.sin(t)])
