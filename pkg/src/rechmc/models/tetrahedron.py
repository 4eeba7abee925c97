"""Rigid tetrahedral bond geometry with a chiral potential.

The state stacks three bond vectors ``q = (q2, q3, q4)`` in ``R^9``. Unit bond
lengths and pairwise cosines of -1/3 leave a 3-d manifold made of two mirror
image components, told apart by the sign of ``det[q2 q3 q4]``.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit
from scipy.spatial.transform import Rotation

from ..dynamics import Potential
from ..errors import ConstructionError
from ..geometry import ConstraintModel
from ._common import Benchmark

SQRT2 = np.sqrt(2.0)
REFERENCE = np.array([1.0, 0.0, 0.0,
                      -1.0 / 3.0, 2.0 * SQRT2 / 3.0, 0.0,
                      -1.0 / 3.0, -SQRT2 / 3.0, np.sqrt(6.0) / 3.0])
MIRRORED = REFERENCE * np.tile([1.0, 1.0, -1.0], 3)
# |det| on the constraint set
ABS_DET = 4.0 * np.sqrt(3.0) / 9.0
# strength for which the two components have probability ratio exp(-sqrt(2))
DEFAULT_CHIRAL_STRENGTH = 3.0 * np.sqrt(6.0) / 8.0


@dataclass(frozen=True)
class TetrahedronParams:
    chiral_strength: float = DEFAULT_CHIRAL_STRENGTH
    v_max: float = 1.0


@njit
def signed_volume(q):
    a, b, c = q[0:3], q[3:6], q[6:9]
    return (a[0] * (b[1] * c[2] - b[2] * c[1])
            - a[1] * (b[0] * c[2] - b[2] * c[0])
            + a[2] * (b[0] * c[1] - b[1] * c[0]))


@njit
def _cross(u, v):
    return np.array([u[1] * v[2] - u[2] * v[1],
                     u[2] * v[0] - u[0] * v[2],
                     u[0] * v[1] - u[1] * v[0]])


# (first block, second block) of each constraint; equal blocks mean a norm
_PAIRS = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))


def _constant_hessians():
    h = np.zeros((6, 9, 9))
    eye = np.eye(3)
    for k, (i, j) in enumerate(_PAIRS):
        if i == j:
            h[k, 3 * i:3 * i + 3, 3 * i:3 * i + 3] = 2 * eye
        else:
            h[k, 3 * i:3 * i + 3, 3 * j:3 * j + 3] = eye
            h[k, 3 * j:3 * j + 3, 3 * i:3 * i + 3] = eye
    return h


_HESSIANS = _constant_hessians()


@njit
def residual(q):
    a, b, c = q[0:3], q[3:6], q[6:9]
    return np.array([a @ a - 1.0, b @ b - 1.0, c @ c - 1.0,
                     a @ b + 1.0 / 3.0, a @ c + 1.0 / 3.0, b @ c + 1.0 / 3.0])


@njit
def jacobian(q):
    a, b, c = q[0:3], q[3:6], q[6:9]
    j = np.zeros((9, 6))
    j[0:3, 0] = 2.0 * a
    j[3:6, 1] = 2.0 * b
    j[6:9, 2] = 2.0 * c
    j[0:3, 3] = b
    j[3:6, 3] = a
    j[0:3, 4] = c
    j[6:9, 4] = a
    j[3:6, 5] = c
    j[6:9, 5] = b
    return j


@njit
def hessians(q):
    return _HESSIANS.copy()


@njit
def labeler(q):
    """0 for the positive-volume component, 1 for its mirror image."""
    return 0 if signed_volume(q) > 0 else 1


@lru_cache(maxsize=None)
def build_tetrahedron(p: TetrahedronParams = TetrahedronParams()) -> Benchmark:
    """Constraint model with ``U(q) = chiral_strength * det[q2 q3 q4]``."""
    if not p.chiral_strength >= 0:
        raise ConstructionError("chiral_strength must be non-negative")
    lam = float(p.chiral_strength)

    @njit
    def value(q):
        return lam * signed_volume(q)

    @njit
    def gradient(q):
        a, b, c = q[0:3], q[3:6], q[6:9]
        return lam * np.concatenate((_cross(b, c), _cross(c, a), _cross(a, b)))

    model = ConstraintModel(9, 6, residual, jacobian, hessians, v_max=p.v_max,
                            name="tetrahedron")
    return Benchmark(model, Potential(value, gradient), labeler)


def random_configuration(rng: np.random.Generator, mirrored: bool = False) -> np.ndarray:
    """Uniformly rotated copy of the reference (or mirrored) configuration."""
    rot = Rotation.random(random_state=rng).as_matrix()
    base = MIRRORED if mirrored else REFERENCE
    return (base.reshape(3, 3) @ rot.T).reshape(9)
