"""Shared pieces of the built-in models."""

from typing import Callable, NamedTuple

import numpy as np
from numba import njit

from ..dynamics import Potential
from ..geometry import ConstraintModel


class Benchmark(NamedTuple):
    """Constraint model, potential and component labeler of one benchmark."""

    model: ConstraintModel
    potential: Potential
    labeler: Callable[[np.ndarray], int]


@njit
def _zero_value(x):
    return 0.0


@njit
def _zero_gradient(x):
    return np.zeros_like(x)


ZERO_POTENTIAL = Potential(_zero_value, _zero_gradient)


def box_potential(lower, upper):
    """Indicator potential of the box ``lower <= x <= upper``.

    The value is ``+inf`` outside and the gradient is NaN there, so every
    integrator step that leaves the box yields a rejected proposal.
    """
    lo = np.asarray(lower, dtype=float).copy()
    hi = np.asarray(upper, dtype=float).copy()

    @njit
    def value(x):
        for i in range(x.shape[0]):
            if x[i] < lo[i] or x[i] > hi[i]:
                return np.inf
        return 0.0

    @njit
    def gradient(x):
        for i in range(x.shape[0]):
            if x[i] < lo[i] or x[i] > hi[i]:
                return np.full(x.shape[0], np.nan)
        return np.zeros(x.shape[0])

    return Potential(value, gradient)
