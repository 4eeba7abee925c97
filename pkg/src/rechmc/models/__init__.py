"""Built-in constraint models."""

from ._common import ZERO_POTENTIAL, Benchmark, box_potential
from .ellipses import EllipseSuiteParams, build_ellipse_suite
from .reference import reference_quantities
from .simple import circle, ellipse, hyperplane
from .sir import SirParams, build_sir
from .tetrahedron import TetrahedronParams, build_tetrahedron

__all__ = [
    "Benchmark",
    "EllipseSuiteParams",
    "SirParams",
    "TetrahedronParams",
    "ZERO_POTENTIAL",
    "box_potential",
    "build_ellipse_suite",
    "build_sir",
    "build_tetrahedron",
    "circle",
    "ellipse",
    "hyperplane",
    "reference_quantities",
]
