"""Reference values for the built-in benchmarks, from closed forms or quadrature."""

import numpy as np
from scipy import integrate

from .ellipses import EllipseSuiteParams
from .tetrahedron import ABS_DET, DEFAULT_CHIRAL_STRENGTH


def _speed(t, a, b):
    return np.sqrt((a * np.sin(t)) ** 2 + (b * np.cos(t)) ** 2)


def ellipse_arc_lengths(p: EllipseSuiteParams = EllipseSuiteParams()) -> np.ndarray:
    """Perimeters of the ellipses by adaptive quadrature."""
    out = []
    for a, b in zip(p.a, p.b):
        val, _ = integrate.quad(_speed, 0.0, 2 * np.pi, args=(a, b), epsabs=1e-13, epsrel=1e-13)
        out.append(val)
    return np.array(out)


def ellipse_occupancy(p: EllipseSuiteParams = EllipseSuiteParams()) -> np.ndarray:
    """Component probabilities of the uniform (arc-length) measure."""
    lengths = ellipse_arc_lengths(p)
    return lengths / lengths.sum()


def ellipse_support(p: EllipseSuiteParams = EllipseSuiteParams()):
    """Range of the first coordinate over the suite."""
    c = np.asarray(p.centers, dtype=float)
    a = np.asarray(p.a, dtype=float)
    return float(np.min(c[:, 0] - a)), float(np.max(c[:, 0] + a))


def ellipse_q1_cdf(p: EllipseSuiteParams = EllipseSuiteParams()):
    """CDF of the first coordinate under the uniform measure on the suite."""
    lengths = ellipse_arc_lengths(p)
    total = lengths.sum()
    params = [(c[0], a, b) for c, a, b in zip(p.centers, p.a, p.b)]

    def cdf(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros_like(x)
        for i, xi in enumerate(x):
            acc = 0.0
            for c1, a, b in params:
                u = np.clip((xi - c1) / a, -1.0, 1.0)
                lo = np.arccos(u)
                # q1 <= xi on t in [lo, 2 pi - lo]; symmetric halves
                val, _ = integrate.quad(_speed, lo, np.pi, args=(a, b), epsabs=1e-13, epsrel=1e-12)
                acc += 2 * val
            out[i] = acc / total
        return out

    return cdf


def circle_radial_moments(eps: float):
    """``E|v|^2`` and ``E[xi^2 / eps]`` for the relaxed unit circle with ``V = 0``.

    The radial density is ``r exp(-(r^2 - 1)^2 / eps)`` and ``v = (r - 1) / 2``.
    """
    def dens(r):
        return r * np.exp(-((r * r - 1) ** 2) / eps)

    width = 10 * np.sqrt(eps)
    lo, hi = 0.0, np.sqrt(1 + width)
    pts = [1.0]
    z, _ = integrate.quad(dens, lo, hi, points=pts, epsabs=0, epsrel=1e-12, limit=200)
    mv, _ = integrate.quad(lambda r: dens(r) * ((r - 1) / 2) ** 2, lo, hi, points=pts,
                           epsabs=0, epsrel=1e-12, limit=200)
    mx, _ = integrate.quad(lambda r: dens(r) * (r * r - 1) ** 2 / eps, lo, hi, points=pts,
                           epsabs=0, epsrel=1e-12, limit=200)
    return mv / z, mx / z


def tetrahedron_ratio(chiral_strength: float = DEFAULT_CHIRAL_STRENGTH) -> float:
    """``P(M+) / P(M-)``; both components are SO(3) orbits of equal volume."""
    return float(np.exp(-2 * chiral_strength * ABS_DET))


def reference_quantities(benchmark: str) -> dict:
    """Reference record for a benchmark id, including how it was obtained."""
    if benchmark == "ellipses":
        p = EllipseSuiteParams()
        return {
            "arc_lengths": ellipse_arc_lengths(p).tolist(),
            "occupancy": ellipse_occupancy(p).tolist(),
            "q1_support": list(ellipse_support(p)),
            "method": "adaptive Gauss-Kronrod quadrature of the perimeter integrals",
        }
    if benchmark == "tetrahedron":
        r = tetrahedron_ratio()
        return {
            "ratio": r,
            "p_plus": r / (1 + r),
            "abs_det": float(ABS_DET),
            "method": "closed form; components are congruent SO(3) orbits",
        }
    if benchmark == "sir":
        return {"occupancy": [0.5, 0.5], "method": "strain exchange symmetry"}
    raise KeyError(f"no reference quantities for {benchmark!r}")
