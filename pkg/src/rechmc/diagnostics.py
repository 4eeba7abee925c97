"""Convergence and validation statistics for sampler output."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from .dynamics import PhaseState, Potential, rattle_step
from .errors import (ExchangeNotAdmissible, NoConvergence, NormalCapExceeded,
                     ShapeMismatch, TooShort)
from .exchange import JointState, NotAdmissible, jacobian_exact, propose_exchange
from .geometry import (DEFAULT_SOLVER, ConstraintModel, SolverConfig,
                       project_to_manifold, relative_error, tangent_basis)
from .samplers import project_momentum

Array = np.ndarray


@dataclass
class SummaryStats:
    ess: float
    ess_per_n: float
    rhat: float
    accept_rates: Dict[str, float] = field(default_factory=dict)


def autocorrelation(x) -> Array:
    """Normalised autocorrelation of a series via FFT."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    xc = x - x.mean()
    size = 1 << int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(xc, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n]
    return acov / acov[0]


def ess(series) -> float:
    """Effective sample size by Geyer's initial monotone sequence estimator.

    The estimate is capped at the series length; a constant series has
    ESS 0.

    Raises:
        TooShort: fewer than 10 values.
    """
    x = np.asarray(series, dtype=float).ravel()
    n = x.shape[0]
    if n < 10:
        raise TooShort(f"need at least 10 values, got {n}")
    if np.ptp(x) == 0 or not np.isfinite(x.var()) or x.var() == 0:
        return 0.0
    rho = autocorrelation(x)
    n_pairs = n // 2
    pairs = rho[0:2 * n_pairs:2] + rho[1:2 * n_pairs:2]
    neg = np.flatnonzero(pairs < 0)
    k = neg[0] if neg.size else n_pairs
    pairs = np.minimum.accumulate(pairs[:k])
    tau = -1.0 + 2.0 * pairs.sum()
    if tau <= 0:
        return float(n)
    return float(min(n, n / tau))


def split_rhat(chains: Sequence) -> float:
    """Split-chain potential scale reduction factor.

    Raises:
        ShapeMismatch: fewer than two chains, unequal lengths or length < 4.
    """
    arrs = [np.asarray(c, dtype=float).ravel() for c in chains]
    if len(arrs) < 2:
        raise ShapeMismatch("need at least two chains")
    n = arrs[0].shape[0]
    if n < 4 or any(a.shape[0] != n for a in arrs):
        raise ShapeMismatch("chains must share a length of at least 4")
    half = n // 2
    halves = np.array([h for a in arrs for h in (a[:half], a[n - half:])])
    means = halves.mean(axis=1)
    w = halves.var(axis=1, ddof=1).mean()
    b = half * means.var(ddof=1)
    if w == 0:
        return 1.0 if b == 0 else float("inf")
    var_plus = (half - 1) / half * w + b / half
    return float(np.sqrt(var_plus / w))


def component_occupancy(samples, labeler: Callable[[Array], int],
                        n_components: Optional[int] = None) -> Array:
    """Fraction of samples carrying each integer component label."""
    labels = np.array([int(labeler(np.asarray(s, dtype=float))) for s in samples])
    return occupancy_from_labels(labels, n_components)


def occupancy_from_labels(labels, n_components: Optional[int] = None) -> Array:
    labels = np.asarray(labels, dtype=int)
    size = int(labels.max()) + 1 if labels.size else 0
    if n_components is not None:
        size = max(size, n_components)
    counts = np.bincount(labels, minlength=size).astype(float)
    return counts / max(labels.size, 1)


def tv_distance(p, q) -> float:
    """Total variation distance of two probability vectors."""
    return float(0.5 * np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float)).sum())


def tv_error_1d(samples, reference_cdf: Callable[[Array], Array], support,
                bins: int = 50) -> float:
    """Binned total variation distance between samples and a reference law.

    Uses ``bins`` equal-width bins over ``support = (lo, hi)``; samples
    outside the support count as mismatch.
    """
    x = np.asarray(samples, dtype=float).ravel()
    edges = np.linspace(support[0], support[1], bins + 1)
    counts, _ = np.histogram(x, bins=edges)
    p_emp = counts / x.size
    cdf = np.asarray(reference_cdf(edges), dtype=float)
    p_ref = np.diff(cdf)
    outside_emp = 1.0 - p_emp.sum()
    outside_ref = max(0.0, 1.0 - p_ref.sum())
    return tv_distance(np.append(p_emp, outside_emp), np.append(p_ref, outside_ref))


@dataclass(frozen=True)
class NormalMoment:
    value: float
    n_used: int
    n_excluded: int

    def __float__(self):
        return self.value


def normal_moment(hot_samples, model: ConstraintModel,
                  cfg: SolverConfig = DEFAULT_SOLVER) -> NormalMoment:
    """Monte Carlo estimate of ``E|v|^2`` over projectable ambient samples."""
    total = 0.0
    used = 0
    excluded = 0
    for x in hot_samples:
        try:
            dec = project_to_manifold(model, x, cfg)
        except (NoConvergence, NormalCapExceeded):
            excluded += 1
            continue
        total += float(dec.normal @ dec.normal)
        used += 1
    return NormalMoment(total / used if used else float("nan"), used, excluded)


def _chart(model: ConstraintModel, q: Array, u_basis: Array):
    # u -> point of the manifold above q + U u along the normal space at q
    j0 = np.asarray(model.jacobian(q))

    def psi(u):
        w = np.zeros(model.codim)
        for _ in range(50):
            y = q + u_basis @ u + j0 @ w
            dw = np.linalg.solve(np.asarray(model.jacobian(y)).T @ j0,
                                 np.asarray(model.residual(y)))
            w = w - dw
            if np.max(np.abs(dw)) <= 1e-15 * (1.0 + np.max(np.abs(w))):
                break
        return q + u_basis @ u + j0 @ w

    return psi


def fd_jacobian_oracle(model: ConstraintModel, z: JointState,
                       cfg: SolverConfig = DEFAULT_SOLVER, step: float = 1e-6) -> float:
    """Finite-difference ``|det|`` of the exchange map in local charts.

    The manifold factor uses tangent-plane coordinates (a graph chart built
    on ``tangent_basis``) at the input and output base points; the ambient
    factor uses Cartesian coordinates. Central differences with step
    ``step * max(1, |coordinate|)``.

    Raises:
        ExchangeNotAdmissible: ``z`` fails the involution check.
    """
    q = np.asarray(z.cold, dtype=float)
    x = np.asarray(z.hot, dtype=float)
    prop = propose_exchange(model, z, cfg, "gram")
    if isinstance(prop, NotAdmissible):
        raise ExchangeNotAdmissible(prop.reason)
    q_x = prop.cold_new
    u_in = tangent_basis(model, q).columns
    u_out = tangent_basis(model, q_x).columns
    psi = _chart(model, q, u_in)
    d = model.manifold_dim
    n = model.ambient_dim

    def s_map(coords):
        qq = psi(coords[:d])
        dec = project_to_manifold(model, coords[d:], cfg)
        x_new = qq + np.asarray(model.jacobian(qq)) @ dec.normal
        return np.concatenate((u_out.T @ (dec.base - q_x), x_new))

    base = np.concatenate((np.zeros(d), x))
    scale_q = max(1.0, float(np.max(np.abs(q))))
    jac = np.empty((d + n, d + n))
    for k in range(d + n):
        h = step * (scale_q if k < d else max(1.0, abs(base[k])))
        e = np.zeros(d + n)
        e[k] = h
        jac[:, k] = (s_map(base + e) - s_map(base - e)) / (2 * h)
    return float(abs(np.linalg.det(jac)))


@dataclass(frozen=True)
class ExchangeCheck:
    """Errors of the exchange map at one admissible state.

    ``jacobian_error`` is relative to the finite-difference oracle,
    ``reciprocity`` is ``| |J(z)| |J(S z)| - 1 |`` and ``involution`` is
    ``|S(S z) - z|`` in the infinity norm.
    """

    jacobian_error: float
    reciprocity: float
    involution: float


def exchange_check(model: ConstraintModel, z: JointState,
                   cfg: SolverConfig = DEFAULT_SOLVER) -> ExchangeCheck:
    """Compare the exact exchange Jacobian with the oracle and test the involution.

    Raises:
        ExchangeNotAdmissible: ``z`` or its image fails the involution check.
    """
    prop = propose_exchange(model, z, cfg, "exact")
    if isinstance(prop, NotAdmissible):
        raise ExchangeNotAdmissible(prop.reason)
    z1 = JointState(prop.cold_new, prop.hot_new)
    back = propose_exchange(model, z1, cfg, "exact")
    if isinstance(back, NotAdmissible):
        raise ExchangeNotAdmissible(f"image: {back.reason}")
    oracle = fd_jacobian_oracle(model, z, cfg)
    recip = prop.jacobian_factor * jacobian_exact(model, prop.cold_new, z.cold, prop.normal)
    inv = max(float(np.max(np.abs(back.cold_new - z.cold))),
              float(np.max(np.abs(back.hot_new - z.hot))))
    return ExchangeCheck(relative_error(prop.jacobian_factor, oracle), abs(recip - 1.0), inv)


def admissible_states(model: ConstraintModel, cold, hot, n: int, rng: np.random.Generator,
                      cfg: SolverConfig = DEFAULT_SOLVER, max_tries: int = 100_000):
    """Up to ``n`` admissible joint states pairing random rows of ``cold`` and ``hot``."""
    cold = np.asarray(cold, dtype=float)
    hot = np.asarray(hot, dtype=float)
    out = []
    for _ in range(max_tries):
        if len(out) == n:
            break
        z = JointState(cold[rng.integers(cold.shape[0])], hot[rng.integers(hot.shape[0])])
        if not isinstance(propose_exchange(model, z, cfg, "gram"), NotAdmissible):
            out.append(z)
    return out


def rattle_drift(model: ConstraintModel, pot: Potential, q, h: float, n_steps: int,
                 rng: np.random.Generator, cfg: SolverConfig = DEFAULT_SOLVER) -> float:
    """Largest constraint violation along ``n_steps`` RATTLE steps from ``q``.

    The momentum is a projected standard normal draw.
    """
    q = np.asarray(q, dtype=float)
    s = PhaseState(q, project_momentum(model, q, rng.standard_normal(q.shape[0])))
    worst = model.violation(q)
    for _ in range(n_steps):
        s, _ = rattle_step(model, pot, s, h, cfg)
        worst = max(worst, model.violation(s.position))
    return float(worst)


def loglog_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(np.asarray(x, dtype=float)),
                            np.log(np.asarray(y, dtype=float)), 1)[0])
