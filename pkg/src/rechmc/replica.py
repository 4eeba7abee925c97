"""Replica-exchange driver coupling a manifold chain with a ladder of relaxations.

Each iteration advances the manifold chain by one constrained HMC step and
every relaxed level by one HMC step. Every ``exchange_period`` iterations the
relaxed levels attempt adjacent swaps, then the manifold chain attempts an
exchange with the coldest level.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .dynamics import Potential
from .errors import InvalidInitialPoint
from .exchange import JointState, exchange_transition
from .geometry import DEFAULT_SOLVER, ConstraintModel, SolverConfig
from .samplers import KernelConfig, RelaxedTarget, chmc_step, hmc_ladder_step, make_rng

Array = np.ndarray

# exchange_log pair index of the manifold <-> coldest-level exchange
MANIFOLD_PAIR = -1
ACCEPTED, REJECTED, NOT_ADMISSIBLE = 1, 0, -1
_OUTCOME = {"accepted": ACCEPTED, "rejected": REJECTED, "not_admissible": NOT_ADMISSIBLE}


@dataclass(frozen=True)
class LadderLevel:
    """One relaxed chain: relaxation ``epsilon``, HMC settings, initial state."""

    epsilon: float
    step_size: float
    n_steps: int
    state: Array
    step_range: float = 1.0


@dataclass(frozen=True)
class ReplicaConfig:
    """Settings of one replica-exchange run.

    ``exchange_period = 0`` disables all swaps. Chain ``0`` (manifold),
    chains ``1..I`` (ladder) and chain ``I + 1`` (swap decisions) draw from
    independent streams derived from ``master_seed``.
    """

    n_iterations: int
    exchange_period: int
    ladder: Tuple[LadderLevel, ...]
    cold_init: Array
    cold_step_size: float
    cold_n_steps: int
    master_seed: int = 0
    jacobian_mode: str = "exact"
    cold_step_range: float = 1.0
    hot_thin: int = 1
    record_hot: bool = True
    solver: SolverConfig = DEFAULT_SOLVER

    def __post_init__(self):
        if self.n_iterations < 0:
            raise ValueError("n_iterations must be non-negative")
        if self.exchange_period < 0:
            raise ValueError("exchange_period must be >= 1, or 0 to disable exchanges")
        eps = [lv.epsilon for lv in self.ladder]
        if any(e <= 0 for e in eps) or any(b <= a for a, b in zip(eps, eps[1:])):
            raise ValueError("ladder epsilons must be positive and strictly increasing")
        if self.hot_thin < 1:
            raise ValueError("hot_thin must be >= 1")


@dataclass
class ChainTrace:
    """Everything recorded by ``run``.

    ``cold_samples`` has ``n_iterations + 1`` rows (initial state first);
    ``hot_samples[i]`` holds every ``hot_thin``-th state of level ``i``.
    ``exchange_log`` rows are ``(iteration, pair, outcome)`` where ``pair``
    is ``MANIFOLD_PAIR`` or the lower index of a ladder pair.
    """

    cold_samples: Array
    hot_samples: List[Array]
    cold_accepts: int
    hot_accepts: Array
    swap_attempts: Array
    swap_accepts: Array
    exchange_attempts: int
    exchange_accepts: int
    exchange_not_admissible: int
    exchange_log: Array
    epsilons: Tuple[float, ...] = field(default_factory=tuple)

    @property
    def n_iterations(self) -> int:
        return self.cold_samples.shape[0] - 1

    def accept_rates(self) -> dict:
        n = max(self.n_iterations, 1)
        out = {"cold": self.cold_accepts / n}
        for i, a in enumerate(self.hot_accepts):
            out[f"level_{i}"] = float(a) / n
        if self.exchange_attempts:
            out["exchange"] = self.exchange_accepts / self.exchange_attempts
            out["exchange_not_admissible"] = self.exchange_not_admissible / self.exchange_attempts
        for i, (a, t) in enumerate(zip(self.swap_accepts, self.swap_attempts)):
            if t:
                out[f"swap_{i}_{i + 1}"] = float(a) / float(t)
        return out


def swap_log_ratio(lower: RelaxedTarget, upper: RelaxedTarget, x_lower, x_upper) -> float:
    """Log acceptance ratio of exchanging the states of two relaxed levels."""
    cur = lower.value(x_lower) + upper.value(x_upper)
    new = lower.value(x_upper) + upper.value(x_lower)
    return cur - new


def ladder_swap(targets: Sequence[RelaxedTarget], states: Sequence[Array],
                rng: np.random.Generator, parity: int = 0):
    """Adjacent swaps ``(i, i + 1)`` for ``i = parity, parity + 2, ...``.

    Returns ``(new_states, results)`` with ``results`` a list of
    ``(i, accepted)``. One uniform variate is drawn per attempted pair.
    """
    states = list(states)
    results = []
    for i in range(parity % 2, len(states) - 1, 2):
        u = rng.random()
        with np.errstate(invalid="ignore", over="ignore"):
            r = swap_log_ratio(targets[i], targets[i + 1], states[i], states[i + 1])
        ok = bool(np.log(u) < r)
        if ok:
            states[i], states[i + 1] = states[i + 1], states[i]
        results.append((i, ok))
    return states, results


def run(model: ConstraintModel, potential: Potential, cfg: ReplicaConfig) -> ChainTrace:
    """Run the replica-exchange sampler.

    Raises:
        InvalidInitialPoint: the manifold start violates the constraint or
            has infinite energy, or a relaxed start has infinite energy.
    """
    solver = cfg.solver
    q = np.array(cfg.cold_init, dtype=float)
    if q.shape != (model.ambient_dim,) or model.violation(q) > solver.tol:
        raise InvalidInitialPoint("cold start must lie on the manifold")
    if not np.isfinite(float(potential.value(q))):
        raise InvalidInitialPoint("cold start has infinite potential")
    targets = [RelaxedTarget(model, potential, lv.epsilon) for lv in cfg.ladder]
    hot = []
    for t, lv in zip(targets, cfg.ladder):
        x = np.array(lv.state, dtype=float)
        if x.shape != (model.ambient_dim,) or not np.isfinite(t.value(x)):
            raise InvalidInitialPoint(f"relaxed start for epsilon={lv.epsilon} is not valid")
        hot.append(x)

    n_levels = len(cfg.ladder)
    cold_cfg = KernelConfig(cfg.cold_step_size, cfg.cold_n_steps, make_rng(cfg.master_seed, 0),
                            cfg.cold_step_range)
    hot_cfgs = [KernelConfig(lv.step_size, lv.n_steps, make_rng(cfg.master_seed, i + 1),
                             lv.step_range) for i, lv in enumerate(cfg.ladder)]
    swap_rng = make_rng(cfg.master_seed, n_levels + 1)

    n = cfg.n_iterations
    cold_trace = np.empty((n + 1, model.ambient_dim))
    cold_trace[0] = q
    thin = cfg.hot_thin
    n_hot = n // thin + 1
    hot_trace = [np.empty((n_hot if cfg.record_hot else 0, model.ambient_dim))
                 for _ in range(n_levels)]
    if cfg.record_hot:
        for i in range(n_levels):
            hot_trace[i][0] = hot[i]
    cold_acc = 0
    hot_acc = np.zeros(n_levels, dtype=np.int64)
    swap_att = np.zeros(max(n_levels - 1, 0), dtype=np.int64)
    swap_acc = np.zeros_like(swap_att)
    ex_att = ex_acc = ex_na = 0
    log = []
    period = cfg.exchange_period
    round_index = 0

    for k in range(1, n + 1):
        q, ok = chmc_step(model, potential, q, cold_cfg, solver)
        cold_acc += ok
        if n_levels:
            hot, ok = hmc_ladder_step(targets, hot, hot_cfgs)
            hot_acc += ok
        if period and k % period == 0 and n_levels:
            if n_levels > 1:
                hot, results = ladder_swap(targets, hot, swap_rng, round_index)
                for i, ok in results:
                    swap_att[i] += 1
                    swap_acc[i] += ok
                    log.append((k, i, ACCEPTED if ok else REJECTED))
            round_index += 1
            z, outcome = exchange_transition(targets[0], JointState(q, hot[0]), swap_rng,
                                             solver, cfg.jacobian_mode)
            q, hot[0] = z.cold, z.hot
            ex_att += 1
            ex_acc += outcome == "accepted"
            ex_na += outcome == "not_admissible"
            log.append((k, MANIFOLD_PAIR, _OUTCOME[outcome]))
        cold_trace[k] = q
        if cfg.record_hot and k % thin == 0:
            for i in range(n_levels):
                hot_trace[i][k // thin] = hot[i]

    return ChainTrace(
        cold_samples=cold_trace,
        hot_samples=hot_trace,
        cold_accepts=int(cold_acc),
        hot_accepts=hot_acc,
        swap_attempts=swap_att,
        swap_accepts=swap_acc,
        exchange_attempts=ex_att,
        exchange_accepts=ex_acc,
        exchange_not_admissible=ex_na,
        exchange_log=np.array(log, dtype=np.int64).reshape(-1, 3),
        epsilons=tuple(lv.epsilon for lv in cfg.ladder),
    )
