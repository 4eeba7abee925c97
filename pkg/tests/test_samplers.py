import numpy as np
import pytest
from numba import njit
from scipy import special, stats

from rechmc.diagnostics import ess
from rechmc.dynamics import Potential
from rechmc.models import circle, hyperplane
from rechmc.models._common import ZERO_POTENTIAL
from rechmc.models.reference import circle_radial_moments
from rechmc.samplers import (KernelConfig, RelaxedTarget, chmc_step, hmc_ladder_step, hmc_step,
                             make_rng, project_momentum)

CIRCLE = circle().model


@njit
def _linear_value(q):
    return q[0]


@njit
def _linear_gradient(q):
    g = np.zeros_like(q)
    g[0] = 1.0
    return g


LINEAR = Potential(_linear_value, _linear_gradient)


def test_make_rng_streams():
    a = make_rng(3, 0).random(4)
    np.testing.assert_array_equal(a, make_rng(3, 0).random(4))
    assert not np.array_equal(a, make_rng(3, 1).random(4))
    assert not np.array_equal(a, make_rng(4, 0).random(4))
    assert isinstance(make_rng(0, 0).bit_generator, np.random.Philox)


def test_relaxed_target_value_and_gradient():
    t = RelaxedTarget(CIRCLE, LINEAR, 0.5)
    x = np.array([1.2, 0.3])
    xi = 1.2 ** 2 + 0.3 ** 2 - 1
    assert t.value(x) == pytest.approx(1.2 + xi ** 2 / 0.5, rel=1e-14)
    d = 1e-6
    fd = [(t.value(x + d * e) - t.value(x - d * e)) / (2 * d) for e in np.eye(2)]
    np.testing.assert_allclose(t.gradient(x), fd, rtol=1e-7)
    assert t.potential.value(x) == t.value(x)


@pytest.mark.parametrize("eps", [0.0, -1.0])
def test_relaxed_target_rejects_epsilon(eps):
    with pytest.raises(ValueError):
        RelaxedTarget(CIRCLE, ZERO_POTENTIAL, eps)


@pytest.mark.parametrize("kwargs", [dict(step_size=0.0), dict(n_steps=0), dict(step_range=0.5)])
def test_kernel_config_validation(kwargs):
    base = dict(step_size=0.1, n_steps=5, rng=make_rng(0, 0))
    base.update(kwargs)
    with pytest.raises(ValueError):
        KernelConfig(**base)


def test_draw_step_range():
    cfg = KernelConfig(0.1, 5, make_rng(0, 0), step_range=10.0)
    hs = np.array([cfg.draw_step() for _ in range(2000)])
    assert hs.min() >= 0.01 and hs.max() <= 0.1
    # log-uniform: the median sits at the geometric mean
    assert np.median(hs) == pytest.approx(np.sqrt(0.1 * 0.01), rel=0.1)
    assert KernelConfig(0.1, 5, make_rng(0, 0)).draw_step() == 0.1


def test_project_momentum():
    p = project_momentum(CIRCLE, np.array([1.0, 0.0]), np.array([1.0, 1.0]))
    np.testing.assert_allclose(p, [0.0, 1.0], atol=1e-15)
    q = np.array([0.6, 0.8])
    p1 = project_momentum(CIRCLE, q, np.array([0.3, -2.0]))
    np.testing.assert_allclose(project_momentum(CIRCLE, q, p1), p1, atol=1e-14)
    assert abs(p1 @ q) <= 1e-14


def test_hmc_exact_on_free_particle():
    # V = 0 and a zero residual: the Hamiltonian is kinetic only and conserved
    flat = hyperplane(3)
    target = RelaxedTarget(flat.model, ZERO_POTENTIAL, 1.0)
    cfg = KernelConfig(0.3, 7, make_rng(1, 0))
    q = np.zeros(3)
    for _ in range(50):
        q, acc = hmc_step(target, q, cfg)
        q[0] = 0.0
        assert acc


def test_hmc_circle_normal_moment():
    eps = 0.01
    target = RelaxedTarget(CIRCLE, ZERO_POTENTIAL, eps)
    cfg = KernelConfig(0.25 * np.sqrt(eps / 8), 10, make_rng(2, 0), step_range=2.0)
    q = np.array([1.0, 0.0])
    vals, acc = [], 0
    for _ in range(20000):
        q, a = hmc_step(target, q, cfg)
        acc += a
        vals.append((q @ q - 1) ** 2 / eps)
    vals = np.array(vals[2000:])
    _, ref = circle_radial_moments(eps)
    se = vals.std() / np.sqrt(ess(vals))
    assert abs(vals.mean() - ref) <= 3 * se
    assert 0.5 < acc / 20000 < 1.0


def test_hmc_hyperplane_variance():
    eps = 0.2
    target = RelaxedTarget(hyperplane(2).model, ZERO_POTENTIAL, eps)
    cfg = KernelConfig(0.1, 10, make_rng(3, 0), step_range=3.0)
    q = np.zeros(2)
    xs = []
    for _ in range(20000):
        q, _ = hmc_step(target, q, cfg)
        xs.append(q[0])
    xs = np.array(xs)
    se = eps / 2 * np.sqrt(2 / ess(xs ** 2))
    assert abs(np.mean(xs ** 2) - eps / 2) <= 4 * se


def test_chmc_circle_uniform():
    cfg = KernelConfig(0.5, 10, make_rng(4, 0), step_range=2.0)
    q = np.array([1.0, 0.0])
    angles = []
    for i in range(20000):
        q, _ = chmc_step(CIRCLE, ZERO_POTENTIAL, q, cfg)
        assert CIRCLE.violation(q) <= 1e-9
        if i % 10 == 0:
            angles.append(np.arctan2(q[1], q[0]))
    res = stats.kstest((np.array(angles) + np.pi) / (2 * np.pi), "uniform")
    assert res.pvalue > 0.001


def test_chmc_circle_linear_potential():
    cfg = KernelConfig(0.5, 10, make_rng(5, 0), step_range=2.0)
    q = np.array([1.0, 0.0])
    xs = []
    for _ in range(20000):
        q, _ = chmc_step(CIRCLE, LINEAR, q, cfg)
        xs.append(q[0])
    xs = np.array(xs)
    ref = -special.i1(1.0) / special.i0(1.0)
    assert ref == pytest.approx(-0.4464, abs=1e-4)
    assert abs(xs.mean() - ref) <= 4 * xs.std() / np.sqrt(ess(xs))


def test_ladder_step_matches_sequential():
    targets = [RelaxedTarget(CIRCLE, LINEAR, e) for e in (0.1, 0.5, 2.0)]
    states = [np.array([1.0, 0.0]), np.array([0.0, 1.1]), np.array([-0.5, 0.5])]

    def cfgs():
        return [KernelConfig(0.05 * (i + 1), 5, make_rng(9, i), 2.0) for i in range(3)]

    seq_cfgs, lad_cfgs = cfgs(), cfgs()
    seq, lad = list(states), list(states)
    for _ in range(30):
        seq_acc = []
        for i in range(3):
            seq[i], a = hmc_step(targets[i], seq[i], seq_cfgs[i])
            seq_acc.append(a)
        lad, acc = hmc_ladder_step(targets, lad, lad_cfgs)
        np.testing.assert_array_equal(acc, seq_acc)
        for a, b in zip(seq, lad):
            np.testing.assert_array_equal(a, b)
    assert hmc_ladder_step([], [], [])[0] == []
